from __future__ import annotations

import numpy as np
import pytest

from diffusion_sr.image import Image


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


def smooth_pattern(width: int, height: int) -> np.ndarray:
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    return (
        128.0
        + 50.0 * np.sin(2.0 * np.pi * xs / 19.0) * np.cos(2.0 * np.pi * ys / 23.0)
        + 30.0 * np.cos(2.0 * np.pi * (xs + ys) / 29.0)
    )


@pytest.fixture
def smooth_image() -> Image:
    return Image(smooth_pattern(48, 48))


@pytest.fixture
def noisy_image(rng: np.random.Generator) -> Image:
    return Image(np.clip(rng.normal(128.0, 40.0, size=(64, 64)), 0.0, 255.0))
