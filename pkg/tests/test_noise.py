from __future__ import annotations

import logging

import numpy as np
import pytest
from scipy.stats import norm

from diffusion_sr.image import Image
from diffusion_sr.noise import add_clipped_awgn, standard_normal


def clipped_moments(mean: np.ndarray, sigma: float) -> tuple[np.ndarray, np.ndarray]:
    """Mean and second central moment about ``mean`` of ``clip(mean + sigma * Z, 0, 255)``."""
    a = (0.0 - mean) / sigma
    b = (255.0 - mean) / sigma
    pa, pb = norm.cdf(a), norm.sf(b)
    inside = norm.cdf(b) - pa
    first = sigma * (norm.pdf(a) - norm.pdf(b)) - mean * pa + (255.0 - mean) * pb
    second_inside = sigma**2 * (inside - (b * norm.pdf(b) - a * norm.pdf(a)))
    second = mean**2 * pa + (255.0 - mean) ** 2 * pb + second_inside
    return first, second


def test_zero_sigma_is_identity(noisy_image: Image) -> None:
    assert add_clipped_awgn(noisy_image, 0.0, seed=3) is noisy_image


def test_negative_sigma_is_rejected(noisy_image: Image) -> None:
    with pytest.raises(ValueError):
        add_clipped_awgn(noisy_image, -1.0, seed=3)


def test_noise_is_deterministic_per_seed() -> None:
    img = Image.constant(32, 32, 100.0)
    a = add_clipped_awgn(img, 20.0, seed=7)
    b = add_clipped_awgn(img, 20.0, seed=7)
    c = add_clipped_awgn(img, 20.0, seed=8)
    np.testing.assert_array_equal(a.data, b.data)
    assert not np.array_equal(a.data, c.data)


def test_standard_normal_statistics() -> None:
    samples = standard_normal((257, 255), seed=11)
    assert samples.shape == (257, 255)
    assert abs(samples.mean()) < 0.02
    assert samples.std() == pytest.approx(1.0, rel=0.02)


def test_values_stay_in_range() -> None:
    out = add_clipped_awgn(Image.constant(64, 64, 250.0), 80.0, seed=0)
    assert out.data.min() >= 0.0
    assert out.data.max() <= 255.0


@pytest.mark.parametrize("level", [128.0, 20.0, 240.0])
def test_empirical_sd_matches_clipped_gaussian(level: float) -> None:
    sigma = 40.0
    out = add_clipped_awgn(Image.constant(256, 256, level), sigma, seed=5)
    first, second = clipped_moments(np.array(level), sigma)
    expected_sd = float(np.sqrt(second - first**2))
    assert out.data.std() == pytest.approx(expected_sd, rel=0.02)
    assert out.data.std() <= 1.02 * sigma


def test_noise_generation_is_logged(noisy_image: Image, caplog: pytest.LogCaptureFixture) -> None:
    with caplog.at_level(logging.DEBUG, logger="diffusion_sr.noise"):
        add_clipped_awgn(noisy_image, 5.0, seed=11)
    assert "sigma=5 seed=11" in caplog.text
