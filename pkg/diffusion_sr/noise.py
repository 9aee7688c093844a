"""Clipped additive white Gaussian noise."""

from __future__ import annotations

import logging

import numpy as np

from .config import NOISE_ALGORITHM
from .image import Image

LOGGER = logging.getLogger(__name__)


def standard_normal(shape: tuple[int, ...], seed: int) -> np.ndarray:
    """Box-Muller transform over PCG64 uniforms (algorithm id ``pcg64-box-muller``)."""
    count = int(np.prod(shape))
    pairs = (count + 1) // 2
    rng = np.random.Generator(np.random.PCG64(seed))
    u1 = 1.0 - rng.random(pairs)  # (0, 1], keeps log finite
    u2 = rng.random(pairs)
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    samples = np.empty(2 * pairs)
    samples[0::2] = radius * np.cos(angle)
    samples[1::2] = radius * np.sin(angle)
    return samples[:count].reshape(shape)


def add_clipped_awgn(img: Image, sigma_noise: float, seed: int) -> Image:
    """Add i.i.d. N(0, sigma_noise^2) noise and clamp to [0, 255]."""
    if sigma_noise < 0:
        raise ValueError("sigma_noise must be non-negative")
    if sigma_noise == 0:
        return img
    noisy = img.data + sigma_noise * standard_normal(img.shape, seed)
    LOGGER.debug("Added clipped noise sigma=%g seed=%d to %dx%d image", sigma_noise, seed, img.width, img.height)
    return Image(np.clip(noisy, 0.0, 255.0))


__all__ = ["NOISE_ALGORITHM", "standard_normal", "add_clipped_awgn"]
