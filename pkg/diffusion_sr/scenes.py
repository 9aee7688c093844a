"""Deterministic synthetic 8-bit scenes standing in for the usual test photographs."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .image import Image
from .operators import gaussian_smooth


def _grid(size: int) -> tuple[np.ndarray, np.ndarray]:
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    return (xs + 0.5) / size, (ys + 0.5) / size


def _finish(arr: np.ndarray) -> Image:
    return Image(np.floor(np.clip(arr, 0.0, 255.0) + 0.5))


def text_scene(size: int = 128, seed: int = 0) -> Image:
    """Dark glyph-like strokes on a bright page, laid out in lines."""
    rng = np.random.default_rng(seed)
    page = np.full((size, size), 230.0)
    glyph = max(4, size // 16)
    stroke = max(1, glyph // 4)
    margin = glyph
    for top in range(margin, size - margin - glyph, int(glyph * 1.6)):
        for left in range(margin, size - margin - glyph, glyph + stroke):
            if rng.random() < 0.15:
                continue
            pattern = rng.integers(0, 4)
            if pattern == 0:
                page[top : top + glyph, left : left + stroke] = 25.0
            elif pattern == 1:
                page[top : top + stroke, left : left + glyph] = 25.0
                page[top : top + glyph, left + glyph // 2 : left + glyph // 2 + stroke] = 25.0
            elif pattern == 2:
                page[top : top + glyph, left : left + stroke] = 25.0
                page[top + glyph - stroke : top + glyph, left : left + glyph] = 25.0
            else:
                page[top : top + glyph, left : left + glyph] = 25.0
                page[top + stroke : top + glyph - stroke, left + stroke : left + glyph - stroke] = 230.0
    return _finish(page)


def house_scene(size: int = 128, seed: int = 0) -> Image:
    """Piecewise-constant house: sky, wall, roof, door and windows."""
    x, y = _grid(size)
    img = np.where(y < 0.45, 170.0 + 40.0 * y, 90.0)
    wall = (x > 0.2) & (x < 0.8) & (y > 0.45) & (y < 0.95)
    img = np.where(wall, 200.0, img)
    roof = (y > 0.2) & (y <= 0.45) & (np.abs(x - 0.5) < (y - 0.2) * 1.3)
    img = np.where(roof, 60.0, img)
    door = (x > 0.44) & (x < 0.56) & (y > 0.7) & (y < 0.95)
    img = np.where(door, 110.0, img)
    for cx in (0.3, 0.7):
        window = (np.abs(x - cx) < 0.07) & (y > 0.55) & (y < 0.68)
        img = np.where(window, 40.0, img)
    rng = np.random.default_rng(seed)
    img = img + rng.normal(0.0, 2.0, size=img.shape)
    return _finish(img)


def peppers_scene(size: int = 128, seed: int = 0) -> Image:
    """Smooth overlapping blobs with soft shading."""
    rng = np.random.default_rng(seed)
    x, y = _grid(size)
    img = np.full((size, size), 50.0)
    for _ in range(7):
        cx, cy = rng.uniform(0.15, 0.85, size=2)
        rx, ry = rng.uniform(0.1, 0.25, size=2)
        level = rng.uniform(90.0, 230.0)
        r2 = ((x - cx) / rx) ** 2 + ((y - cy) / ry) ** 2
        shade = level * (1.0 - 0.35 * np.clip(r2, 0.0, 1.0))
        img = np.where(r2 < 1.0, shade, img)
    return _finish(gaussian_smooth(img, size / 128.0))


def bridge_scene(size: int = 128, seed: int = 0) -> Image:
    """Oriented stripe textures in patches, rich in fine detail."""
    rng = np.random.default_rng(seed)
    x, y = _grid(size)
    img = np.zeros((size, size))
    patches = 4
    for row in range(patches):
        for col in range(patches):
            mask = (
                (x >= col / patches)
                & (x < (col + 1) / patches)
                & (y >= row / patches)
                & (y < (row + 1) / patches)
            )
            angle = rng.uniform(0.0, np.pi)
            freq = rng.uniform(6.0, 18.0)
            phase = rng.uniform(0.0, 2.0 * np.pi)
            wave = np.sin(2.0 * np.pi * freq * (x * np.cos(angle) + y * np.sin(angle)) + phase)
            img = np.where(mask, 128.0 + rng.uniform(40.0, 90.0) * wave, img)
    return _finish(img)


SCENES: dict[str, Callable[..., Image]] = {
    "text": text_scene,
    "house": house_scene,
    "peppers": peppers_scene,
    "bridge": bridge_scene,
}


def make_scene(name: str, size: int = 128, seed: int = 0) -> Image:
    try:
        factory = SCENES[name]
    except KeyError as exc:
        raise ValueError(f"Unknown scene {name!r}; expected one of {', '.join(SCENES)}") from exc
    return factory(size=size, seed=seed)


__all__ = ["SCENES", "make_scene", "text_scene", "house_scene", "peppers_scene", "bridge_scene"]
