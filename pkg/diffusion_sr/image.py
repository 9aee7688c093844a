"""Image and flow-field value types plus the MSE error metric."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatchError, StabilityError


def _frozen_array(values: object, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-D grid, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be at least 1x1, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise StabilityError(f"{name} contains non-finite values")
    if arr.flags.writeable:
        arr = arr.copy()
        arr.setflags(write=False)
    return arr


@dataclass(frozen=True, slots=True)
class Image:
    """Immutable 2-D grid of double-precision intensities, row-major."""

    data: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "data", _frozen_array(self.data, "Image"))

    @classmethod
    def from_values(cls, width: int, height: int, values: Sequence[float]) -> "Image":
        flat = np.asarray(values, dtype=np.float64)
        if flat.size != width * height:
            raise DimensionMismatchError(
                f"Expected {width * height} values for {width}x{height}, got {flat.size}"
            )
        return cls(flat.reshape(height, width))

    @classmethod
    def constant(cls, width: int, height: int, value: float) -> "Image":
        return cls(np.full((height, width), float(value)))

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def size(self) -> int:
        return int(self.data.size)

    def values(self) -> np.ndarray:
        """Row-major flat view of the intensities."""
        return self.data.reshape(-1)

    def __repr__(self) -> str:
        return f"Image(width={self.width}, height={self.height})"


@dataclass(frozen=True, slots=True)
class FlowField:
    """Per-pixel displacement field; ``u`` is horizontal, ``v`` vertical (pixels)."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self) -> None:
        u = _frozen_array(self.u, "FlowField.u")
        v = _frozen_array(self.v, "FlowField.v")
        if u.shape != v.shape:
            raise DimensionMismatchError(
                f"Flow components differ in shape: {u.shape} vs {v.shape}"
            )
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @classmethod
    def zeros(cls, width: int, height: int) -> "FlowField":
        return cls(np.zeros((height, width)), np.zeros((height, width)))

    @classmethod
    def constant(cls, width: int, height: int, du: float, dv: float) -> "FlowField":
        return cls(np.full((height, width), float(du)), np.full((height, width), float(dv)))

    @property
    def width(self) -> int:
        return int(self.u.shape[1])

    @property
    def height(self) -> int:
        return int(self.u.shape[0])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def endpoint_norm(self) -> np.ndarray:
        return np.hypot(self.u, self.v)

    def scaled(self, factor: float) -> "FlowField":
        return FlowField(self.u * factor, self.v * factor)

    def __add__(self, other: "FlowField") -> "FlowField":
        if other.shape != self.shape:
            raise DimensionMismatchError(f"Cannot add flows {self.shape} and {other.shape}")
        return FlowField(self.u + other.u, self.v + other.v)

    def __repr__(self) -> str:
        return f"FlowField(width={self.width}, height={self.height})"


def require_same_shape(a: Image | FlowField, b: Image | FlowField, what: str = "operands") -> None:
    if a.shape != b.shape:
        raise DimensionMismatchError(f"Dimension mismatch between {what}: {a.shape} vs {b.shape}")


def mse(a: Image, b: Image) -> float:
    """Mean squared error ``(1/N) * sum((a - b)**2)``."""
    require_same_shape(a, b, "images")
    diff = a.data - b.data
    return float(np.mean(diff * diff))


__all__ = ["Image", "FlowField", "mse", "require_same_shape"]
