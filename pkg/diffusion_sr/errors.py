"""Exception hierarchy shared by the diffusion_sr modules."""

from __future__ import annotations


class DiffusionSRError(Exception):
    """Base class for all errors raised by diffusion_sr."""


class ImageFormatError(DiffusionSRError, ValueError):
    """Raised when an image or flow file cannot be decoded."""

    def __init__(self, reason: str, detail: str | None = None) -> None:
        self.reason = reason
        message = reason if not detail else f"{reason}: {detail}"
        super().__init__(message)


class DimensionMismatchError(DiffusionSRError, ValueError):
    """Raised when image, flow or operator shapes do not agree."""


class StabilityError(DiffusionSRError):
    """Raised when a time step or iterate violates a numerical contract."""


class ConfigError(DiffusionSRError):
    """Raised for invalid configuration files, manifests or search grids."""


__all__ = [
    "DiffusionSRError",
    "ImageFormatError",
    "DimensionMismatchError",
    "StabilityError",
    "ConfigError",
]
