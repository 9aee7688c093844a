"""Diffusion regularisers: homogeneous, edge-enhancing (EED) and sector diffusion (SD).

Each operator is available as a raw increment ``A(u)`` for the super-resolution
solver and as an explicit denoising evolution ``u <- u + tau * A(u)``.
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .config import NUM_SECTORS, SECTOR_RADIUS, TAU_EED_DENOISE, TAU_HOMOGENEOUS
from .errors import StabilityError
from .image import Image
from .operators import gaussian_smooth, reflect_index

LOGGER = logging.getLogger(__name__)

DIFFUSIVITY_CONSTANT = 3.31488

IterationCallback = Callable[[int, np.ndarray], None]


class DiffusivityParams(BaseModel):
    """Contrast parameter ``lambda`` and pre-smoothing scale ``sigma``."""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    lam: float = Field(alias="lambda", gt=0.0, description="Contrast parameter (grey levels).")
    sigma: float = Field(default=0.0, ge=0.0, description="Gaussian pre-smoothing (pixels).")


class Regulariser(str, Enum):
    HD = "hd"
    EED = "eed"
    SD = "sd"


@dataclass(frozen=True, slots=True)
class DiffusionState:
    current: Image
    step_count: int = 0
    tau: float = TAU_EED_DENOISE

    def __post_init__(self) -> None:
        if self.step_count < 0:
            raise ValueError("step_count must be non-negative")
        if not self.tau > 0:
            raise StabilityError(f"Time step must be positive, got {self.tau}")

    def advance(self, increment: np.ndarray) -> "DiffusionState":
        return replace(self, current=Image(self.current.data + self.tau * increment), step_count=self.step_count + 1)


def diffusivity(x: float | np.ndarray, lam: float) -> float | np.ndarray:
    """``g(x) = 1 - exp(-3.31488 / (x / lam)^8)`` with ``g(0) = 1``."""
    arr = np.abs(np.asarray(x, dtype=np.float64))
    with np.errstate(divide="ignore", over="ignore"):
        ratio = (lam / arr) ** 8
        g = -np.expm1(-DIFFUSIVITY_CONSTANT * ratio)
    g = np.where(arr == 0.0, 1.0, g)
    if np.ndim(x) == 0:
        return float(g)
    return g


# ----------------------------------------------------------------------
# Homogeneous diffusion
# ----------------------------------------------------------------------
def laplacian(u: np.ndarray, grid_size: float = 1.0) -> np.ndarray:
    """5-point Laplacian with zero flux across the image border."""
    out = np.zeros_like(u, dtype=np.float64)
    dx = np.diff(u, axis=1)
    out[:, :-1] += dx
    out[:, 1:] -= dx
    dy = np.diff(u, axis=0)
    out[:-1, :] += dy
    out[1:, :] -= dy
    return out / (grid_size * grid_size)


def homogeneous_step(state: DiffusionState, grid_size: float = 1.0) -> Image:
    bound = 0.25 * grid_size * grid_size
    if state.tau > bound:
        raise StabilityError(f"tau={state.tau} exceeds the explicit Laplacian bound {bound}")
    return state.advance(laplacian(state.current.data, grid_size)).current


def hd_denoise(
    f: Image, tau: float = TAU_HOMOGENEOUS, k_max: int = 0, callback: Optional[IterationCallback] = None
) -> Image:
    if tau > 0.25:
        raise StabilityError(f"tau={tau} exceeds the explicit Laplacian bound 0.25")
    state = DiffusionState(f, tau=tau)
    for _ in range(k_max):
        state = state.advance(laplacian(state.current.data))
        if callback is not None:
            callback(state.step_count, state.current.data)
    return state.current


# ----------------------------------------------------------------------
# Edge-enhancing diffusion
# ----------------------------------------------------------------------
def _central_gradient(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    height, width = u.shape
    rows = reflect_index(np.arange(-1, height + 1), height)
    cols = reflect_index(np.arange(-1, width + 1), width)
    padded = u[np.ix_(rows, cols)]
    gx = 0.5 * (padded[1:-1, 2:] - padded[1:-1, :-2])
    gy = 0.5 * (padded[2:, 1:-1] - padded[:-2, 1:-1])
    return gx, gy


def eed_tensor(u: np.ndarray, params: DiffusivityParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Entries ``(a, b, c)`` of ``D = g(|grad u_sigma|^2) v1 v1^T + v2 v2^T``."""
    gx, gy = _central_gradient(gaussian_smooth(u, params.sigma))
    mag2 = gx * gx + gy * gy
    g = diffusivity(mag2, params.lam)
    safe = np.where(mag2 > 0.0, mag2, 1.0)
    shrink = np.where(mag2 > 0.0, (g - 1.0) / safe, 0.0)
    a = 1.0 + shrink * gx * gx
    b = shrink * gx * gy
    c = 1.0 + shrink * gy * gy
    return a, b, c


def anisotropic_divergence(u: np.ndarray, a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """``div(D grad u)`` from half-grid fluxes; border fluxes are zero so the sum is conserved."""
    gx, gy = _central_gradient(u)
    flux_x = 0.5 * (a[:, :-1] + a[:, 1:]) * (u[:, 1:] - u[:, :-1]) + 0.5 * (b[:, :-1] + b[:, 1:]) * 0.5 * (
        gy[:, :-1] + gy[:, 1:]
    )
    flux_y = 0.5 * (c[:-1, :] + c[1:, :]) * (u[1:, :] - u[:-1, :]) + 0.5 * (b[:-1, :] + b[1:, :]) * 0.5 * (
        gx[:-1, :] + gx[1:, :]
    )
    out = np.zeros_like(u, dtype=np.float64)
    out[:, :-1] += flux_x
    out[:, 1:] -= flux_x
    out[:-1, :] += flux_y
    out[1:, :] -= flux_y
    return out


def eed_increment(u: np.ndarray, params: DiffusivityParams) -> np.ndarray:
    a, b, c = eed_tensor(u, params)
    return anisotropic_divergence(u, a, b, c)


def eed_operator(u: Image, params: DiffusivityParams) -> Image:
    return Image(eed_increment(u.data, params))


def eed_denoise(
    f: Image,
    params: DiffusivityParams,
    tau: float = TAU_EED_DENOISE,
    k_max: int = 0,
    callback: Optional[IterationCallback] = None,
) -> Image:
    state = DiffusionState(f, tau=tau)
    for _ in range(k_max):
        state = state.advance(eed_increment(state.current.data, params))
        if callback is not None:
            callback(state.step_count, state.current.data)
    LOGGER.debug("EED denoising finished after %d steps", state.step_count)
    return state.current


# ----------------------------------------------------------------------
# Sector diffusion
# ----------------------------------------------------------------------
@dataclass(frozen=True, slots=True)
class Sector:
    """Offsets ``(dy, dx)`` of one angular sector plus its smoothing table.

    ``weights`` has one row per smoothed position, the centre first and then the
    members in ``offsets`` order, and one column per sample in that same order.
    Rows are normalised Gaussians of the distance between positions.
    """

    index: int
    offsets: np.ndarray
    distances: np.ndarray
    inverse_square: np.ndarray
    weights: Optional[np.ndarray]


@dataclass(frozen=True, slots=True)
class SectorGeometry:
    num_sectors: int
    radius: float
    sigma: float
    sectors: tuple[Sector, ...]

    @property
    def extent(self) -> int:
        return int(math.floor(self.radius))

    @property
    def num_offsets(self) -> int:
        return sum(len(sector.offsets) for sector in self.sectors)

    def tau_max(self) -> float:
        """Largest explicit step keeping the max-min principle when every g = 1."""
        total = sum(float(sector.inverse_square.sum()) for sector in self.sectors)
        return 1.0 / total


def sector_index(dx: int, dy: int, num_sectors: int) -> int:
    """Half-open angular bin ``[l * 2pi/M, (l + 1) * 2pi/M)`` of the ray towards ``(dx, dy)``."""
    angle = math.atan2(dy, dx) % (2.0 * math.pi)
    position = num_sectors * angle / (2.0 * math.pi)
    return int(math.floor(position + 1e-9)) % num_sectors


def _normalised_gaussian(sq_dist: np.ndarray, sigma: float) -> np.ndarray:
    # Shift by the row minimum so tiny sigma does not underflow to an all-zero row.
    shifted = sq_dist - sq_dist.min(axis=-1, keepdims=True)
    weights = np.exp(-shifted / (2.0 * sigma * sigma))
    return weights / weights.sum(axis=-1, keepdims=True)


@functools.lru_cache(maxsize=32)
def build_sector_geometry(num_sectors: int = NUM_SECTORS, radius: float = SECTOR_RADIUS, sigma: float = 0.0) -> SectorGeometry:
    if num_sectors < 1:
        raise ValueError("num_sectors must be >= 1")
    if radius < 1:
        raise ValueError("radius must be >= 1")
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    extent = int(math.floor(radius))
    members: dict[int, list[tuple[int, int]]] = {}
    for dy in range(-extent, extent + 1):
        for dx in range(-extent, extent + 1):
            if 0 < dx * dx + dy * dy <= radius * radius:
                members.setdefault(sector_index(dx, dy, num_sectors), []).append((dy, dx))

    sectors = []
    for index in sorted(members):
        offsets = np.array(members[index], dtype=np.int64)
        sq = (offsets.astype(np.float64) ** 2).sum(axis=1)
        weights = None
        if sigma > 0:
            # The smoothing segment of a sector starts at the centre pixel.
            segment = np.vstack([np.zeros((1, 2), dtype=np.int64), offsets]).astype(np.float64)
            pairwise = ((segment[:, None, :] - segment[None, :, :]) ** 2).sum(axis=-1)
            weights = _normalised_gaussian(pairwise, sigma)
        sectors.append(
            Sector(
                index=index,
                offsets=offsets,
                distances=np.sqrt(sq),
                inverse_square=1.0 / sq,
                weights=weights,
            )
        )
    geometry = SectorGeometry(num_sectors=num_sectors, radius=float(radius), sigma=float(sigma), sectors=tuple(sectors))
    LOGGER.debug(
        "Built sector geometry M=%d rho=%s sigma=%s with %d offsets", num_sectors, radius, sigma, geometry.num_offsets
    )
    return geometry


def _padded(u: np.ndarray, extent: int) -> np.ndarray:
    height, width = u.shape
    rows = reflect_index(np.arange(-extent, height + extent), height)
    cols = reflect_index(np.arange(-extent, width + extent), width)
    return u[np.ix_(rows, cols)]


def _sector_stack(padded: np.ndarray, sector: Sector, extent: int, shape: tuple[int, int]) -> np.ndarray:
    height, width = shape
    return np.stack(
        [padded[extent + dy : extent + dy + height, extent + dx : extent + dx + width] for dy, dx in sector.offsets]
    )


def _smoothed(stack: np.ndarray, sector: Sector, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if sector.weights is None:
        return stack, u
    table = sector.weights
    smoothed = np.tensordot(table[:, 1:], stack, axes=1) + table[:, :1, None] * u
    return smoothed[1:], smoothed[0]


@dataclass(frozen=True, slots=True)
class SectorSample:
    sector: int
    offsets: np.ndarray
    members: np.ndarray
    centre: float


def _matching_geometry(params: DiffusivityParams, geometry: SectorGeometry) -> SectorGeometry:
    if geometry.sigma == params.sigma:
        return geometry
    return build_sector_geometry(geometry.num_sectors, geometry.radius, params.sigma)


def sector_smooth(u: Image, center: tuple[int, int], geometry: SectorGeometry) -> list[SectorSample]:
    """Sector-restricted Gaussian averages around pixel ``center = (row, col)``."""
    row, col = center
    if not (0 <= row < u.height and 0 <= col < u.width):
        raise IndexError(f"Centre {center} outside image {u.shape}")
    samples = []
    for sector in geometry.sectors:
        rows = reflect_index(row + sector.offsets[:, 0], u.height)
        cols = reflect_index(col + sector.offsets[:, 1], u.width)
        values = u.data[rows, cols]
        if sector.weights is None:
            members, centre = values.copy(), float(u.data[row, col])
        else:
            smoothed = sector.weights @ np.concatenate([[u.data[row, col]], values])
            members, centre = smoothed[1:], float(smoothed[0])
        samples.append(SectorSample(sector=sector.index, offsets=sector.offsets.copy(), members=members, centre=centre))
    return samples


def sd_increment(u: np.ndarray, params: DiffusivityParams, geometry: SectorGeometry) -> np.ndarray:
    geometry = _matching_geometry(params, geometry)
    extent = geometry.extent
    padded = _padded(u, extent)
    out = np.zeros_like(u, dtype=np.float64)
    for sector in geometry.sectors:
        stack = _sector_stack(padded, sector, extent, u.shape)
        members, centre = _smoothed(stack, sector, u)
        g = diffusivity((members - centre) / sector.distances[:, None, None], params.lam)
        out += np.tensordot(sector.inverse_square, g * (stack - u), axes=1)
    return out


def sd_operator(u: Image, params: DiffusivityParams, geometry: SectorGeometry) -> Image:
    return Image(sd_increment(u.data, params, geometry))


def sd_denoise(
    f: Image,
    params: DiffusivityParams,
    geometry: SectorGeometry,
    tau: float | None = None,
    k_max: int = 0,
    callback: Optional[IterationCallback] = None,
) -> Image:
    geometry = _matching_geometry(params, geometry)
    tau_max = geometry.tau_max()
    tau = tau_max if tau is None else tau
    if tau > tau_max * (1.0 + 1e-12):
        raise StabilityError(f"tau={tau} exceeds the max-min bound {tau_max:.6g} of this sector geometry")
    state = DiffusionState(f, tau=tau)
    for _ in range(k_max):
        state = state.advance(sd_increment(state.current.data, params, geometry))
        if callback is not None:
            callback(state.step_count, state.current.data)
    LOGGER.debug("SD denoising finished after %d steps (tau=%.5f)", state.step_count, tau)
    return state.current


def regulariser_increment(
    kind: Regulariser, u: np.ndarray, params: DiffusivityParams | None, geometry: SectorGeometry | None
) -> np.ndarray:
    if kind is Regulariser.HD:
        return laplacian(u)
    if params is None:
        raise ValueError(f"{kind.value} regularisation needs diffusivity parameters")
    if kind is Regulariser.EED:
        return eed_increment(u, params)
    if geometry is None:
        geometry = build_sector_geometry(NUM_SECTORS, SECTOR_RADIUS, params.sigma)
    return sd_increment(u, params, geometry)


__all__ = [
    "DIFFUSIVITY_CONSTANT",
    "DiffusivityParams",
    "DiffusionState",
    "Regulariser",
    "Sector",
    "SectorGeometry",
    "SectorSample",
    "diffusivity",
    "laplacian",
    "homogeneous_step",
    "hd_denoise",
    "eed_tensor",
    "anisotropic_divergence",
    "eed_increment",
    "eed_operator",
    "eed_denoise",
    "sector_index",
    "build_sector_geometry",
    "sector_smooth",
    "sd_increment",
    "sd_operator",
    "sd_denoise",
    "regulariser_increment",
]
