"""Variational optical flow: robust brightness constancy plus robust smoothness.

Coarse-to-fine warping on a fine-grained pyramid, outer fixed-point iterations
for re-warping, inner fixed-point iterations for the lagged robust weights and
red-black SOR sweeps for the resulting linear systems.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .config import (
    FLOW_EPSILON,
    FLOW_ETA,
    FLOW_ETA1,
    FLOW_ETA2,
    FLOW_OMEGA,
    FLOW_SOR_ITERATIONS,
    PYRAMID_MIN_SIZE,
)
from .errors import DimensionMismatchError
from .image import FlowField, Image, require_same_shape
from .operators import gaussian_smooth, reflect_index, resize_bilinear, warp_matrix

LOGGER = logging.getLogger(__name__)


class FlowParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    alpha_of: float = Field(default=15.6, gt=0.0, description="Smoothness weight alpha_OF.")
    sigma_of: float = Field(default=1.0, ge=0.0, description="Gaussian pre-smoothing sigma_OF (pixels).")
    eta: float = Field(default=FLOW_ETA, gt=0.0, lt=1.0, description="Pyramid downsampling factor.")
    eta1: int = Field(default=FLOW_ETA1, ge=1, description="Inner fixed-point iterations.")
    eta2: int = Field(default=FLOW_ETA2, ge=1, description="Outer fixed-point iterations.")
    omega: float = Field(default=FLOW_OMEGA, gt=0.0, lt=2.0, description="SOR relaxation.")
    epsilon: float = Field(default=FLOW_EPSILON, gt=0.0, description="Robust penaliser regularisation.")
    sor_iterations: int = Field(default=FLOW_SOR_ITERATIONS, ge=1)
    min_size: int = Field(default=PYRAMID_MIN_SIZE, ge=2)


def pyramid_depth(size: int, eta: float, min_size: int = PYRAMID_MIN_SIZE) -> int:
    if size <= min_size:
        return 1
    return max(1, int(math.ceil(math.log(min_size / size) / math.log(eta))))


def pyramid_shapes(shape: tuple[int, int], eta: float, min_size: int = PYRAMID_MIN_SIZE) -> list[tuple[int, int]]:
    depth = pyramid_depth(min(shape), eta, min_size)
    return [
        (int(math.ceil(shape[0] * eta**k)), int(math.ceil(shape[1] * eta**k)))
        for k in range(depth)
    ]


def _pyramid_arrays(data: np.ndarray, eta: float, min_size: int) -> list[np.ndarray]:
    levels = []
    for k, shape in enumerate(pyramid_shapes(data.shape, eta, min_size)):
        if k == 0:
            levels.append(np.array(data, dtype=np.float64))
            continue
        shrink = eta**k
        sigma = 0.5 * math.sqrt(1.0 / (shrink * shrink) - 1.0)
        levels.append(resize_bilinear(gaussian_smooth(data, sigma), shape))
    return levels


def build_pyramid(img: Image, eta: float, min_size: int = PYRAMID_MIN_SIZE) -> list[Image]:
    """Levels of size ``ceil(dims * eta**k)``, finest first."""
    if not 0.0 < eta < 1.0:
        raise ValueError(f"eta must lie in (0, 1), got {eta}")
    return [Image(level) for level in _pyramid_arrays(img.data, eta, min_size)]


def _derivatives(arr: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Fourth-order central differences with reflecting boundaries."""
    height, width = arr.shape
    rows = reflect_index(np.arange(-2, height + 2), height)
    cols = reflect_index(np.arange(-2, width + 2), width)
    p = arr[np.ix_(rows, cols)]
    dx = (p[2:-2, :-4] - 8.0 * p[2:-2, 1:-3] + 8.0 * p[2:-2, 3:-1] - p[2:-2, 4:]) / 12.0
    dy = (p[:-4, 2:-2] - 8.0 * p[1:-3, 2:-2] + 8.0 * p[3:-1, 2:-2] - p[4:, 2:-2]) / 12.0
    return dx, dy


def _neighbour_sum(x: np.ndarray, wx: np.ndarray, wy: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    out[:, :-1] += wx * x[:, 1:]
    out[:, 1:] += wx * x[:, :-1]
    out[:-1, :] += wy * x[1:, :]
    out[1:, :] += wy * x[:-1, :]
    return out


def _gradient_norm2(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    ux = np.gradient(u, axis=1) if u.shape[1] > 1 else np.zeros_like(u)
    uy = np.gradient(u, axis=0) if u.shape[0] > 1 else np.zeros_like(u)
    vx = np.gradient(v, axis=1) if v.shape[1] > 1 else np.zeros_like(v)
    vy = np.gradient(v, axis=0) if v.shape[0] > 1 else np.zeros_like(v)
    return ux * ux + uy * uy + vx * vx + vy * vy


def _refine_level(
    ref: np.ndarray, target: np.ndarray, u: np.ndarray, v: np.ndarray, params: FlowParams
) -> tuple[np.ndarray, np.ndarray]:
    height, width = ref.shape
    red = (np.add.outer(np.arange(height), np.arange(width)) % 2) == 0
    colours = (red, ~red)
    eps2 = params.epsilon * params.epsilon
    for _ in range(params.eta2):
        warped = (warp_matrix(FlowField(u, v)) @ target.reshape(-1)).reshape(ref.shape)
        ix, iy = _derivatives(0.5 * (ref + warped))
        iz = warped - ref
        ixx, ixy, iyy, ixz, iyz = ix * ix, ix * iy, iy * iy, ix * iz, iy * iz
        du = np.zeros_like(u)
        dv = np.zeros_like(v)
        for _ in range(params.eta1):
            residual = iz + ix * du + iy * dv
            psi_data = 0.5 / np.sqrt(residual * residual + eps2)
            psi_smooth = 0.5 / np.sqrt(_gradient_norm2(u + du, v + dv) + eps2)
            wx = params.alpha_of * 0.5 * (psi_smooth[:, :-1] + psi_smooth[:, 1:])
            wy = params.alpha_of * 0.5 * (psi_smooth[:-1, :] + psi_smooth[1:, :])
            weight_sum = _neighbour_sum(np.ones_like(u), wx, wy)
            base_u = _neighbour_sum(u, wx, wy) - weight_sum * u
            base_v = _neighbour_sum(v, wx, wy) - weight_sum * v
            denom_u = psi_data * ixx + weight_sum
            denom_v = psi_data * iyy + weight_sum
            for _ in range(params.sor_iterations):
                for mask in colours:
                    target_u = (base_u + _neighbour_sum(du, wx, wy) - psi_data * (ixy * dv + ixz)) / denom_u
                    du = np.where(mask, (1.0 - params.omega) * du + params.omega * target_u, du)
                    target_v = (base_v + _neighbour_sum(dv, wx, wy) - psi_data * (ixy * du + iyz)) / denom_v
                    dv = np.where(mask, (1.0 - params.omega) * dv + params.omega * target_v, dv)
        u = u + du
        v = v + dv
    return u, v


def estimate_flow(reference: Image, target: Image, params: FlowParams | None = None) -> FlowField:
    """Flow ``w`` on the reference grid with ``reference(x) ~ target(x + w(x))``."""
    params = params or FlowParams()
    require_same_shape(reference, target, "reference and target")
    ref_levels = _pyramid_arrays(gaussian_smooth(reference.data, params.sigma_of), params.eta, params.min_size)
    tgt_levels = _pyramid_arrays(gaussian_smooth(target.data, params.sigma_of), params.eta, params.min_size)
    LOGGER.debug("Estimating flow on %d pyramid levels", len(ref_levels))

    u = np.zeros(ref_levels[-1].shape)
    v = np.zeros(ref_levels[-1].shape)
    previous_shape = ref_levels[-1].shape
    for ref, tgt in zip(reversed(ref_levels), reversed(tgt_levels)):
        if ref.shape != previous_shape:
            u = resize_bilinear(u, ref.shape) * (ref.shape[1] / previous_shape[1])
            v = resize_bilinear(v, ref.shape) * (ref.shape[0] / previous_shape[0])
            previous_shape = ref.shape
        u, v = _refine_level(ref, tgt, u, v, params)
    return FlowField(u, v)


def estimate_flows(
    frames: Sequence[Image],
    reference_index: int,
    params: FlowParams | None = None,
    *,
    workers: int = 1,
) -> list[FlowField]:
    """Flow of every frame towards the reference frame; the reference gets a zero field.

    Frame ``i`` is the first argument so that ``frame_i(x) ~ reference(x + w_i(x))``,
    which is the gather convention of the warping operator.
    """
    if not -len(frames) <= reference_index < len(frames):
        raise DimensionMismatchError(f"Reference index {reference_index} outside {len(frames)} frames")
    reference = frames[reference_index]
    ref_pos = reference_index % len(frames)

    def _one(index: int) -> FlowField:
        if index == ref_pos:
            return FlowField.zeros(reference.width, reference.height)
        LOGGER.info("Estimating flow for frame %d/%d", index + 1, len(frames))
        return estimate_flow(frames[index], reference, params)

    if workers <= 1:
        return [_one(i) for i in range(len(frames))]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_one, range(len(frames))))


def total_variation(flow: FlowField) -> float:
    """Sum of forward-difference magnitudes of both components."""
    tv = 0.0
    for comp in (flow.u, flow.v):
        tv += float(np.abs(np.diff(comp, axis=1)).sum() + np.abs(np.diff(comp, axis=0)).sum())
    return tv


def mean_endpoint_error(a: FlowField, b: FlowField, margin: int = 0) -> float:
    require_same_shape(a, b, "flows")
    err = np.hypot(a.u - b.u, a.v - b.v)
    if margin:
        err = err[margin:-margin, margin:-margin]
    return float(err.mean())


__all__ = [
    "FlowParams",
    "pyramid_depth",
    "pyramid_shapes",
    "build_pyramid",
    "estimate_flow",
    "estimate_flows",
    "total_variation",
    "mean_endpoint_error",
]
