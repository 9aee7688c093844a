"""Linear observation operators: blur, down/upsampling, warping and their chains.

Every operator is assembled as a sparse matrix (or a separable pair of sparse
matrices) so that adjoints are exact transposes. Boundaries are half-sample
reflecting everywhere.
"""

from __future__ import annotations

import functools
import logging
import math
from enum import Enum
from typing import Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import sparse
from scipy.sparse.linalg import LinearOperator, aslinearoperator

from .config import BLUR_TRUNCATION
from .errors import DimensionMismatchError
from .image import FlowField, Image, require_same_shape

LOGGER = logging.getLogger(__name__)


def round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


class BlurSpec(BaseModel):
    """Gaussian point spread function; ``sigma_b = 0`` is the identity."""

    model_config = ConfigDict(frozen=True)

    sigma_b: float = Field(default=0.0, ge=0.0, description="Blur standard deviation in pixels.")
    truncation: float = Field(default=BLUR_TRUNCATION, gt=0.0)

    @property
    def radius(self) -> int:
        return int(math.ceil(self.truncation * self.sigma_b))


class ScaleSpec(BaseModel):
    """HR/LR grid sizes tied together by a scale factor >= 1."""

    model_config = ConfigDict(frozen=True)

    hr_width: int = Field(ge=1)
    hr_height: int = Field(ge=1)
    lr_width: int = Field(ge=1)
    lr_height: int = Field(ge=1)
    factor: float = Field(default=1.0, ge=1.0)

    @model_validator(mode="after")
    def _check_dims(self) -> "ScaleSpec":
        expected = (round_half_up(self.hr_width / self.factor), round_half_up(self.hr_height / self.factor))
        if (self.lr_width, self.lr_height) != expected:
            raise ValueError(
                f"LR dims {self.lr_width}x{self.lr_height} do not match HR dims / factor = "
                f"{expected[0]}x{expected[1]}"
            )
        return self

    @classmethod
    def from_factor(cls, hr_width: int, hr_height: int, factor: float) -> "ScaleSpec":
        return cls(
            hr_width=hr_width,
            hr_height=hr_height,
            lr_width=max(1, round_half_up(hr_width / factor)),
            lr_height=max(1, round_half_up(hr_height / factor)),
            factor=factor,
        )

    @property
    def hr_shape(self) -> tuple[int, int]:
        return (self.hr_height, self.hr_width)

    @property
    def lr_shape(self) -> tuple[int, int]:
        return (self.lr_height, self.lr_width)


class ObservationalModel(str, Enum):
    """The seven operator orders mapping the HR scene to one LR frame."""

    M1 = "m1"  # D B W u
    M2 = "m2"  # D W B u
    M3 = "m3"  # B D W u
    M4 = "m4"  # W D B u
    M5 = "m5"  # B W D u
    M6 = "m6"  # W B D u
    M2_1 = "m2_1"  # B u = D^T W^T f

    @classmethod
    def parse(cls, text: str) -> "ObservationalModel":
        key = text.strip().lower().replace(".", "_")
        if not key.startswith("m"):
            key = f"m{key}"
        try:
            return cls(key)
        except ValueError as exc:
            choices = ", ".join(m.value for m in cls)
            raise ValueError(f"Unknown observational model {text!r}; expected one of {choices}") from exc

    @property
    def warp_on_lr(self) -> bool:
        """True when the warp acts on the LR grid (D is applied to u first or right after B)."""
        return self in (ObservationalModel.M4, ObservationalModel.M5, ObservationalModel.M6)


# ----------------------------------------------------------------------
# 1-D building blocks
# ----------------------------------------------------------------------
def reflect_index(index: np.ndarray, n: int) -> np.ndarray:
    """Half-sample symmetric extension: ... 1 0 | 0 1 ... n-1 | n-1 n-2 ..."""
    period = np.mod(index, 2 * n)
    return np.where(period >= n, 2 * n - 1 - period, period)


def gaussian_kernel(sigma: float, truncation: float = BLUR_TRUNCATION) -> np.ndarray:
    """Sampled Gaussian cut at ``ceil(truncation * sigma)`` taps and renormalised."""
    if sigma <= 0.0:
        return np.ones(1)
    radius = int(math.ceil(truncation * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    weights = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return weights / weights.sum()


@functools.lru_cache(maxsize=64)
def blur_matrix_1d(n: int, sigma: float, truncation: float = BLUR_TRUNCATION) -> sparse.csr_matrix:
    if sigma <= 0.0:
        return sparse.identity(n, format="csr", dtype=np.float64)
    kernel = gaussian_kernel(sigma, truncation)
    radius = kernel.size // 2
    offsets = np.arange(-radius, radius + 1)
    rows = np.repeat(np.arange(n), kernel.size)
    cols = reflect_index(rows + np.tile(offsets, n), n)
    data = np.tile(kernel, n)
    return sparse.csr_matrix((data, (rows, cols)), shape=(n, n))


@functools.lru_cache(maxsize=64)
def resample_matrix_1d(n_out: int, n_in: int, step: float) -> sparse.csr_matrix:
    """Linear interpolation of ``n_in`` samples at output centres ``(j + 0.5) * step - 0.5``."""
    coords = (np.arange(n_out, dtype=np.float64) + 0.5) * step - 0.5
    base = np.floor(coords)
    frac = coords - base
    base = base.astype(np.int64)
    rows = np.concatenate([np.arange(n_out), np.arange(n_out)])
    cols = np.concatenate([reflect_index(base, n_in), reflect_index(base + 1, n_in)])
    data = np.concatenate([1.0 - frac, frac])
    matrix = sparse.csr_matrix((data, (rows, cols)), shape=(n_out, n_in))
    matrix.eliminate_zeros()
    return matrix


class SeparableOperator(LinearOperator):
    """``X -> R X C^T`` on row-major flattened grids, with exact adjoint ``Y -> R^T Y C``."""

    def __init__(self, rows: sparse.spmatrix, cols: sparse.spmatrix) -> None:
        self.rows = sparse.csr_matrix(rows)
        self.cols = sparse.csr_matrix(cols)
        self.in_shape = (self.rows.shape[1], self.cols.shape[1])
        self.out_shape = (self.rows.shape[0], self.cols.shape[0])
        super().__init__(
            dtype=np.float64,
            shape=(self.out_shape[0] * self.out_shape[1], self.in_shape[0] * self.in_shape[1]),
        )

    def _matvec(self, x: np.ndarray) -> np.ndarray:
        grid = np.asarray(x, dtype=np.float64).reshape(self.in_shape)
        partial = self.rows @ grid
        return np.asarray(self.cols @ partial.T).T.reshape(-1)

    def _rmatvec(self, y: np.ndarray) -> np.ndarray:
        grid = np.asarray(y, dtype=np.float64).reshape(self.out_shape)
        partial = self.rows.T @ grid
        return np.asarray(self.cols.T @ partial.T).T.reshape(-1)


def apply_operator(op: LinearOperator, arr: np.ndarray, out_shape: tuple[int, int]) -> np.ndarray:
    return np.asarray(op.matvec(arr.reshape(-1))).reshape(out_shape)


def apply_adjoint(op: LinearOperator, arr: np.ndarray, out_shape: tuple[int, int]) -> np.ndarray:
    return np.asarray(op.rmatvec(arr.reshape(-1))).reshape(out_shape)


# ----------------------------------------------------------------------
# Operator factories
# ----------------------------------------------------------------------
def blur_operator(shape: tuple[int, int], spec: BlurSpec) -> SeparableOperator:
    height, width = shape
    return SeparableOperator(
        blur_matrix_1d(height, spec.sigma_b, spec.truncation),
        blur_matrix_1d(width, spec.sigma_b, spec.truncation),
    )


def downsample_operator(scale: ScaleSpec) -> SeparableOperator:
    return SeparableOperator(
        resample_matrix_1d(scale.lr_height, scale.hr_height, scale.factor),
        resample_matrix_1d(scale.lr_width, scale.hr_width, scale.factor),
    )


def resize_operator(in_shape: tuple[int, int], out_shape: tuple[int, int], step: float | None = None) -> SeparableOperator:
    """Bilinear resampling between grids; ``step`` defaults to the per-axis size ratio."""
    step_y = step if step is not None else in_shape[0] / out_shape[0]
    step_x = step if step is not None else in_shape[1] / out_shape[1]
    return SeparableOperator(
        resample_matrix_1d(out_shape[0], in_shape[0], step_y),
        resample_matrix_1d(out_shape[1], in_shape[1], step_x),
    )


def warp_matrix(flow: FlowField) -> sparse.csr_matrix:
    """Sparse bilinear gather: row ``x`` samples the input at ``x + flow(x)``."""
    height, width = flow.shape
    ys, xs = np.mgrid[0:height, 0:width]
    sx = xs + flow.u
    sy = ys + flow.v
    x0 = np.floor(sx)
    y0 = np.floor(sy)
    fx = (sx - x0).reshape(-1)
    fy = (sy - y0).reshape(-1)
    x0 = x0.astype(np.int64).reshape(-1)
    y0 = y0.astype(np.int64).reshape(-1)
    rows = np.tile(np.arange(height * width), 4)
    cols = np.concatenate(
        [
            reflect_index(y0, height) * width + reflect_index(x0, width),
            reflect_index(y0, height) * width + reflect_index(x0 + 1, width),
            reflect_index(y0 + 1, height) * width + reflect_index(x0, width),
            reflect_index(y0 + 1, height) * width + reflect_index(x0 + 1, width),
        ]
    )
    data = np.concatenate(
        [(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy]
    )
    matrix = sparse.csr_matrix((data, (rows, cols)), shape=(height * width, height * width))
    matrix.eliminate_zeros()
    return matrix


def warp_operator(flow: FlowField) -> LinearOperator:
    return aslinearoperator(warp_matrix(flow))


# ----------------------------------------------------------------------
# Image-level operations
# ----------------------------------------------------------------------
def gaussian_smooth(arr: np.ndarray, sigma: float, truncation: float = BLUR_TRUNCATION) -> np.ndarray:
    """Separable Gaussian smoothing of a raw array with reflecting boundaries."""
    if sigma <= 0.0:
        return np.array(arr, dtype=np.float64)
    op = blur_operator(arr.shape, BlurSpec(sigma_b=sigma, truncation=truncation))
    return apply_operator(op, arr, arr.shape)


def resize_bilinear(arr: np.ndarray, out_shape: tuple[int, int], step: float | None = None) -> np.ndarray:
    if tuple(arr.shape) == tuple(out_shape) and step in (None, 1.0):
        return np.array(arr, dtype=np.float64)
    op = resize_operator(arr.shape, out_shape, step)
    return apply_operator(op, arr, out_shape)


def blur(img: Image, spec: BlurSpec) -> Image:
    if spec.sigma_b == 0.0:
        return img
    return Image(apply_operator(blur_operator(img.shape, spec), img.data, img.shape))


def _check_shape(img: Image, shape: tuple[int, int], what: str) -> None:
    if img.shape != shape:
        raise DimensionMismatchError(f"{what}: expected {shape}, got {img.shape}")


def downsample(img: Image, spec: ScaleSpec) -> Image:
    _check_shape(img, spec.hr_shape, "downsample input")
    return Image(apply_operator(downsample_operator(spec), img.data, spec.lr_shape))


def upsample(img: Image, spec: ScaleSpec) -> Image:
    """Exact transpose of :func:`downsample`."""
    _check_shape(img, spec.lr_shape, "upsample input")
    return Image(apply_adjoint(downsample_operator(spec), img.data, spec.hr_shape))


def interpolate_to_hr(img: Image, spec: ScaleSpec) -> Image:
    """Bilinear interpolation of an LR image onto the HR grid (same pixel-centre alignment as D)."""
    _check_shape(img, spec.lr_shape, "interpolation input")
    return Image(resize_bilinear(img.data, spec.hr_shape, step=1.0 / spec.factor))


def warp_forward(img: Image, flow: FlowField) -> Image:
    require_same_shape(img, flow, "image and flow")
    return Image(apply_operator(warp_operator(flow), img.data, img.shape))


def warp_adjoint(img: Image, flow: FlowField) -> Image:
    require_same_shape(img, flow, "image and flow")
    return Image(apply_adjoint(warp_operator(flow), img.data, img.shape))


def flow_to_lr(flow: FlowField, scale: ScaleSpec) -> FlowField:
    """Downsample an HR flow bilinearly and divide its magnitudes by the scale factor."""
    if flow.shape != scale.hr_shape:
        raise DimensionMismatchError(f"HR flow expected {scale.hr_shape}, got {flow.shape}")
    op = downsample_operator(scale)
    return FlowField(
        apply_operator(op, flow.u, scale.lr_shape) / scale.factor,
        apply_operator(op, flow.v, scale.lr_shape) / scale.factor,
    )


def flow_to_hr(flow: FlowField, scale: ScaleSpec) -> FlowField:
    """Interpolate an LR flow onto the HR grid and multiply its magnitudes by the scale factor."""
    if flow.shape != scale.lr_shape:
        raise DimensionMismatchError(f"LR flow expected {scale.lr_shape}, got {flow.shape}")
    step = 1.0 / scale.factor
    return FlowField(
        resize_bilinear(flow.u, scale.hr_shape, step) * scale.factor,
        resize_bilinear(flow.v, scale.hr_shape, step) * scale.factor,
    )


# ----------------------------------------------------------------------
# Observation chains
# ----------------------------------------------------------------------
class ObservationOperator:
    """One frame's observation chain ``O_i`` with its exact adjoint."""

    def __init__(self, model: ObservationalModel, flow: FlowField | None, blur_spec: BlurSpec, scale: ScaleSpec) -> None:
        self.model = model
        self.scale = scale
        self.in_shape = scale.hr_shape
        self.out_shape = scale.hr_shape if model is ObservationalModel.M2_1 else scale.lr_shape
        self.operator = self._compose(model, flow, blur_spec, scale)

    @staticmethod
    def warp_shape(model: ObservationalModel, scale: ScaleSpec) -> tuple[int, int]:
        return scale.lr_shape if model.warp_on_lr else scale.hr_shape

    @classmethod
    def _compose(
        cls, model: ObservationalModel, flow: FlowField | None, blur_spec: BlurSpec, scale: ScaleSpec
    ) -> LinearOperator:
        blur_hr = blur_operator(scale.hr_shape, blur_spec)
        if model is ObservationalModel.M2_1:
            return blur_hr
        if flow is None:
            flow = FlowField.zeros(*reversed(cls.warp_shape(model, scale)))
        expected = cls.warp_shape(model, scale)
        if flow.shape != expected:
            grid = "LR" if model.warp_on_lr else "HR"
            raise DimensionMismatchError(
                f"Model {model.value} warps on the {grid} grid {expected}; flow has shape {flow.shape}"
            )
        warp = warp_operator(flow)
        down = downsample_operator(scale)
        blur_lr = blur_operator(scale.lr_shape, blur_spec)
        chains = {
            ObservationalModel.M1: lambda: down @ blur_hr @ warp,
            ObservationalModel.M2: lambda: down @ warp @ blur_hr,
            ObservationalModel.M3: lambda: blur_lr @ down @ warp,
            ObservationalModel.M4: lambda: warp @ down @ blur_hr,
            ObservationalModel.M5: lambda: blur_lr @ warp @ down,
            ObservationalModel.M6: lambda: warp @ blur_lr @ down,
        }
        return chains[model]()

    def apply(self, u: np.ndarray) -> np.ndarray:
        return apply_operator(self.operator, u, self.out_shape)

    def adjoint(self, residual: np.ndarray) -> np.ndarray:
        return apply_adjoint(self.operator, residual, self.in_shape)


def apply_model(
    model: ObservationalModel, u: Image, flow: FlowField | None, blur_spec: BlurSpec, scale: ScaleSpec
) -> Image:
    """Noiseless LR prediction of one frame under ``model``."""
    _check_shape(u, scale.hr_shape, "model input")
    op = ObservationOperator(model, flow, blur_spec, scale)
    return Image(op.apply(u.data))


def apply_model_adjoint(
    model: ObservationalModel, residual: Image, flow: FlowField | None, blur_spec: BlurSpec, scale: ScaleSpec
) -> Image:
    op = ObservationOperator(model, flow, blur_spec, scale)
    _check_shape(residual, op.out_shape, "adjoint input")
    return Image(op.adjoint(residual.data))


def precompute_m21_rhs(frames: Sequence[Image], flows: Sequence[FlowField], scale: ScaleSpec) -> list[Image]:
    """``r_i = W_i^T D^T f_i`` for every frame, with flows on the HR grid.

    ``D^T`` is normalised by ``D^T 1`` so the upsampled frame keeps the
    intensity range of ``f_i``.
    """
    if len(frames) != len(flows):
        raise DimensionMismatchError(f"{len(frames)} frames but {len(flows)} flows")
    down = downsample_operator(scale)
    coverage = apply_adjoint(down, np.ones(scale.lr_shape), scale.hr_shape)
    norm = np.where(coverage > 0.0, coverage, 1.0)
    rhs: list[Image] = []
    for frame, flow in zip(frames, flows):
        _check_shape(frame, scale.lr_shape, "frame")
        if flow.shape != scale.hr_shape:
            raise DimensionMismatchError(f"M2.1 needs HR flows {scale.hr_shape}, got {flow.shape}")
        upsampled = apply_adjoint(down, frame.data, scale.hr_shape) / norm
        rhs.append(Image(apply_adjoint(warp_operator(flow), upsampled, scale.hr_shape)))
    return rhs


__all__ = [
    "BlurSpec",
    "ScaleSpec",
    "ObservationalModel",
    "ObservationOperator",
    "SeparableOperator",
    "round_half_up",
    "reflect_index",
    "gaussian_kernel",
    "blur_matrix_1d",
    "resample_matrix_1d",
    "warp_matrix",
    "blur_operator",
    "downsample_operator",
    "resize_operator",
    "warp_operator",
    "apply_operator",
    "apply_adjoint",
    "gaussian_smooth",
    "resize_bilinear",
    "blur",
    "downsample",
    "upsample",
    "interpolate_to_hr",
    "warp_forward",
    "warp_adjoint",
    "flow_to_lr",
    "flow_to_hr",
    "apply_model",
    "apply_model_adjoint",
    "precompute_m21_rhs",
]
