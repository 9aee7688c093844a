"""Explicit gradient-descent super-resolution.

Each step is ``u <- u + tau * (alpha * A(u) - sum_i O_i^T (O_i u - f_i))`` where
``O_i`` is the observation chain of the configured model and ``A`` the
regulariser increment (homogeneous, EED or sector diffusion).
"""

from __future__ import annotations

import functools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .config import NUM_SECTORS, SECTOR_RADIUS, TAU_EED_SR, TAU_SD_SR
from .diffusion import (
    DiffusivityParams,
    Regulariser,
    SectorGeometry,
    build_sector_geometry,
    regulariser_increment,
)
from .errors import DimensionMismatchError, StabilityError
from .image import FlowField, Image
from .operators import (
    BlurSpec,
    ObservationalModel,
    ObservationOperator,
    ScaleSpec,
    apply_adjoint,
    apply_operator,
    blur_operator,
    flow_to_lr,
    interpolate_to_hr,
    precompute_m21_rhs,
)

LOGGER = logging.getLogger(__name__)

SolverCallback = Callable[[int, np.ndarray], None]

DEFAULT_SR_TAU = {
    Regulariser.HD: TAU_EED_SR,
    Regulariser.EED: TAU_EED_SR,
    Regulariser.SD: TAU_SD_SR,
}


class SolverConfig(BaseModel):
    """Everything one reconstruction needs besides the frames and flows."""

    model_config = ConfigDict(frozen=True)

    scale: ScaleSpec
    model: ObservationalModel = ObservationalModel.M1
    regulariser: Regulariser = Regulariser.SD
    alpha: float = Field(default=1.0, ge=0.0, description="Smoothness weight alpha.")
    tau: Optional[float] = Field(default=None, gt=0.0, description="Time step; None picks the regulariser default.")
    k_max: int = Field(default=20, ge=0)
    blur: BlurSpec = Field(default_factory=BlurSpec)
    diffusivity: Optional[DiffusivityParams] = None
    num_sectors: int = Field(default=NUM_SECTORS, ge=1)
    radius: float = Field(default=SECTOR_RADIUS, ge=1.0)

    @model_validator(mode="after")
    def _check_regulariser(self) -> "SolverConfig":
        if self.regulariser is not Regulariser.HD and self.diffusivity is None:
            raise ValueError(f"{self.regulariser.value} regularisation needs diffusivity parameters (sigma, lambda)")
        return self

    @property
    def time_step(self) -> float:
        return self.tau if self.tau is not None else DEFAULT_SR_TAU[self.regulariser]

    @property
    def geometry(self) -> Optional[SectorGeometry]:
        if self.regulariser is not Regulariser.SD:
            return None
        return build_sector_geometry(self.num_sectors, self.radius, self.diffusivity.sigma)

    def with_params(self, **params: Any) -> "SolverConfig":
        """Copy with flat parameter overrides (``sigma``, ``lambda``, ``sigma_b``, ``alpha``, ...)."""
        updates: dict[str, Any] = {}
        diff = dict(self.diffusivity.model_dump()) if self.diffusivity is not None else {}
        for key, value in params.items():
            if key == "sigma":
                diff["sigma"] = float(value)
            elif key in ("lambda", "lam"):
                diff["lam"] = float(value)
            elif key == "sigma_b":
                updates["blur"] = self.blur.model_copy(update={"sigma_b": float(value)})
            elif key == "model":
                updates["model"] = value if isinstance(value, ObservationalModel) else ObservationalModel.parse(str(value))
            elif key == "regulariser":
                updates["regulariser"] = Regulariser(value)
            elif key in ("alpha", "tau", "k_max", "num_sectors", "radius"):
                updates[key] = value
            else:
                raise KeyError(f"Unknown solver parameter {key!r}")
        if "lam" in diff:
            updates["diffusivity"] = DiffusivityParams(lam=diff["lam"], sigma=diff.get("sigma", 0.0))
        elif "sigma" in diff and self.diffusivity is None:
            raise ValueError("sigma given without lambda")
        merged = {**self.model_dump(), **updates}
        return SolverConfig.model_validate(merged)

    def summary(self) -> dict[str, float]:
        return {
            "sigma": self.diffusivity.sigma if self.diffusivity else 0.0,
            "sigma_b": self.blur.sigma_b,
            "lambda": self.diffusivity.lam if self.diffusivity else 0.0,
            "alpha": self.alpha,
            "k_max": self.k_max,
        }


def flows_for_model(
    model: ObservationalModel,
    scale: ScaleSpec,
    hr_flows: Sequence[FlowField],
    lr_flows: Sequence[FlowField] | None = None,
) -> list[FlowField]:
    """Pick (or derive) the flows on the grid the model warps on."""
    if not model.warp_on_lr:
        return list(hr_flows)
    if lr_flows is not None:
        return list(lr_flows)
    return [flow_to_lr(flow, scale) for flow in hr_flows]


@dataclass(slots=True)
class SRProblem:
    frames: list[Image]
    flows: list[FlowField]
    config: SolverConfig
    reference_index: int = -1

    def __post_init__(self) -> None:
        if not self.frames:
            raise DimensionMismatchError("At least one frame is required")
        if len(self.flows) != len(self.frames):
            raise DimensionMismatchError(f"{len(self.frames)} frames but {len(self.flows)} flows")
        if not -len(self.frames) <= self.reference_index < len(self.frames):
            raise DimensionMismatchError(f"Reference index {self.reference_index} outside {len(self.frames)} frames")
        scale = self.config.scale
        for index, frame in enumerate(self.frames):
            if frame.shape != scale.lr_shape:
                raise DimensionMismatchError(f"Frame {index} has shape {frame.shape}, expected {scale.lr_shape}")
        expected = ObservationOperator.warp_shape(self.config.model, scale)
        for index, flow in enumerate(self.flows):
            if flow.shape != expected:
                raise DimensionMismatchError(
                    f"Flow {index} has shape {flow.shape}; model {self.config.model.value} needs {expected}"
                )

    @property
    def reference(self) -> Image:
        return self.frames[self.reference_index]


def initialise(problem: SRProblem) -> Image:
    """Bilinear upsampling of the reference frame onto the HR grid."""
    return interpolate_to_hr(problem.reference, problem.config.scale)


class Reconstructor:
    """Precomputed operators for one problem; steps are cheap afterwards."""

    def __init__(self, problem: SRProblem, *, workers: int = 1) -> None:
        self.problem = problem
        self.config = problem.config
        self.workers = max(1, workers)
        self.tau = self.config.time_step
        self.geometry = self.config.geometry
        scale = self.config.scale
        if self.config.model is ObservationalModel.M2_1:
            self.blur = blur_operator(scale.hr_shape, self.config.blur)
            self.m21_terms = [r.data for r in precompute_m21_rhs(problem.frames, problem.flows, scale)]
            self.m21_rhs = functools.reduce(np.add, self.m21_terms)
            self.operators: list[ObservationOperator] = []
        else:
            self.blur = None
            self.m21_terms = []
            self.m21_rhs = None
            self.operators = [
                ObservationOperator(self.config.model, flow, self.config.blur, scale) for flow in problem.flows
            ]
        self._check_step_size()

    def _check_step_size(self) -> None:
        reg = self.config.regulariser
        if reg is Regulariser.SD:
            bound = self.geometry.tau_max()
        else:
            bound = 0.25
        if self.tau * self.config.alpha > bound:
            LOGGER.warning(
                "tau * alpha = %.4g exceeds the explicit %s bound %.4g; the iteration may oscillate",
                self.tau * self.config.alpha,
                reg.value,
                bound,
            )

    def _frame_gradient(self, index: int, u: np.ndarray) -> np.ndarray:
        op = self.operators[index]
        return op.adjoint(op.apply(u) - self.problem.frames[index].data)

    def data_gradient(self, u: np.ndarray) -> np.ndarray:
        """``sum_i O_i^T (O_i u - f_i)``, summed in frame order."""
        shape = self.config.scale.hr_shape
        if self.config.model is ObservationalModel.M2_1:
            count = len(self.problem.frames)
            blurred = apply_operator(self.blur, u, shape)
            return apply_adjoint(self.blur, count * blurred - self.m21_rhs, shape)
        indices = range(len(self.operators))
        if self.workers > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                parts = list(pool.map(lambda i: self._frame_gradient(i, u), indices))
        else:
            parts = [self._frame_gradient(i, u) for i in indices]
        return functools.reduce(np.add, parts)

    def smoothness(self, u: np.ndarray) -> np.ndarray:
        return regulariser_increment(self.config.regulariser, u, self.config.diffusivity, self.geometry)

    def step(self, u: np.ndarray) -> np.ndarray:
        update = -self.data_gradient(u)
        if self.config.alpha > 0:
            update = update + self.config.alpha * self.smoothness(u)
        return u + self.tau * update

    def run(self, u0: Image | None = None, callback: Optional[SolverCallback] = None) -> Image:
        u = (initialise(self.problem) if u0 is None else u0).data.copy()
        for k in range(1, self.config.k_max + 1):
            u = self.step(u)
            if not np.all(np.isfinite(u)):
                raise StabilityError(f"Iterate became non-finite at step {k} (tau={self.tau}, alpha={self.config.alpha})")
            if callback is not None:
                callback(k, u)
            LOGGER.debug("SR step %d/%d", k, self.config.k_max)
        return Image(u)


def sr_step(u_k: Image, problem: SRProblem) -> Image:
    if u_k.shape != problem.config.scale.hr_shape:
        raise DimensionMismatchError(f"Iterate has shape {u_k.shape}, expected {problem.config.scale.hr_shape}")
    u = Reconstructor(problem).step(u_k.data)
    if not np.all(np.isfinite(u)):
        raise StabilityError("SR step produced non-finite values")
    return Image(u)


def reconstruct(
    problem: SRProblem, callback: Optional[SolverCallback] = None, *, workers: int = 1
) -> Image:
    LOGGER.info(
        "Reconstructing %dx%d from %d frames (model %s, %s, alpha=%g, k_max=%d)",
        problem.config.scale.hr_width,
        problem.config.scale.hr_height,
        len(problem.frames),
        problem.config.model.value,
        problem.config.regulariser.value,
        problem.config.alpha,
        problem.config.k_max,
    )
    return Reconstructor(problem, workers=workers).run(callback=callback)


def energy(u: Image, problem: SRProblem) -> float:
    """``1/2 sum_i |O_i u - f_i|^2 + alpha/2 |grad u|^2`` (forward differences)."""
    rec = Reconstructor(problem)
    data = 0.0
    if problem.config.model is ObservationalModel.M2_1:
        shape = problem.config.scale.hr_shape
        blurred = apply_operator(rec.blur, u.data, shape)
        for rhs in rec.m21_terms:
            data += 0.5 * float(np.sum((blurred - rhs) ** 2))
    else:
        for op, frame in zip(rec.operators, problem.frames):
            data += 0.5 * float(np.sum((op.apply(u.data) - frame.data) ** 2))
    gx = np.diff(u.data, axis=1)
    gy = np.diff(u.data, axis=0)
    smooth = 0.5 * problem.config.alpha * float(np.sum(gx * gx) + np.sum(gy * gy))
    return data + smooth


__all__ = [
    "DEFAULT_SR_TAU",
    "SolverConfig",
    "SolverCallback",
    "SRProblem",
    "Reconstructor",
    "flows_for_model",
    "initialise",
    "sr_step",
    "reconstruct",
    "energy",
]
