"""MSE-driven evaluation: model comparison tables, parameter grid search and baselines."""

from __future__ import annotations

import csv
import io
import itertools
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Literal, Mapping, Optional, Sequence

import numpy as np

from .config import NUM_SECTORS, SECTOR_RADIUS, TAU_EED_DENOISE, TAU_HOMOGENEOUS
from .diffusion import DiffusivityParams, Regulariser, build_sector_geometry, eed_denoise, hd_denoise, sd_denoise
from .errors import ConfigError, DimensionMismatchError
from .image import FlowField, Image, mse
from .operators import ObservationalModel, ScaleSpec, interpolate_to_hr, warp_matrix
from .solver import Reconstructor, SolverConfig, SRProblem, initialise

LOGGER = logging.getLogger(__name__)

ProblemFactory = Callable[[SolverConfig], SRProblem]
SearchStrategy = Literal["exhaustive", "coordinate"]

CSV_COLUMNS = ("model", "sigma", "sigma_b", "lambda", "alpha", "k_max", "mse")


@dataclass(slots=True)
class EvaluationRow:
    model: str
    sigma: float
    sigma_b: float
    lam: float
    alpha: float
    k_max: int
    mse: float

    def as_csv(self) -> dict[str, Any]:
        return {
            "model": self.model,
            "sigma": self.sigma,
            "sigma_b": self.sigma_b,
            "lambda": self.lam,
            "alpha": self.alpha,
            "k_max": self.k_max,
            "mse": f"{self.mse:.6f}",
        }


def _row(config: SolverConfig, value: float) -> EvaluationRow:
    params = config.summary()
    return EvaluationRow(
        model=config.model.value,
        sigma=params["sigma"],
        sigma_b=params["sigma_b"],
        lam=params["lambda"],
        alpha=params["alpha"],
        k_max=int(params["k_max"]),
        mse=value,
    )


def evaluate_models(
    factory: ProblemFactory,
    base_config: SolverConfig,
    models: Sequence[ObservationalModel | str],
    ground_truth: Image,
    model_params: Mapping[str, Mapping[str, Any]] | None = None,
    *,
    workers: int = 1,
) -> list[EvaluationRow]:
    """Reconstruct once per model on a shared frame set and score against the ground truth."""
    rows = []
    for entry in models:
        model = entry if isinstance(entry, ObservationalModel) else ObservationalModel.parse(entry)
        overrides = dict((model_params or {}).get(model.value, {}))
        config = base_config.with_params(model=model, **overrides)
        problem = factory(config)
        result = Reconstructor(problem, workers=workers).run()
        value = mse(result, ground_truth)
        LOGGER.info("Model %s: MSE %.4f", model.value, value)
        rows.append(_row(config, value))
    return rows


def write_rows(rows: Iterable[EvaluationRow], path: Path | None = None) -> str:
    """Render rows as CSV; also written to ``path`` when given."""
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row.as_csv())
    text = buffer.getvalue()
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    return text


# ----------------------------------------------------------------------
# Grid search
# ----------------------------------------------------------------------
@dataclass(slots=True)
class GridPoint:
    params: dict[str, Any]
    mse: float


@dataclass(slots=True)
class GridSearchResult:
    best_params: dict[str, Any]
    best_mse: float
    evaluated: list[GridPoint] = field(default_factory=list)
    best_config: Optional[SolverConfig] = None


# Runs one parameter combination (without k_max) and reports the MSE after each requested k.
LadderRunner = Callable[[dict[str, Any], Sequence[int]], dict[int, float]]


def _normalise_grid(grid: Mapping[str, Sequence[Any]]) -> dict[str, list[Any]]:
    if not grid:
        raise ConfigError("Empty parameter grid")
    axes = {}
    for name, values in grid.items():
        values = list(values) if isinstance(values, (list, tuple, np.ndarray, range)) else [values]
        if not values:
            raise ConfigError(f"Grid axis {name!r} has no values")
        axes[name] = values
    if "k_max" in axes and any(int(k) < 0 for k in axes["k_max"]):
        raise ConfigError("k_max values must be non-negative")
    return axes


class _LadderSearch:
    """Memoised evaluation where every k_max on the ladder comes from one run."""

    def __init__(self, axes: dict[str, list[Any]], runner: LadderRunner, default_k: int) -> None:
        self.axes = axes
        self.runner = runner
        self.ladder = sorted({int(k) for k in axes.get("k_max", [default_k])})
        self.names = list(axes)
        self.memo: dict[tuple, float] = {}

    def point(self, indices: Sequence[int]) -> dict[str, Any]:
        return {name: self.axes[name][i] for name, i in zip(self.names, indices)}

    def evaluate(self, indices: tuple[int, ...]) -> float:
        if indices in self.memo:
            return self.memo[indices]
        params = self.point(indices)
        k_value = int(params.pop("k_max", self.ladder[-1]))
        scores = self.runner(params, self.ladder)
        if "k_max" in self.axes:
            k_axis = self.names.index("k_max")
            for k_index, k in enumerate(self.axes["k_max"]):
                sibling = list(indices)
                sibling[k_axis] = k_index
                self.memo.setdefault(tuple(sibling), scores[int(k)])
        else:
            self.memo[indices] = scores[k_value]
        LOGGER.debug("Grid point %s -> MSE %.4f", params, self.memo[indices])
        return self.memo[indices]

    def exhaustive(self) -> tuple[tuple[int, ...], float]:
        best: tuple[tuple[int, ...], float] | None = None
        for indices in itertools.product(*(range(len(self.axes[n])) for n in self.names)):
            value = self.evaluate(indices)
            if best is None or value < best[1]:
                best = (indices, value)
        assert best is not None
        return best

    def coordinate(self) -> tuple[tuple[int, ...], float]:
        current = [0] * len(self.names)
        best_value = self.evaluate(tuple(current))
        improved = True
        while improved:
            improved = False
            for axis, name in enumerate(self.names):
                for candidate in range(len(self.axes[name])):
                    trial = list(current)
                    trial[axis] = candidate
                    value = self.evaluate(tuple(trial))
                    if value < best_value:
                        best_value = value
                        current = trial
                        improved = True
        return tuple(current), best_value

    def evaluated(self) -> list[GridPoint]:
        return [GridPoint(self.point(indices), value) for indices, value in self.memo.items()]


def run_grid(
    grid: Mapping[str, Sequence[Any]],
    runner: LadderRunner,
    *,
    strategy: SearchStrategy = "exhaustive",
    default_k: int = 0,
) -> GridSearchResult:
    axes = _normalise_grid(grid)
    search = _LadderSearch(axes, runner, default_k)
    if strategy == "exhaustive":
        indices, value = search.exhaustive()
    elif strategy == "coordinate":
        indices, value = search.coordinate()
    else:
        raise ConfigError(f"Unknown search strategy {strategy!r}")
    best = search.point(indices)
    LOGGER.info("Best grid point %s with MSE %.4f (%d points evaluated)", best, value, len(search.memo))
    return GridSearchResult(best_params=best, best_mse=value, evaluated=search.evaluated())


def grid_search(
    factory: ProblemFactory,
    base_config: SolverConfig,
    grid: Mapping[str, Sequence[Any]],
    ground_truth: Image,
    *,
    strategy: SearchStrategy = "exhaustive",
    workers: int = 1,
) -> GridSearchResult:
    """Minimise reconstruction MSE over a finite grid of solver parameters."""

    def _runner(params: dict[str, Any], ladder: Sequence[int]) -> dict[int, float]:
        config = base_config.with_params(k_max=max(ladder), **params)
        problem = factory(config)
        scores: dict[int, float] = {}
        wanted = set(ladder)
        if 0 in wanted:
            scores[0] = mse(initialise(problem), ground_truth)

        def _record(k: int, u: np.ndarray) -> None:
            if k in wanted:
                scores[k] = mse(Image(u), ground_truth)

        Reconstructor(problem, workers=workers).run(callback=_record)
        return scores

    result = run_grid(grid, _runner, strategy=strategy, default_k=base_config.k_max)
    result.best_config = base_config.with_params(**result.best_params)
    return result


def grid_search_denoise(
    noisy: Image,
    clean: Image,
    method: Regulariser | str,
    grid: Mapping[str, Sequence[Any]],
    *,
    tau: float | None = None,
    num_sectors: int = NUM_SECTORS,
    radius: float = SECTOR_RADIUS,
    strategy: SearchStrategy = "exhaustive",
) -> GridSearchResult:
    """Search (sigma, lambda, k_max) for EED, SD or homogeneous denoising."""
    method = Regulariser(method)
    if "k_max" not in grid:
        raise ConfigError("Denoising grids need a k_max axis")
    if noisy.shape != clean.shape:
        raise DimensionMismatchError(f"Noisy {noisy.shape} and clean {clean.shape} differ")

    def _runner(params: dict[str, Any], ladder: Sequence[int]) -> dict[int, float]:
        wanted = set(ladder)
        scores = {0: mse(noisy, clean)} if 0 in wanted else {}

        def _record(k: int, u: np.ndarray) -> None:
            if k in wanted:
                scores[k] = mse(Image(u), clean)

        k_max = max(ladder)
        if method is Regulariser.HD:
            hd_denoise(noisy, tau=tau or TAU_HOMOGENEOUS, k_max=k_max, callback=_record)
            return scores
        diff = DiffusivityParams(lam=float(params["lambda"]), sigma=float(params.get("sigma", 0.0)))
        if method is Regulariser.EED:
            eed_denoise(noisy, diff, tau=tau or TAU_EED_DENOISE, k_max=k_max, callback=_record)
        else:
            geometry = build_sector_geometry(num_sectors, radius, diff.sigma)
            sd_denoise(noisy, diff, geometry, tau=tau, k_max=k_max, callback=_record)
        return scores

    return run_grid(grid, _runner, strategy=strategy)


# ----------------------------------------------------------------------
# Baselines
# ----------------------------------------------------------------------
def baseline_bilinear(problem: SRProblem) -> Image:
    """The bilinearly upsampled reference frame (the solver's starting point)."""
    return initialise(problem)


def baseline_registered_mean(
    frames: Sequence[Image], hr_flows: Sequence[FlowField], scale: ScaleSpec, reference_index: int = -1
) -> Image:
    """Pixelwise mean of all frames after upsampling and backward registration onto the reference grid.

    Each upsampled frame is pushed back along its flow with ``W^T`` and normalised
    by ``W^T 1``; pixels no frame reaches fall back to the upsampled reference.
    """
    if len(frames) != len(hr_flows):
        raise DimensionMismatchError(f"{len(frames)} frames but {len(hr_flows)} flows")
    total = np.zeros(scale.hr_shape)
    weight = np.zeros(scale.hr_shape)
    for frame, flow in zip(frames, hr_flows):
        if flow.shape != scale.hr_shape:
            raise DimensionMismatchError(f"Registration needs HR flows {scale.hr_shape}, got {flow.shape}")
        upsampled = interpolate_to_hr(frame, scale).data.reshape(-1)
        matrix = warp_matrix(flow)
        total += (matrix.T @ upsampled).reshape(scale.hr_shape)
        weight += np.asarray(matrix.sum(axis=0)).reshape(scale.hr_shape)
    fallback = interpolate_to_hr(frames[reference_index], scale).data
    covered = weight > 1e-6
    mean = np.where(covered, total / np.where(covered, weight, 1.0), fallback)
    return Image(mean)


__all__ = [
    "CSV_COLUMNS",
    "EvaluationRow",
    "GridPoint",
    "GridSearchResult",
    "ProblemFactory",
    "evaluate_models",
    "write_rows",
    "run_grid",
    "grid_search",
    "grid_search_denoise",
    "baseline_bilinear",
    "baseline_registered_mean",
]
