"""Configuration defaults, presets and TOML helpers for diffusion_sr."""

from __future__ import annotations

import os
from pathlib import Path
from typing import Any

try:  # Python 3.11+
    import tomllib  # type: ignore[attr-defined]
except ModuleNotFoundError:  # pragma: no cover - fall back for <3.11
    import tomli as tomllib  # type: ignore[assignment]

import tomli_w

from .errors import ConfigError

CACHE_DIR = Path(os.environ.get("DIFFUSION_SR_CACHE", Path.home() / ".cache" / "diffusion_sr"))
LOG_LEVEL = os.environ.get("DIFFUSION_SR_LOG_LEVEL", "WARNING")
WORKERS = max(1, int(os.environ.get("DIFFUSION_SR_WORKERS", "1")))

# Explicit time steps.
TAU_HOMOGENEOUS = 0.2
TAU_EED_DENOISE = 0.2
TAU_EED_SR = 0.05
TAU_SD_SR = 0.012

# Sector geometry.
NUM_SECTORS = 36
SECTOR_RADIUS = 7.0

# Gaussian kernels are cut at ceil(BLUR_TRUNCATION * sigma) taps per side.
BLUR_TRUNCATION = 3.0

# Optical flow numerics.
FLOW_ETA = 0.95
FLOW_ETA1 = 10
FLOW_ETA2 = 10
FLOW_OMEGA = 1.95
FLOW_EPSILON = 1e-3
FLOW_SOR_ITERATIONS = 3
PYRAMID_MIN_SIZE = 8

# Synthetic acquisition.
DATASET_FRAMES = 30
DATASET_BLUR_SIGMA = 1.0
DATASET_NOISE_SIGMA = 40.0
DEFORMATION_AMPLITUDE = 3.0
DEFORMATION_SMOOTHNESS = 20.0

NOISE_ALGORITHM = "pcg64-box-muller"

# (sigma_of, alpha_of) per dataset.
FLOW_PRESETS: dict[str, dict[str, float]] = {
    "text1": {"sigma_of": 2.6, "alpha_of": 13.3},
    "text2": {"sigma_of": 1.0, "alpha_of": 15.6},
    "text3": {"sigma_of": 2.3, "alpha_of": 6.3},
    "house1": {"sigma_of": 3.8, "alpha_of": 13.5},
    "house2": {"sigma_of": 1.2, "alpha_of": 17.0},
    "house3": {"sigma_of": 2.7, "alpha_of": 16.5},
}

# Denoising parameters keyed by image initial and noise level, e.g. "P40".
DENOISE_PRESETS: dict[str, dict[str, dict[str, float]]] = {
    "eed": {
        "L40": {"sigma": 1.2, "lambda": 7.5, "k_max": 34},
        "L60": {"sigma": 1.8, "lambda": 5.0, "k_max": 63},
        "L80": {"sigma": 2.0, "lambda": 4.6, "k_max": 87},
        "B40": {"sigma": 0.9, "lambda": 14.4, "k_max": 12},
        "B60": {"sigma": 1.1, "lambda": 13.4, "k_max": 20},
        "B80": {"sigma": 1.4, "lambda": 10.4, "k_max": 28},
        "H40": {"sigma": 0.9, "lambda": 11.1, "k_max": 34},
        "H60": {"sigma": 1.1, "lambda": 12.1, "k_max": 33},
        "H80": {"sigma": 1.8, "lambda": 5.8, "k_max": 72},
        "P40": {"sigma": 1.2, "lambda": 8.1, "k_max": 28},
        "P60": {"sigma": 1.7, "lambda": 5.6, "k_max": 51},
        "P80": {"sigma": 1.9, "lambda": 5.1, "k_max": 68},
    },
    # Tuned on the synthetic house, peppers and bridge scenes at size 128; L reuses the P values.
    "sd": {
        "L40": {"sigma": 3.0, "lambda": 4.5, "k_max": 3},
        "L60": {"sigma": 3.0, "lambda": 9.0, "k_max": 2},
        "L80": {"sigma": 3.0, "lambda": 13.0, "k_max": 2},
        "B40": {"sigma": 2.0, "lambda": 6.5, "k_max": 4},
        "B60": {"sigma": 3.0, "lambda": 9.0, "k_max": 1},
        "B80": {"sigma": 3.0, "lambda": 6.5, "k_max": 2},
        "H40": {"sigma": 2.0, "lambda": 6.5, "k_max": 6},
        "H60": {"sigma": 3.0, "lambda": 4.5, "k_max": 4},
        "H80": {"sigma": 3.0, "lambda": 13.0, "k_max": 1},
        "P40": {"sigma": 3.0, "lambda": 4.5, "k_max": 3},
        "P60": {"sigma": 3.0, "lambda": 9.0, "k_max": 2},
        "P80": {"sigma": 3.0, "lambda": 13.0, "k_max": 2},
    },
}

# Super-resolution parameters per regulariser. "-S" suffix: estimated flow.
SR_PRESETS: dict[str, dict[str, dict[str, float]]] = {
    "eed": {
        "H1": {"sigma": 0.6, "sigma_b": 0.8, "lambda": 11.0, "alpha": 118.0, "k_max": 37},
        "H2": {"sigma": 0.7, "sigma_b": 0.5, "lambda": 12.0, "alpha": 120.0, "k_max": 9},
        "H2-S": {"sigma": 0.7, "sigma_b": 0.5, "lambda": 13.0, "alpha": 115.0, "k_max": 9},
        "H3": {"sigma": 0.6, "sigma_b": 0.4, "lambda": 14.0, "alpha": 127.0, "k_max": 48},
        "T1": {"sigma": 1.0, "sigma_b": 1.1, "lambda": 9.0, "alpha": 14.0, "k_max": 136},
        "T2": {"sigma": 1.3, "sigma_b": 0.9, "lambda": 7.0, "alpha": 18.0, "k_max": 11},
        "T2-S": {"sigma": 1.3, "sigma_b": 1.0, "lambda": 7.0, "alpha": 18.0, "k_max": 14},
        "T3": {"sigma": 1.2, "sigma_b": 0.4, "lambda": 7.0, "alpha": 14.0, "k_max": 13},
    },
    "sd": {
        "H1": {"sigma": 0.9, "sigma_b": 1.0, "lambda": 2.0, "alpha": 1.6, "k_max": 17},
        "H2": {"sigma": 0.8, "sigma_b": 0.7, "lambda": 1.7, "alpha": 5.3, "k_max": 17},
        "H2-S": {"sigma": 0.9, "sigma_b": 0.8, "lambda": 1.8, "alpha": 4.5, "k_max": 17},
        "H3": {"sigma": 0.6, "sigma_b": 0.8, "lambda": 2.3, "alpha": 2.9, "k_max": 49},
        "T1": {"sigma": 0.6, "sigma_b": 1.1, "lambda": 3.0, "alpha": 0.3, "k_max": 48},
        "T2": {"sigma": 0.6, "sigma_b": 1.0, "lambda": 2.7, "alpha": 0.6, "k_max": 34},
        "T2-S": {"sigma": 0.6, "sigma_b": 1.1, "lambda": 2.9, "alpha": 0.5, "k_max": 32},
        "T3": {"sigma": 0.6, "sigma_b": 0.6, "lambda": 2.3, "alpha": 0.6, "k_max": 49},
    },
}

# SD-regularised parameters per observational model on the Text2 setup.
MODEL_PRESETS: dict[str, dict[str, dict[str, float]]] = {
    "T2": {
        "m1": {"sigma": 0.6, "sigma_b": 1.0, "lambda": 2.7, "alpha": 0.6, "k_max": 34},
        "m2": {"sigma": 0.6, "sigma_b": 1.0, "lambda": 2.7, "alpha": 0.6, "k_max": 34},
        "m3": {"sigma": 0.6, "sigma_b": 0.6, "lambda": 2.9, "alpha": 1.2, "k_max": 20},
        "m4": {"sigma": 0.6, "sigma_b": 0.8, "lambda": 2.8, "alpha": 0.6, "k_max": 35},
        "m5": {"sigma": 0.6, "sigma_b": 0.5, "lambda": 2.7, "alpha": 0.7, "k_max": 33},
        "m6": {"sigma": 0.3, "sigma_b": 0.5, "lambda": 4.1, "alpha": 0.4, "k_max": 60},
        "m2_1": {"sigma": 0.6, "sigma_b": 1.5, "lambda": 3.3, "alpha": 0.2, "k_max": 55},
    },
    "T2-S": {
        "m1": {"sigma": 0.6, "sigma_b": 1.1, "lambda": 2.9, "alpha": 0.5, "k_max": 32},
        "m2": {"sigma": 0.6, "sigma_b": 1.1, "lambda": 3.4, "alpha": 0.4, "k_max": 33},
        "m3": {"sigma": 0.3, "sigma_b": 0.8, "lambda": 3.8, "alpha": 1.0, "k_max": 21},
        "m4": {"sigma": 0.6, "sigma_b": 0.9, "lambda": 3.0, "alpha": 0.5, "k_max": 32},
        "m5": {"sigma": 0.4, "sigma_b": 0.6, "lambda": 4.6, "alpha": 0.3, "k_max": 43},
        "m6": {"sigma": 0.4, "sigma_b": 0.6, "lambda": 4.6, "alpha": 0.3, "k_max": 48},
        "m2_1": {"sigma": 0.6, "sigma_b": 1.6, "lambda": 3.5, "alpha": 0.2, "k_max": 56},
    },
}


def ensure_cache_dir(path: Path | None = None) -> Path:
    target = path or CACHE_DIR
    target.mkdir(parents=True, exist_ok=True)
    return target


def load_toml(path: Path) -> dict[str, Any]:
    """Read a TOML table from ``path``; a missing file is a config error."""
    if not path.exists():
        raise ConfigError(f"Config file not found: {path}")
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"Failed to parse config at {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"Config file {path} must contain a table")
    return data


def write_toml(path: Path, data: dict[str, Any]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(tomli_w.dumps(data), encoding="utf-8")


__all__ = [
    "CACHE_DIR",
    "LOG_LEVEL",
    "WORKERS",
    "TAU_HOMOGENEOUS",
    "TAU_EED_DENOISE",
    "TAU_EED_SR",
    "TAU_SD_SR",
    "NUM_SECTORS",
    "SECTOR_RADIUS",
    "BLUR_TRUNCATION",
    "FLOW_ETA",
    "FLOW_ETA1",
    "FLOW_ETA2",
    "FLOW_OMEGA",
    "FLOW_EPSILON",
    "FLOW_SOR_ITERATIONS",
    "PYRAMID_MIN_SIZE",
    "DATASET_FRAMES",
    "DATASET_BLUR_SIGMA",
    "DATASET_NOISE_SIGMA",
    "DEFORMATION_AMPLITUDE",
    "DEFORMATION_SMOOTHNESS",
    "NOISE_ALGORITHM",
    "FLOW_PRESETS",
    "DENOISE_PRESETS",
    "SR_PRESETS",
    "MODEL_PRESETS",
    "ensure_cache_dir",
    "load_toml",
    "write_toml",
]
