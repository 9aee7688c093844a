"""Synthetic acquisition: warp, blur, downsample and clipped noise on a ground-truth scene."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .config import (
    DATASET_BLUR_SIGMA,
    DATASET_FRAMES,
    DATASET_NOISE_SIGMA,
    DEFORMATION_AMPLITUDE,
    DEFORMATION_SMOOTHNESS,
    NOISE_ALGORITHM,
    load_toml,
    write_toml,
)
from .errors import ConfigError
from .image import FlowField, Image
from .image_io import write_flow, write_image
from .noise import add_clipped_awgn
from .operators import BlurSpec, ScaleSpec, blur, downsample, gaussian_smooth, warp_forward

LOGGER = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.toml"


class DatasetSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    num_frames: int = Field(default=DATASET_FRAMES, ge=1)
    blur_sigma: float = Field(default=DATASET_BLUR_SIGMA, ge=0.0)
    scale_factor: float = Field(default=2.0, ge=1.0)
    noise_sigma: float = Field(default=DATASET_NOISE_SIGMA, ge=0.0)
    seed: int = Field(default=0, ge=0)
    deformation_amplitude: float = Field(default=DEFORMATION_AMPLITUDE, ge=0.0)
    deformation_smoothness: float = Field(default=DEFORMATION_SMOOTHNESS, ge=0.0)

    def scale_for(self, hr: Image) -> ScaleSpec:
        return ScaleSpec.from_factor(hr.width, hr.height, self.scale_factor)


@dataclass(slots=True)
class GeneratedDataset:
    """Frames in acquisition order; the last one is the reference."""

    hr: Image
    frames: list[Image]
    flows: list[FlowField]
    scale: ScaleSpec
    spec: DatasetSpec

    @property
    def reference_index(self) -> int:
        return len(self.frames) - 1


def random_deformation(
    width: int, height: int, amplitude: float, smoothness: float, seed: int
) -> FlowField:
    """Smooth random displacement field whose largest vector has length ``amplitude``."""
    if amplitude < 0:
        raise ValueError("amplitude must be non-negative")
    if amplitude == 0:
        return FlowField.zeros(width, height)
    rng = np.random.default_rng(seed)
    u = gaussian_smooth(rng.uniform(-amplitude, amplitude, size=(height, width)), smoothness)
    v = gaussian_smooth(rng.uniform(-amplitude, amplitude, size=(height, width)), smoothness)
    peak = float(np.hypot(u, v).max())
    if peak == 0.0:
        return FlowField.zeros(width, height)
    return FlowField(u * (amplitude / peak), v * (amplitude / peak))


def _frame_seeds(seed: int, count: int) -> list[tuple[int, int]]:
    children = np.random.SeedSequence(seed).spawn(count)
    return [tuple(int(x) for x in child.generate_state(2, dtype=np.uint32)) for child in children]


def generate_dataset(hr: Image, spec: DatasetSpec, *, workers: int = 1) -> GeneratedDataset:
    scale = spec.scale_for(hr)
    blur_spec = BlurSpec(sigma_b=spec.blur_sigma)
    seeds = _frame_seeds(spec.seed, spec.num_frames)
    reference = spec.num_frames - 1

    def _one(index: int) -> tuple[Image, FlowField]:
        motion_seed, noise_seed = seeds[index]
        if index == reference:
            flow = FlowField.zeros(hr.width, hr.height)
        else:
            flow = random_deformation(
                hr.width, hr.height, spec.deformation_amplitude, spec.deformation_smoothness, motion_seed
            )
        clean = downsample(blur(warp_forward(hr, flow), blur_spec), scale)
        return add_clipped_awgn(clean, spec.noise_sigma, noise_seed), flow

    if workers <= 1:
        results = [_one(i) for i in range(spec.num_frames)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_one, range(spec.num_frames)))
    LOGGER.info(
        "Generated %d frames %dx%d from %dx%d scene (factor %.3g)",
        spec.num_frames,
        scale.lr_width,
        scale.lr_height,
        hr.width,
        hr.height,
        spec.scale_factor,
    )
    return GeneratedDataset(
        hr=hr,
        frames=[frame for frame, _ in results],
        flows=[flow for _, flow in results],
        scale=scale,
        spec=spec,
    )


class FrameEntry(BaseModel):
    image: str
    flow: Optional[str] = None


class DatasetManifest(BaseModel):
    """TOML manifest describing a frame set on disk; paths are relative to the manifest."""

    dataset: dict[str, Any] = Field(default_factory=dict)
    reference_index: int
    hr_width: int = Field(ge=1)
    hr_height: int = Field(ge=1)
    lr_width: int = Field(ge=1)
    lr_height: int = Field(ge=1)
    scale_factor: float = Field(ge=1.0)
    ground_truth: Optional[str] = None
    frames: list[FrameEntry] = Field(min_length=1)

    @model_validator(mode="after")
    def _check_reference(self) -> "DatasetManifest":
        if not 0 <= self.reference_index < len(self.frames):
            raise ValueError(f"reference_index {self.reference_index} outside {len(self.frames)} frames")
        return self

    @property
    def scale(self) -> ScaleSpec:
        return ScaleSpec(
            hr_width=self.hr_width,
            hr_height=self.hr_height,
            lr_width=self.lr_width,
            lr_height=self.lr_height,
            factor=self.scale_factor,
        )

    @classmethod
    def load(cls, path: Path) -> "DatasetManifest":
        data = load_toml(path)
        try:
            return cls.model_validate(data)
        except ValidationError as exc:
            raise ConfigError(f"Invalid manifest {path}: {exc}") from exc

    def save(self, path: Path) -> None:
        write_toml(path, self.model_dump(exclude_none=True))


def write_dataset(dataset: GeneratedDataset, out_dir: Path) -> Path:
    """Write frames (PGM), HR flows (.flo), the ground truth and ``manifest.toml``."""
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for index, (frame, flow) in enumerate(zip(dataset.frames, dataset.flows)):
        image_name = f"frame_{index:03d}.pgm"
        flow_name = f"flow_{index:03d}.flo"
        write_image(frame, out_dir / image_name, "pgm8")
        write_flow(flow, out_dir / flow_name)
        entries.append(FrameEntry(image=image_name, flow=flow_name))
    write_image(dataset.hr, out_dir / "ground_truth.pgm", "pgm8")

    dataset_table = dataset.spec.model_dump()
    dataset_table["noise_algorithm"] = NOISE_ALGORITHM
    manifest = DatasetManifest(
        dataset=dataset_table,
        reference_index=dataset.reference_index,
        hr_width=dataset.scale.hr_width,
        hr_height=dataset.scale.hr_height,
        lr_width=dataset.scale.lr_width,
        lr_height=dataset.scale.lr_height,
        scale_factor=dataset.scale.factor,
        ground_truth="ground_truth.pgm",
        frames=entries,
    )
    path = out_dir / MANIFEST_NAME
    manifest.save(path)
    LOGGER.info("Wrote dataset with %d frames to %s", len(entries), out_dir)
    return path


__all__ = [
    "MANIFEST_NAME",
    "DatasetSpec",
    "GeneratedDataset",
    "FrameEntry",
    "DatasetManifest",
    "random_deformation",
    "generate_dataset",
    "write_dataset",
]
