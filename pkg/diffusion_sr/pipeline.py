"""Manifest-driven super-resolution pipeline."""

from __future__ import annotations

import logging
from enum import Enum
from pathlib import Path
from typing import Optional

from .config import WORKERS
from .degrade import DatasetManifest
from .errors import ConfigError, DimensionMismatchError
from .flow_cache import FlowCache
from .image import FlowField, Image
from .image_io import load_image, read_flow
from .operators import ScaleSpec, flow_to_hr, flow_to_lr, interpolate_to_hr
from .optical_flow import FlowParams, estimate_flows
from .solver import SolverConfig, SRProblem, flows_for_model

LOGGER = logging.getLogger(__name__)


class FlowSource(str, Enum):
    GROUND_TRUTH = "ground-truth"
    ESTIMATED = "estimated"


class SRPipeline:
    """Loads a frame set once and hands out :class:`SRProblem` instances per configuration."""

    def __init__(
        self,
        frames: list[Image],
        scale: ScaleSpec,
        reference_index: int,
        *,
        ground_truth: Image | None = None,
        manifest_flows: list[FlowField] | None = None,
        flow_source: FlowSource = FlowSource.GROUND_TRUTH,
        flow_params: FlowParams | None = None,
        upsampled_flow: bool = False,
        cache: FlowCache | None = None,
        workers: int = WORKERS,
    ) -> None:
        self.frames = frames
        self.scale = scale
        self.reference_index = reference_index
        self.ground_truth = ground_truth
        self.flow_source = FlowSource(flow_source)
        self.flow_params = flow_params or FlowParams()
        self.upsampled_flow = upsampled_flow
        self.cache = cache
        self.workers = workers
        self._hr_flows: list[FlowField] | None = None
        self._lr_flows: list[FlowField] | None = None
        if self.flow_source is FlowSource.GROUND_TRUTH:
            if manifest_flows is None:
                raise ConfigError("Ground-truth flow requested but the manifest lists no flows")
            self._adopt_flows(manifest_flows)

    @classmethod
    def load(cls, manifest_path: Path, **kwargs: object) -> "SRPipeline":
        manifest_path = manifest_path.expanduser().resolve()
        manifest = DatasetManifest.load(manifest_path)
        base = manifest_path.parent
        frames = [load_image(base / entry.image) for entry in manifest.frames]
        scale = manifest.scale
        for entry, frame in zip(manifest.frames, frames):
            if frame.shape != scale.lr_shape:
                raise DimensionMismatchError(f"{entry.image} has shape {frame.shape}, manifest says {scale.lr_shape}")
        flows: Optional[list[FlowField]] = None
        if all(entry.flow for entry in manifest.frames):
            flows = [read_flow(base / entry.flow) for entry in manifest.frames]
        ground_truth = load_image(base / manifest.ground_truth) if manifest.ground_truth else None
        LOGGER.info("Loaded %d frames from %s", len(frames), manifest_path)
        return cls(
            frames,
            scale,
            manifest.reference_index,
            ground_truth=ground_truth,
            manifest_flows=flows,
            **kwargs,  # type: ignore[arg-type]
        )

    def _adopt_flows(self, flows: list[FlowField]) -> None:
        if len(flows) != len(self.frames):
            raise DimensionMismatchError(f"{len(self.frames)} frames but {len(flows)} flows")
        shapes = {flow.shape for flow in flows}
        if shapes == {self.scale.hr_shape}:
            self._hr_flows = flows
        elif shapes == {self.scale.lr_shape}:
            self._lr_flows = flows
        else:
            raise DimensionMismatchError(f"Flows must all be on the HR or LR grid, found shapes {sorted(shapes)}")

    @property
    def reference(self) -> Image:
        return self.frames[self.reference_index]

    def _estimate(self) -> None:
        if self.upsampled_flow:
            upsampled = [interpolate_to_hr(frame, self.scale) for frame in self.frames]
            self._hr_flows = self._estimate_on(upsampled)
        else:
            self._lr_flows = self._estimate_on(self.frames)

    def _estimate_on(self, frames: list[Image]) -> list[FlowField]:
        if self.cache is None:
            return estimate_flows(frames, self.reference_index, self.flow_params, workers=self.workers)
        reference = frames[self.reference_index]
        flows = []
        for index, frame in enumerate(frames):
            if index == self.reference_index:
                flows.append(FlowField.zeros(reference.width, reference.height))
            else:
                flows.append(self.cache.estimate(frame, reference, self.flow_params).flow)
        return flows

    @property
    def hr_flows(self) -> list[FlowField]:
        if self._hr_flows is None:
            if self._lr_flows is None:
                self._estimate()
            if self._hr_flows is None:
                self._hr_flows = [flow_to_hr(flow, self.scale) for flow in self._lr_flows]
        return self._hr_flows

    @property
    def lr_flows(self) -> list[FlowField]:
        if self._lr_flows is None:
            if self._hr_flows is None:
                self._estimate()
            if self._lr_flows is None:
                self._lr_flows = [flow_to_lr(flow, self.scale) for flow in self._hr_flows]
        return self._lr_flows

    def flows_for(self, config: SolverConfig) -> list[FlowField]:
        if config.model.warp_on_lr:
            return self.lr_flows
        return flows_for_model(config.model, self.scale, self.hr_flows)

    def config(self, **params: object) -> SolverConfig:
        """A :class:`SolverConfig` on this pipeline's grid."""
        return SolverConfig(scale=self.scale, **params)  # type: ignore[arg-type]

    def problem(self, config: SolverConfig) -> SRProblem:
        if config.scale != self.scale:
            raise DimensionMismatchError("Solver scale does not match the loaded frames")
        return SRProblem(
            frames=self.frames,
            flows=self.flows_for(config),
            config=config,
            reference_index=self.reference_index,
        )


__all__ = ["FlowSource", "SRPipeline"]
