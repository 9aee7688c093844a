"""On-disk cache of estimated optical flows."""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from pathlib import Path

from .config import CACHE_DIR, ensure_cache_dir
from .errors import ImageFormatError
from .image import FlowField, Image
from .image_io import read_flow, write_flow
from .optical_flow import FlowParams, estimate_flow

LOGGER = logging.getLogger(__name__)


@dataclass(slots=True)
class CachedFlow:
    """A flow together with the cache file it was read from or written to."""

    flow: FlowField
    path: Path
    hit: bool


class FlowCache:
    """Flows keyed by the SHA-1 of both frames' pixels and the flow parameters."""

    def __init__(self, cache_dir: Path | None = None) -> None:
        self.cache_dir = ensure_cache_dir((cache_dir or CACHE_DIR) / "flows")

    def estimate(self, reference: Image, target: Image, params: FlowParams) -> CachedFlow:
        signature = self._signature(reference, target, params)
        flow_dir = self.cache_dir / signature[:2]
        flow_dir.mkdir(parents=True, exist_ok=True)
        path = flow_dir / f"{signature}.flo"

        if path.exists():
            try:
                flow = read_flow(path)
            except ImageFormatError as exc:
                LOGGER.warning("Discarding unreadable cached flow %s: %s", path, exc)
                path.unlink(missing_ok=True)
            else:
                if flow.shape == reference.shape:
                    LOGGER.debug("Flow cache hit %s", path)
                    return CachedFlow(flow=flow, path=path, hit=True)

        flow = estimate_flow(reference, target, params)
        tmp_path = path.with_suffix(".tmp")
        write_flow(flow, tmp_path)
        tmp_path.replace(path)
        LOGGER.info("Cached estimated flow at %s", path)
        # .flo stores float32; hand back exactly what a later hit would read.
        return CachedFlow(flow=read_flow(path), path=path, hit=False)

    def _signature(self, reference: Image, target: Image, params: FlowParams) -> str:
        digest = hashlib.sha1()
        for img in (reference, target):
            digest.update(f"{img.width}x{img.height}".encode("ascii"))
            digest.update(img.data.tobytes())
        digest.update(params.model_dump_json().encode("utf-8"))
        return digest.hexdigest()


__all__ = ["FlowCache", "CachedFlow"]
