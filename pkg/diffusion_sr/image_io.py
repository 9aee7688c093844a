"""Readers and writers for PGM, PFM and Middlebury ``.flo`` files."""

from __future__ import annotations

import logging
import re
from pathlib import Path
from typing import Literal

import numpy as np

from .errors import ImageFormatError
from .image import FlowField, Image

try:  # Optional dependency for importing PNG/TIFF/... inputs
    from PIL import Image as PILImage  # type: ignore
except ImportError:  # pragma: no cover - optional
    PILImage = None  # type: ignore

LOGGER = logging.getLogger(__name__)

ImageFormat = Literal["pgm8", "pfm"]

FLO_MAGIC = 202021.25
_FLO_HEADER = np.dtype([("magic", "<f4"), ("width", "<i4"), ("height", "<i4")])
_PNM_HEADER = re.compile(
    rb"\A(P[0-9a-zA-Z])\s+(?:#[^\n]*\n\s*)*(\d+)\s+(?:#[^\n]*\n\s*)*(\d+)\s+(?:#[^\n]*\n\s*)*(\S+)\s"
)
_GREY_MODES = {"L", "F", "1", "I", "I;16", "I;16B", "I;16L"}


def _parse_header(payload: bytes, path: Path) -> tuple[bytes, int, int, bytes, int]:
    match = _PNM_HEADER.match(payload)
    if match is None:
        raise ImageFormatError("malformed header", str(path))
    magic, width, height, third = match.group(1), int(match.group(2)), int(match.group(3)), match.group(4)
    if width < 1 or height < 1:
        raise ImageFormatError("malformed header", f"{path}: {width}x{height}")
    return magic, width, height, third, match.end()


def _read_pgm(payload: bytes, path: Path) -> Image:
    _, width, height, maxval, offset = _parse_header(payload, path)
    try:
        max_value = int(maxval)
    except ValueError as exc:
        raise ImageFormatError("malformed header", f"{path}: maxval {maxval!r}") from exc
    if max_value != 255:
        raise ImageFormatError("unsupported maxval", f"{path}: {max_value}")
    count = width * height
    if len(payload) - offset < count:
        raise ImageFormatError("truncated payload", f"{path}: expected {count} bytes")
    pixels = np.frombuffer(payload, dtype=np.uint8, count=count, offset=offset)
    return Image(pixels.reshape(height, width).astype(np.float64))


def _read_pfm(payload: bytes, path: Path) -> Image:
    _, width, height, scale_token, offset = _parse_header(payload, path)
    try:
        scale = float(scale_token)
    except ValueError as exc:
        raise ImageFormatError("malformed header", f"{path}: scale {scale_token!r}") from exc
    if scale == 0.0:
        raise ImageFormatError("malformed header", f"{path}: zero scale")
    dtype = np.dtype("<f4") if scale < 0 else np.dtype(">f4")
    count = width * height
    if len(payload) - offset < count * 4:
        raise ImageFormatError("truncated payload", f"{path}: expected {count * 4} bytes")
    values = np.frombuffer(payload, dtype=dtype, count=count, offset=offset).astype(np.float64)
    if not np.all(np.isfinite(values)):
        raise ImageFormatError("non-finite values", str(path))
    # Rows are stored top-to-bottom by write_image.
    return Image(values.reshape(height, width))


def read_image(path: Path | str) -> Image:
    """Read an 8-bit binary PGM (P5) or single-channel PFM (Pf) file."""
    path = Path(path)
    payload = path.read_bytes()
    if payload.startswith(b"P5"):
        return _read_pgm(payload, path)
    if payload.startswith(b"Pf"):
        return _read_pfm(payload, path)
    if payload.startswith(b"PF") or payload.startswith(b"P6") or payload.startswith(b"P3"):
        raise ImageFormatError("colour input", str(path))
    raise ImageFormatError("unsupported format", str(path))


def quantize_8bit(img: Image) -> np.ndarray:
    """Clamp to [0, 255] and round half up."""
    return np.floor(np.clip(img.data, 0.0, 255.0) + 0.5).astype(np.uint8)


def format_for_path(path: Path | str) -> ImageFormat:
    return "pfm" if Path(path).suffix.lower() == ".pfm" else "pgm8"


def write_image(img: Image, path: Path | str, format: ImageFormat | None = None) -> None:
    path = Path(path)
    fmt = format or format_for_path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "pgm8":
        header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
        path.write_bytes(header + quantize_8bit(img).tobytes())
    elif fmt == "pfm":
        header = f"Pf\n{img.width} {img.height}\n-1.0\n".encode("ascii")
        path.write_bytes(header + img.data.astype("<f4").tobytes())
    else:
        raise ValueError(f"Unsupported image format: {fmt}")
    LOGGER.debug("Wrote %s image %s", fmt, path)


def read_flow(path: Path | str) -> FlowField:
    """Read a Middlebury ``.flo`` file."""
    path = Path(path)
    payload = path.read_bytes()
    if len(payload) < _FLO_HEADER.itemsize:
        raise ImageFormatError("truncated payload", str(path))
    header = np.frombuffer(payload, dtype=_FLO_HEADER, count=1)[0]
    if float(header["magic"]) != FLO_MAGIC:
        raise ImageFormatError("bad magic", f"{path}: {float(header['magic'])}")
    width, height = int(header["width"]), int(header["height"])
    if width < 1 or height < 1:
        raise ImageFormatError("size mismatch", f"{path}: {width}x{height}")
    expected = width * height * 2 * 4
    if len(payload) - _FLO_HEADER.itemsize != expected:
        raise ImageFormatError(
            "size mismatch",
            f"{path}: expected {expected} payload bytes, found {len(payload) - _FLO_HEADER.itemsize}",
        )
    data = np.frombuffer(payload, dtype="<f4", offset=_FLO_HEADER.itemsize).reshape(height, width, 2)
    return FlowField(data[..., 0].astype(np.float64), data[..., 1].astype(np.float64))


def write_flow(field: FlowField, path: Path | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = np.array([(FLO_MAGIC, field.width, field.height)], dtype=_FLO_HEADER)
    data = np.stack([field.u, field.v], axis=-1).astype("<f4")
    path.write_bytes(header.tobytes() + data.tobytes())


def load_image(path: Path | str) -> Image:
    """Load any greyscale image: PGM/PFM natively, other formats through Pillow."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Image not found: {path}")
    with path.open("rb") as handle:
        head = handle.read(2)
    if head[:1] == b"P" and head[1:2] in {b"5", b"f", b"F", b"3", b"6", b"2"}:
        return read_image(path)
    if PILImage is None:
        raise ImageFormatError("unsupported format", f"Pillow not installed - cannot read {path}")
    try:
        with PILImage.open(path) as img:
            mode = img.mode
            if mode not in _GREY_MODES:
                raise ImageFormatError("colour input", f"{path}: mode {mode}")
            if mode == "1":
                img = img.convert("L")
            data = np.asarray(img, dtype=np.float64)
    except OSError as exc:
        raise ImageFormatError("unsupported format", f"{path}: {exc}") from exc
    if mode.startswith("I"):
        data = data * (255.0 / 65535.0)
    LOGGER.debug("Imported %s (%s) through Pillow", path, mode)
    return Image(data)


__all__ = [
    "ImageFormat",
    "FLO_MAGIC",
    "read_image",
    "write_image",
    "quantize_8bit",
    "format_for_path",
    "read_flow",
    "write_flow",
    "load_image",
]
