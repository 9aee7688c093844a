from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
from PIL import Image as PILImage

from diffusion_sr.errors import ImageFormatError
from diffusion_sr.image import FlowField, Image
from diffusion_sr.image_io import (
    FLO_MAGIC,
    format_for_path,
    load_image,
    quantize_8bit,
    read_flow,
    read_image,
    write_flow,
    write_image,
)


def test_pgm_round_trip_is_exact_for_integers(tmp_path: Path) -> None:
    img = Image.from_values(3, 2, [0, 17, 255, 128, 64, 3])
    path = tmp_path / "frame.pgm"
    write_image(img, path)
    assert path.read_bytes().startswith(b"P5\n3 2\n255\n")
    np.testing.assert_array_equal(read_image(path).data, img.data)


def test_quantize_clamps_and_rounds_half_up() -> None:
    img = Image.from_values(5, 1, [2.5, 300.0, -4.0, 7.49, 254.5])
    np.testing.assert_array_equal(quantize_8bit(img), [[3, 255, 0, 7, 255]])


def test_pfm_round_trip_float32(tmp_path: Path) -> None:
    img = Image.from_values(2, 2, [0.5, -1.25, 1000.0, 3.0e-3])
    path = tmp_path / "value.pfm"
    write_image(img, path)
    np.testing.assert_allclose(read_image(path).data, img.data, rtol=1e-7)


def test_pfm_big_endian_is_read(tmp_path: Path) -> None:
    values = np.array([[1.0, 2.0], [3.0, 4.0]], dtype=">f4")
    path = tmp_path / "be.pfm"
    path.write_bytes(b"Pf\n2 2\n1.0\n" + values.tobytes())
    np.testing.assert_array_equal(read_image(path).data, values.astype(np.float64))


def test_header_comments_are_skipped(tmp_path: Path) -> None:
    path = tmp_path / "comment.pgm"
    path.write_bytes(b"P5\n# written by hand\n2 1\n255\n" + bytes([10, 20]))
    np.testing.assert_array_equal(read_image(path).data, [[10.0, 20.0]])


@pytest.mark.parametrize(
    ("payload", "reason"),
    [
        (b"P5\n2 2\n65535\n" + bytes(8), "unsupported maxval"),
        (b"P5\n4 4\n255\n" + bytes(5), "truncated payload"),
        (b"P6\n1 1\n255\n" + bytes(3), "colour input"),
        (b"PF\n1 1\n-1.0\n" + bytes(12), "colour input"),
        (b"P5\nxx\n", "malformed header"),
        (b"GIF89a", "unsupported format"),
    ],
)
def test_read_errors_carry_a_reason(tmp_path: Path, payload: bytes, reason: str) -> None:
    path = tmp_path / "bad.pgm"
    path.write_bytes(payload)
    with pytest.raises(ImageFormatError) as info:
        read_image(path)
    assert info.value.reason == reason


def test_flow_round_trip(tmp_path: Path) -> None:
    flow = FlowField(np.array([[0.5, -1.0], [2.25, 0.0]]), np.array([[1.0, 0.0], [-3.5, 8.0]]))
    path = tmp_path / "flow.flo"
    write_flow(flow, path)
    assert len(path.read_bytes()) == 12 + 2 * 2 * 2 * 4
    loaded = read_flow(path)
    np.testing.assert_array_equal(loaded.u, flow.u)
    np.testing.assert_array_equal(loaded.v, flow.v)


def test_flow_bad_magic(tmp_path: Path) -> None:
    path = tmp_path / "bad.flo"
    header = np.array([1.0], dtype="<f4").tobytes() + np.array([1, 1], dtype="<i4").tobytes()
    path.write_bytes(header + bytes(8))
    with pytest.raises(ImageFormatError) as info:
        read_flow(path)
    assert info.value.reason == "bad magic"


def test_flow_size_mismatch(tmp_path: Path) -> None:
    path = tmp_path / "short.flo"
    header = np.array([FLO_MAGIC], dtype="<f4").tobytes() + np.array([2, 2], dtype="<i4").tobytes()
    path.write_bytes(header + bytes(8))
    with pytest.raises(ImageFormatError) as info:
        read_flow(path)
    assert info.value.reason == "size mismatch"


def test_format_for_path() -> None:
    assert format_for_path("a/b.pfm") == "pfm"
    assert format_for_path("a/b.PGM") == "pgm8"


def test_load_image_through_pillow(tmp_path: Path) -> None:
    pixels = np.arange(12, dtype=np.uint8).reshape(3, 4) * 20
    path = tmp_path / "grey.png"
    PILImage.fromarray(pixels).save(path)
    np.testing.assert_array_equal(load_image(path).data, pixels.astype(np.float64))


def test_load_image_rejects_colour_png(tmp_path: Path) -> None:
    path = tmp_path / "colour.png"
    PILImage.new("RGB", (4, 4), (255, 0, 0)).save(path)
    with pytest.raises(ImageFormatError) as info:
        load_image(path)
    assert info.value.reason == "colour input"


def test_load_image_missing_file(tmp_path: Path) -> None:
    with pytest.raises(FileNotFoundError):
        load_image(tmp_path / "absent.pgm")
