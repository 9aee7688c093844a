from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from diffusion_sr.flow_cache import FlowCache
from diffusion_sr.image import FlowField, Image
from diffusion_sr.operators import warp_forward
from diffusion_sr.optical_flow import FlowParams

PARAMS = FlowParams(alpha_of=8.0, eta=0.7)


@pytest.fixture
def pair(smooth_image: Image) -> tuple[Image, Image]:
    return smooth_image, warp_forward(smooth_image, FlowField.constant(48, 48, 1.0, 0.0))


def test_second_lookup_is_a_hit(tmp_path: Path, pair: tuple[Image, Image]) -> None:
    cache = FlowCache(tmp_path)
    first = cache.estimate(*pair, PARAMS)
    second = cache.estimate(*pair, PARAMS)
    assert not first.hit
    assert second.hit
    assert first.path == second.path
    assert first.path.parent.parent == tmp_path / "flows"
    np.testing.assert_array_equal(first.flow.u, second.flow.u)
    np.testing.assert_array_equal(first.flow.v, second.flow.v)


def test_parameters_are_part_of_the_key(tmp_path: Path, pair: tuple[Image, Image]) -> None:
    cache = FlowCache(tmp_path)
    a = cache.estimate(*pair, PARAMS)
    b = cache.estimate(*pair, PARAMS.model_copy(update={"alpha_of": 9.0}))
    assert a.path != b.path
    assert not b.hit


def test_frame_order_is_part_of_the_key(tmp_path: Path, pair: tuple[Image, Image]) -> None:
    cache = FlowCache(tmp_path)
    reference, target = pair
    assert cache.estimate(reference, target, PARAMS).path != cache.estimate(target, reference, PARAMS).path


def test_corrupt_entry_is_recomputed(tmp_path: Path, pair: tuple[Image, Image]) -> None:
    cache = FlowCache(tmp_path)
    first = cache.estimate(*pair, PARAMS)
    first.path.write_bytes(b"garbage")
    again = cache.estimate(*pair, PARAMS)
    assert not again.hit
    np.testing.assert_array_equal(again.flow.u, first.flow.u)
