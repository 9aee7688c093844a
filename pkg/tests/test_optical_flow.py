from __future__ import annotations

import numpy as np
import pytest
from pydantic import ValidationError

from diffusion_sr.degrade import random_deformation
from diffusion_sr.errors import DimensionMismatchError
from diffusion_sr.image import FlowField, Image
from diffusion_sr.operators import ScaleSpec, downsample, flow_to_lr, warp_forward
from diffusion_sr.optical_flow import (
    FlowParams,
    build_pyramid,
    estimate_flow,
    estimate_flows,
    mean_endpoint_error,
    pyramid_depth,
    pyramid_shapes,
    total_variation,
)

FAST = FlowParams(alpha_of=8.0, eta=0.8)


@pytest.fixture
def translated_pair(smooth_image: Image) -> tuple[Image, Image]:
    # target(x) = reference(x - (2, 1)), so the reference sees the target at x + (2, 1).
    target = warp_forward(smooth_image, FlowField.constant(48, 48, -2.0, -1.0))
    return smooth_image, target


def test_flow_params_validation() -> None:
    with pytest.raises(ValidationError):
        FlowParams(eta=1.0)
    with pytest.raises(ValidationError):
        FlowParams(omega=2.0)
    with pytest.raises(ValidationError):
        FlowParams(alpha_of=0.0)


def test_pyramid_sizes_round_up() -> None:
    shapes = pyramid_shapes((512, 512), 0.95)
    assert shapes[:3] == [(512, 512), (487, 487), (463, 463)]
    assert pyramid_depth(512, 0.95) == 82
    assert len(shapes) == 82
    assert min(shapes[-1]) >= 8


def test_pyramid_of_constant_stays_constant() -> None:
    levels = build_pyramid(Image.constant(40, 30, 77.0), 0.7)
    assert levels[0].shape == (30, 40)
    for level in levels:
        np.testing.assert_allclose(level.data, 77.0)


def test_pyramid_rejects_bad_eta() -> None:
    with pytest.raises(ValueError):
        build_pyramid(Image.constant(16, 16, 0.0), 1.5)


def test_zero_motion_gives_zero_flow(smooth_image: Image) -> None:
    flow = estimate_flow(smooth_image, smooth_image, FAST)
    assert float(flow.endpoint_norm().mean()) < 0.05


def test_translation_is_recovered(translated_pair: tuple[Image, Image]) -> None:
    reference, target = translated_pair
    flow = estimate_flow(reference, target, FAST)
    truth = FlowField.constant(48, 48, 2.0, 1.0)
    assert mean_endpoint_error(flow, truth, margin=6) < 0.3


def test_forward_and_backward_flows_cancel(translated_pair: tuple[Image, Image]) -> None:
    reference, target = translated_pair
    forward = estimate_flow(reference, target, FAST)
    backward = estimate_flow(target, reference, FAST)
    assert mean_endpoint_error(forward, -backward, margin=6) < 0.5


def test_flow_scales_with_the_grid(translated_pair: tuple[Image, Image]) -> None:
    reference, target = translated_pair
    scale = ScaleSpec.from_factor(48, 48, 2.0)
    full = estimate_flow(reference, target, FAST)
    coarse = estimate_flow(downsample(reference, scale), downsample(target, scale), FAST)
    assert mean_endpoint_error(coarse, flow_to_lr(full, scale), margin=3) < 0.5


def test_larger_alpha_gives_smoother_flow(smooth_image: Image) -> None:
    motion = random_deformation(48, 48, 2.0, 6.0, seed=3)
    target = warp_forward(smooth_image, motion)
    tv = [total_variation(estimate_flow(smooth_image, target, FlowParams(alpha_of=a, eta=0.8))) for a in (1.0, 10.0, 100.0)]
    assert tv[0] > tv[1] > tv[2]


def test_estimation_is_deterministic(translated_pair: tuple[Image, Image]) -> None:
    reference, target = translated_pair
    a = estimate_flow(reference, target, FAST)
    b = estimate_flow(reference, target, FAST)
    np.testing.assert_array_equal(a.u, b.u)
    np.testing.assert_array_equal(a.v, b.v)


def test_mismatched_frames_are_rejected(smooth_image: Image) -> None:
    with pytest.raises(DimensionMismatchError):
        estimate_flow(smooth_image, Image.constant(40, 48, 0.0))


def test_estimate_flows_gives_reference_a_zero_field(translated_pair: tuple[Image, Image]) -> None:
    reference, target = translated_pair
    flows = estimate_flows([target, reference], reference_index=-1, params=FAST, workers=2)
    assert len(flows) == 2
    np.testing.assert_array_equal(flows[1].u, 0.0)
    # frame(x) ~ reference(x + w), so the target's flow points back by (-2, -1).
    assert mean_endpoint_error(flows[0], FlowField.constant(48, 48, -2.0, -1.0), margin=6) < 0.3


def test_total_variation_of_constant_flow_is_zero() -> None:
    assert total_variation(FlowField.constant(5, 5, 1.0, -2.0)) == 0.0
    ramp = FlowField(np.tile(np.arange(4.0), (3, 1)), np.zeros((3, 4)))
    assert total_variation(ramp) == pytest.approx(9.0)
