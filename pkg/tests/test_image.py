from __future__ import annotations

import numpy as np
import pytest

from diffusion_sr.errors import DimensionMismatchError, StabilityError
from diffusion_sr.image import FlowField, Image, mse


def test_from_values_is_row_major() -> None:
    img = Image.from_values(3, 2, [0, 1, 2, 3, 4, 5])
    assert img.shape == (2, 3)
    assert img.width == 3 and img.height == 2
    assert img.data[1, 0] == 3.0
    np.testing.assert_array_equal(img.values(), np.arange(6.0))


def test_from_values_rejects_wrong_count() -> None:
    with pytest.raises(DimensionMismatchError):
        Image.from_values(3, 2, [0, 1, 2])


def test_image_is_immutable() -> None:
    img = Image.constant(4, 4, 1.0)
    with pytest.raises(ValueError):
        img.data[0, 0] = 2.0


def test_image_copies_caller_array() -> None:
    source = np.zeros((2, 2))
    img = Image(source)
    source[0, 0] = 9.0
    assert img.data[0, 0] == 0.0


def test_non_finite_values_are_rejected() -> None:
    with pytest.raises(StabilityError):
        Image(np.array([[0.0, np.nan]]))


def test_non_2d_input_is_rejected() -> None:
    with pytest.raises(ValueError):
        Image(np.zeros(4))


def test_flow_components_must_agree() -> None:
    with pytest.raises(DimensionMismatchError):
        FlowField(np.zeros((2, 2)), np.zeros((2, 3)))


def test_flow_arithmetic() -> None:
    flow = FlowField.constant(3, 2, 3.0, 4.0)
    np.testing.assert_allclose(flow.endpoint_norm(), 5.0)
    np.testing.assert_allclose(flow.scaled(0.5).v, 2.0)
    np.testing.assert_allclose((flow + flow).u, 6.0)


def test_mse_matches_definition() -> None:
    a = Image.constant(4, 3, 0.0)
    b = Image.constant(4, 3, 2.0)
    assert mse(a, b) == pytest.approx(4.0)
    assert mse(a, a) == 0.0


def test_mse_rejects_shape_mismatch() -> None:
    with pytest.raises(DimensionMismatchError):
        mse(Image.constant(4, 3, 0.0), Image.constant(3, 4, 0.0))
