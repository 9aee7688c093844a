from __future__ import annotations

import math

import numpy as np
import pytest
from pydantic import ValidationError

from diffusion_sr.diffusion import (
    DIFFUSIVITY_CONSTANT,
    DiffusionState,
    DiffusivityParams,
    build_sector_geometry,
    diffusivity,
    eed_denoise,
    eed_increment,
    eed_operator,
    eed_tensor,
    hd_denoise,
    homogeneous_step,
    laplacian,
    sd_denoise,
    sd_increment,
    sd_operator,
    sector_index,
    sector_smooth,
)
from diffusion_sr.errors import StabilityError
from diffusion_sr.image import Image, mse

EED = DiffusivityParams(lam=5.0, sigma=1.0)
SD = DiffusivityParams(lam=3.0, sigma=0.6)


def test_diffusivity_at_lambda() -> None:
    assert diffusivity(4.0, 4.0) == pytest.approx(1.0 - math.exp(-DIFFUSIVITY_CONSTANT), abs=1e-12)
    assert diffusivity(0.0, 4.0) == 1.0


def test_diffusivity_is_non_increasing_and_bounded() -> None:
    x = np.linspace(0.0, 50.0, 10_000)
    g = diffusivity(x, 3.0)
    assert np.all(np.diff(g) <= 1e-15)
    assert np.all((g >= 0.0) & (g <= 1.0))


def test_diffusivity_params_accept_lambda_alias() -> None:
    assert DiffusivityParams.model_validate({"lambda": 2.5, "sigma": 0.6}).lam == 2.5
    with pytest.raises(ValidationError):
        DiffusivityParams(lam=0.0)


def test_laplacian_annihilates_constants() -> None:
    np.testing.assert_array_equal(laplacian(np.full((5, 7), 3.0)), 0.0)


@pytest.mark.parametrize("method", ["hd", "eed"])
def test_divergence_schemes_conserve_the_mean(method: str, noisy_image: Image) -> None:
    big = Image(np.tile(noisy_image.data, (2, 2)))
    if method == "hd":
        out = hd_denoise(big, tau=0.2, k_max=100)
    else:
        out = eed_denoise(big, EED, tau=0.2, k_max=100)
    assert out.data.mean() == pytest.approx(big.data.mean(), rel=1e-10)


def test_hd_rejects_unstable_step(noisy_image: Image) -> None:
    with pytest.raises(StabilityError):
        hd_denoise(noisy_image, tau=0.3, k_max=1)


def test_homogeneous_step_is_one_denoising_step(noisy_image: Image) -> None:
    state = DiffusionState(noisy_image, tau=0.2)
    np.testing.assert_allclose(homogeneous_step(state).data, hd_denoise(noisy_image, tau=0.2, k_max=1).data)
    with pytest.raises(StabilityError):
        homogeneous_step(DiffusionState(noisy_image, tau=0.3))


def test_eed_tensor_is_identity_on_flat_image() -> None:
    a, b, c = eed_tensor(np.full((6, 6), 10.0), EED)
    np.testing.assert_allclose(a, 1.0)
    np.testing.assert_allclose(b, 0.0)
    np.testing.assert_allclose(c, 1.0)
    np.testing.assert_allclose(eed_increment(np.full((6, 6), 10.0), EED), 0.0)


def test_eed_operator_drives_the_denoiser(noisy_image: Image) -> None:
    step = eed_denoise(noisy_image, EED, tau=0.1, k_max=1)
    expected = noisy_image.data + 0.1 * eed_operator(noisy_image, EED).data
    np.testing.assert_allclose(step.data, expected, atol=1e-10)


def test_eed_reduces_noise(noisy_image: Image) -> None:
    clean = Image.constant(noisy_image.width, noisy_image.height, float(noisy_image.data.mean()))
    out = eed_denoise(noisy_image, DiffusivityParams(lam=10.0, sigma=1.0), k_max=20)
    assert mse(out, clean) < mse(noisy_image, clean)


@pytest.mark.parametrize(
    ("dx", "dy", "expected"),
    [(1, 0, 0), (0, 1, 9), (-1, 0, 18), (0, -1, 27), (1, 1, 4)],
)
def test_sector_index(dx: int, dy: int, expected: int) -> None:
    assert sector_index(dx, dy, 36) == expected


def test_sector_geometry_partitions_the_disc() -> None:
    geometry = build_sector_geometry(36, 7.0, 0.0)
    seen = set()
    for sector in geometry.sectors:
        for dy, dx in sector.offsets:
            assert sector_index(int(dx), int(dy), 36) == sector.index
            seen.add((int(dy), int(dx)))
    disc = {(dy, dx) for dy in range(-7, 8) for dx in range(-7, 8) if 0 < dx * dx + dy * dy <= 49}
    assert seen == disc
    assert geometry.num_offsets == len(disc)
    expected = 1.0 / sum(1.0 / (dx * dx + dy * dy) for dy, dx in disc)
    assert geometry.tau_max() == pytest.approx(expected)


def test_sector_smooth_without_presmoothing_passes_values_through(rng: np.random.Generator) -> None:
    img = Image(rng.normal(size=(20, 20)))
    geometry = build_sector_geometry(12, 3.0, 0.0)
    samples = sector_smooth(img, (10, 10), geometry)
    assert len(samples) == len(geometry.sectors)
    for sample in samples:
        assert sample.centre == img.data[10, 10]
        expected = img.data[10 + sample.offsets[:, 0], 10 + sample.offsets[:, 1]]
        np.testing.assert_array_equal(sample.members, expected)


def test_sector_smooth_averages_along_the_segment_from_the_centre() -> None:
    # M=2, rho=1: sector 0 holds (dy, dx) = (0, 1), (1, 0); sector 1 holds (-1, 0), (0, -1).
    img = Image(np.arange(25, dtype=np.float64).reshape(5, 5))
    geometry = build_sector_geometry(2, 1.0, 1.0)
    near, far = math.exp(-0.5), math.exp(-1.0)
    samples = {sample.sector: sample for sample in sector_smooth(img, (2, 2), geometry)}

    centre = 12.0
    for index, (first, second) in {0: (13.0, 17.0), 1: (7.0, 11.0)}.items():
        sample = samples[index]
        assert sample.centre == pytest.approx((centre + near * first + near * second) / (1.0 + 2.0 * near))
        np.testing.assert_allclose(
            sample.members,
            [
                (near * centre + first + far * second) / (near + 1.0 + far),
                (near * centre + far * first + second) / (near + far + 1.0),
            ],
        )


def test_sector_binning_of_the_four_neighbours() -> None:
    geometry = build_sector_geometry(4, 1.0, 0.0)
    by_sector = {sector.index: [(int(dy), int(dx)) for dy, dx in sector.offsets] for sector in geometry.sectors}
    assert by_sector == {0: [(0, 1)], 1: [(1, 0)], 2: [(0, -1)], 3: [(-1, 0)]}


def test_diffusivity_far_above_lambda() -> None:
    assert diffusivity(30.0, 3.0) == pytest.approx(DIFFUSIVITY_CONSTANT * 1e-8, rel=1e-6)


def _inverse_square_laplacian(u: np.ndarray, radius: int) -> np.ndarray:
    padded = np.pad(u, radius, mode="symmetric")
    height, width = u.shape
    out = np.zeros_like(u)
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            d2 = dx * dx + dy * dy
            if 0 < d2 <= radius * radius:
                shifted = padded[radius + dy : radius + dy + height, radius + dx : radius + dx + width]
                out += (shifted - u) / d2
    return out


@pytest.mark.parametrize("sigma", [0.0, 0.6])
def test_sd_with_huge_lambda_is_the_inverse_square_laplacian(sigma: float, noisy_image: Image) -> None:
    geometry = build_sector_geometry(36, 7.0, sigma)
    params = DiffusivityParams(lam=1e6, sigma=sigma)
    np.testing.assert_allclose(
        sd_increment(noisy_image.data, params, geometry),
        _inverse_square_laplacian(noisy_image.data, 7),
        rtol=1e-10,
        atol=1e-9,
    )


@pytest.mark.parametrize("sigma", [0.0, 0.6])
def test_sd_blocks_flux_across_a_sector_aligned_edge(sigma: float) -> None:
    u = np.zeros((24, 24))
    u[12:, :] = 100.0
    geometry = build_sector_geometry(36, 7.0, sigma)
    edge = sd_increment(u, DiffusivityParams(lam=3.0, sigma=sigma), geometry)[11:13]
    linear = sd_increment(u, DiffusivityParams(lam=1e6, sigma=sigma), geometry)[11:13]
    assert np.abs(linear).min() > 100.0
    assert np.abs(edge).max() < 0.01 * np.abs(linear).min()


def test_sd_and_eed_ignore_a_grey_value_shift(noisy_image: Image) -> None:
    geometry = build_sector_geometry(36, 7.0, SD.sigma)
    shifted = noisy_image.data + 37.0
    np.testing.assert_allclose(
        sd_increment(shifted, SD, geometry), sd_increment(noisy_image.data, SD, geometry), atol=1e-8
    )
    np.testing.assert_allclose(eed_increment(shifted, EED), eed_increment(noisy_image.data, EED), atol=1e-8)


def test_sd_increment_vanishes_on_constants() -> None:
    geometry = build_sector_geometry(36, 7.0, SD.sigma)
    np.testing.assert_allclose(sd_increment(np.full((16, 16), 42.0), SD, geometry), 0.0, atol=1e-12)


def test_sd_operator_drives_the_denoiser(noisy_image: Image) -> None:
    geometry = build_sector_geometry(36, 7.0, SD.sigma)
    tau = 0.5 * geometry.tau_max()
    step = sd_denoise(noisy_image, SD, geometry, tau=tau, k_max=1)
    expected = noisy_image.data + tau * sd_operator(noisy_image, SD, geometry).data
    np.testing.assert_allclose(step.data, expected, atol=1e-10)


def test_sd_rejects_step_above_bound(noisy_image: Image) -> None:
    geometry = build_sector_geometry(36, 7.0, SD.sigma)
    with pytest.raises(StabilityError):
        sd_denoise(noisy_image, SD, geometry, tau=2.0 * geometry.tau_max(), k_max=1)


def _assert_max_min(seed: int, steps: int) -> None:
    rng = np.random.default_rng(seed)
    f = Image(rng.uniform(0.0, 255.0, size=(64, 64)))
    params = DiffusivityParams(lam=rng.uniform(1.0, 10.0), sigma=rng.uniform(0.0, 1.5))
    geometry = build_sector_geometry(36, 7.0, params.sigma)
    lo, hi = f.data.min(), f.data.max()

    def _check(_: int, u: np.ndarray) -> None:
        assert u.min() >= lo - 1e-9
        assert u.max() <= hi + 1e-9

    sd_denoise(f, params, geometry, k_max=steps, callback=_check)


@pytest.mark.parametrize("seed", range(5))
def test_sd_keeps_values_inside_initial_range(seed: int) -> None:
    _assert_max_min(seed, 20)


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(100))
def test_sd_max_min_principle_full(seed: int) -> None:
    _assert_max_min(1000 + seed, 20)
