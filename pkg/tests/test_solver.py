from __future__ import annotations

import numpy as np
import pytest
from pydantic import ValidationError

from diffusion_sr.degrade import DatasetSpec, generate_dataset, random_deformation
from diffusion_sr.diffusion import DiffusivityParams, Regulariser
from diffusion_sr.errors import DimensionMismatchError, StabilityError
from diffusion_sr.image import FlowField, Image, mse
from diffusion_sr.operators import (
    BlurSpec,
    ObservationalModel,
    ScaleSpec,
    apply_model,
    apply_model_adjoint,
    precompute_m21_rhs,
)
from diffusion_sr.scenes import make_scene
from diffusion_sr.solver import (
    Reconstructor,
    SolverConfig,
    SRProblem,
    energy,
    flows_for_model,
    initialise,
    reconstruct,
    sr_step,
)

SCALE = ScaleSpec.from_factor(16, 16, 2.0)
SD_PARAMS = DiffusivityParams(lam=3.0, sigma=0.6)


def _random_problem(
    rng: np.random.Generator,
    model: ObservationalModel = ObservationalModel.M1,
    regulariser: Regulariser = Regulariser.SD,
    frames: int = 3,
    **overrides: object,
) -> SRProblem:
    config = SolverConfig(
        scale=SCALE,
        model=model,
        regulariser=regulariser,
        alpha=0.5,
        blur=BlurSpec(sigma_b=1.0),
        diffusivity=SD_PARAMS if regulariser is not Regulariser.HD else None,
        **overrides,
    )
    hr_flows = [random_deformation(16, 16, 1.5, 3.0, seed=i) for i in range(frames)]
    flows = flows_for_model(model, SCALE, hr_flows)
    lr = [Image(rng.uniform(0.0, 255.0, size=SCALE.lr_shape)) for _ in range(frames)]
    return SRProblem(frames=lr, flows=flows, config=config)


def test_default_time_steps() -> None:
    assert SolverConfig(scale=SCALE, diffusivity=SD_PARAMS).time_step == pytest.approx(0.012)
    eed = SolverConfig(scale=SCALE, regulariser=Regulariser.EED, diffusivity=SD_PARAMS)
    assert eed.time_step == pytest.approx(0.05)
    assert SolverConfig(scale=SCALE, regulariser=Regulariser.HD, tau=0.1).time_step == 0.1


def test_anisotropic_regularisers_need_diffusivity() -> None:
    with pytest.raises(ValidationError):
        SolverConfig(scale=SCALE, regulariser=Regulariser.EED)


def test_with_params_maps_flat_names() -> None:
    base = SolverConfig(scale=SCALE, diffusivity=SD_PARAMS)
    config = base.with_params(**{"lambda": 5.0, "sigma": 0.9, "sigma_b": 1.4, "alpha": 2.0, "k_max": 7, "model": "m2.1"})
    assert config.diffusivity == DiffusivityParams(lam=5.0, sigma=0.9)
    assert config.blur.sigma_b == 1.4
    assert config.alpha == 2.0 and config.k_max == 7
    assert config.model is ObservationalModel.M2_1
    assert config.summary() == {"sigma": 0.9, "sigma_b": 1.4, "lambda": 5.0, "alpha": 2.0, "k_max": 7}
    with pytest.raises(KeyError):
        base.with_params(beta=1.0)


def test_problem_validates_shapes(rng: np.random.Generator) -> None:
    config = SolverConfig(scale=SCALE, model=ObservationalModel.M4, diffusivity=SD_PARAMS)
    frame = Image(rng.normal(size=SCALE.lr_shape))
    with pytest.raises(DimensionMismatchError):
        SRProblem(frames=[frame], flows=[FlowField.zeros(16, 16)], config=config)
    with pytest.raises(DimensionMismatchError):
        SRProblem(frames=[], flows=[], config=config)
    with pytest.raises(DimensionMismatchError):
        SRProblem(frames=[frame, frame], flows=[FlowField.zeros(8, 8)], config=config)
    with pytest.raises(DimensionMismatchError):
        SRProblem(frames=[Image(rng.normal(size=(9, 8)))], flows=[FlowField.zeros(8, 8)], config=config)


def test_single_identity_frame_step_returns_the_frame(rng: np.random.Generator) -> None:
    scale = ScaleSpec.from_factor(12, 10, 1.0)
    f = Image(rng.uniform(0.0, 255.0, size=scale.lr_shape))
    config = SolverConfig(scale=scale, regulariser=Regulariser.HD, alpha=0.0, tau=1.0)
    problem = SRProblem(frames=[f], flows=[FlowField.zeros(12, 10)], config=config)
    u0 = Image(rng.normal(size=scale.hr_shape))
    np.testing.assert_allclose(sr_step(u0, problem).data, f.data, atol=1e-10)


@pytest.mark.parametrize("model", [m for m in ObservationalModel if m is not ObservationalModel.M2_1])
def test_consistent_constant_is_a_fixed_point(model: ObservationalModel) -> None:
    frames = [Image.constant(8, 8, 90.0)] * 3
    hr_flows = [random_deformation(16, 16, 1.5, 3.0, seed=i) for i in range(3)]
    config = SolverConfig(scale=SCALE, model=model, diffusivity=SD_PARAMS, blur=BlurSpec(sigma_b=1.0))
    problem = SRProblem(frames=frames, flows=flows_for_model(model, SCALE, hr_flows), config=config)
    u = Image.constant(16, 16, 90.0)
    np.testing.assert_allclose(sr_step(u, problem).data, 90.0, atol=1e-9)


def test_static_constant_is_a_fixed_point_of_m21() -> None:
    frames = [Image.constant(8, 8, 90.0)] * 3
    config = SolverConfig(scale=SCALE, model=ObservationalModel.M2_1, diffusivity=SD_PARAMS, blur=BlurSpec(sigma_b=1.0))
    problem = SRProblem(frames=frames, flows=[FlowField.zeros(16, 16)] * 3, config=config)
    np.testing.assert_allclose(sr_step(Image.constant(16, 16, 90.0), problem).data, 90.0, atol=1e-9)


@pytest.mark.parametrize("regulariser", [Regulariser.HD, Regulariser.EED, Regulariser.SD])
def test_step_commutes_with_constant_shifts(regulariser: Regulariser, rng: np.random.Generator) -> None:
    problem = _random_problem(rng, regulariser=regulariser)
    shift = 17.0
    shifted = SRProblem(
        frames=[Image(f.data + shift) for f in problem.frames],
        flows=problem.flows,
        config=problem.config,
    )
    u = Image(rng.uniform(0.0, 255.0, size=SCALE.hr_shape))
    expected = sr_step(u, problem).data + shift
    np.testing.assert_allclose(sr_step(Image(u.data + shift), shifted).data, expected, atol=1e-9)


@pytest.mark.parametrize("model", list(ObservationalModel))
def test_data_gradient_is_affine(model: ObservationalModel, rng: np.random.Generator) -> None:
    rec = Reconstructor(_random_problem(rng, model=model))
    u1 = rng.normal(size=SCALE.hr_shape)
    u2 = rng.normal(size=SCALE.hr_shape)
    zero = np.zeros(SCALE.hr_shape)
    lhs = rec.data_gradient(u1 + u2) - rec.data_gradient(u2)
    rhs = rec.data_gradient(u1) - rec.data_gradient(zero)
    np.testing.assert_allclose(lhs, rhs, atol=1e-8)


def test_m21_gradient_uses_precomputed_rhs(rng: np.random.Generator) -> None:
    problem = _random_problem(rng, model=ObservationalModel.M2_1)
    config = problem.config
    u = Image(rng.normal(size=SCALE.hr_shape))
    rhs = precompute_m21_rhs(problem.frames, problem.flows, SCALE)
    blurred = apply_model(ObservationalModel.M2_1, u, None, config.blur, SCALE)
    expected = sum(
        apply_model_adjoint(ObservationalModel.M2_1, Image(blurred.data - r.data), None, config.blur, SCALE).data
        for r in rhs
    )
    np.testing.assert_allclose(Reconstructor(problem).data_gradient(u.data), expected, atol=1e-9)


def test_threaded_gradient_matches_serial(rng: np.random.Generator) -> None:
    problem = _random_problem(rng, frames=5)
    u = rng.normal(size=SCALE.hr_shape)
    np.testing.assert_array_equal(
        Reconstructor(problem, workers=3).data_gradient(u), Reconstructor(problem).data_gradient(u)
    )


def test_zero_iterations_return_the_initialisation(rng: np.random.Generator) -> None:
    problem = _random_problem(rng, k_max=0)
    np.testing.assert_array_equal(reconstruct(problem).data, initialise(problem).data)


def test_homogeneous_energy_does_not_increase(rng: np.random.Generator) -> None:
    problem = _random_problem(rng, regulariser=Regulariser.HD, tau=0.05, k_max=20)
    values = [energy(initialise(problem), problem)]
    reconstruct(problem, callback=lambda _, u: values.append(energy(Image(u), problem)))
    assert len(values) == 21
    assert all(b <= a * (1.0 + 1e-12) for a, b in zip(values, values[1:]))


def test_callback_sees_every_step(rng: np.random.Generator) -> None:
    problem = _random_problem(rng, k_max=4)
    seen: list[int] = []
    reconstruct(problem, callback=lambda k, _: seen.append(k))
    assert seen == [1, 2, 3, 4]


def test_noise_free_reconstruction_improves_on_interpolation() -> None:
    hr = make_scene("house", 32)
    spec = DatasetSpec(num_frames=4, noise_sigma=0.0, seed=3)
    dataset = generate_dataset(hr, spec)
    config = SolverConfig(
        scale=dataset.scale,
        regulariser=Regulariser.HD,
        alpha=0.0,
        tau=0.5,
        k_max=20,
        blur=BlurSpec(sigma_b=spec.blur_sigma),
    )
    problem = SRProblem(frames=dataset.frames, flows=dataset.flows, config=config)
    assert mse(reconstruct(problem), hr) < mse(initialise(problem), hr)


def test_divergence_raises_stability_error(rng: np.random.Generator) -> None:
    problem = _random_problem(rng, regulariser=Regulariser.HD, tau=1000.0, k_max=200)
    config = problem.config.with_params(alpha=1.0e6)
    problem = SRProblem(frames=problem.frames, flows=problem.flows, config=config)
    with np.errstate(over="ignore", invalid="ignore"), pytest.raises(StabilityError):
        reconstruct(problem)


def test_initialise_with_factor_one_is_the_reference(rng: np.random.Generator) -> None:
    scale = ScaleSpec.from_factor(9, 7, 1.0)
    frames = [Image(rng.normal(size=scale.lr_shape)) for _ in range(2)]
    config = SolverConfig(scale=scale, regulariser=Regulariser.HD)
    problem = SRProblem(frames=frames, flows=[FlowField.zeros(9, 7)] * 2, config=config, reference_index=0)
    np.testing.assert_allclose(initialise(problem).data, frames[0].data, atol=1e-12)
