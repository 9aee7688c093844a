"""Unified command-line interface for diffusion_sr."""

from __future__ import annotations

import argparse
import csv
import logging
import shutil
import sys
from pathlib import Path
from typing import Any, NoReturn, Sequence

from pydantic import ValidationError

from . import __version__
from .benchmark import PROTOCOLS, BenchmarkSettings, run_benchmark
from .config import (
    CACHE_DIR,
    DATASET_BLUR_SIGMA,
    DATASET_FRAMES,
    DATASET_NOISE_SIGMA,
    DEFORMATION_AMPLITUDE,
    DEFORMATION_SMOOTHNESS,
    DENOISE_PRESETS,
    FLOW_EPSILON,
    FLOW_ETA,
    FLOW_ETA1,
    FLOW_ETA2,
    FLOW_OMEGA,
    FLOW_PRESETS,
    FLOW_SOR_ITERATIONS,
    LOG_LEVEL,
    MODEL_PRESETS,
    NUM_SECTORS,
    SECTOR_RADIUS,
    SR_PRESETS,
    TAU_EED_DENOISE,
    TAU_EED_SR,
    TAU_HOMOGENEOUS,
    TAU_SD_SR,
    WORKERS,
    load_toml,
)
from .degrade import DatasetSpec, generate_dataset, write_dataset
from .diffusion import DiffusivityParams, Regulariser, build_sector_geometry, eed_denoise, hd_denoise, sd_denoise
from .errors import ConfigError, DimensionMismatchError, ImageFormatError, StabilityError
from .evaluation import evaluate_models, grid_search, write_rows
from .flow_cache import FlowCache
from .image import mse
from .image_io import load_image, write_flow, write_image
from .noise import add_clipped_awgn
from .operators import BlurSpec, ObservationalModel
from .optical_flow import FlowParams, estimate_flow
from .pipeline import FlowSource, SRPipeline
from .scenes import SCENES, make_scene
from .solver import SolverConfig, reconstruct

LOGGER = logging.getLogger("diffusion_sr")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_NUMERIC = 3

SR_DEFAULTS: dict[str, Any] = {
    "model": "m1",
    "regulariser": "sd",
    "alpha": 0.6,
    "k_max": 34,
    "sigma": 0.6,
    "lambda": 2.7,
    "sigma_b": 1.0,
    "num_sectors": NUM_SECTORS,
    "radius": SECTOR_RADIUS,
}
SOLVER_KEYS = ("model", "regulariser", "alpha", "tau", "k_max", "sigma", "lambda", "sigma_b", "num_sectors", "radius")


class _ArgumentParser(argparse.ArgumentParser):
    """Usage errors exit with status 1."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"Error: {message}\n")


def _image_format(args: argparse.Namespace) -> str | None:
    return getattr(args, "format", None)


# ----------------------------------------------------------------------
# Commands
# ----------------------------------------------------------------------
def _cmd_mse(args: argparse.Namespace) -> int:
    value = mse(load_image(args.a), load_image(args.b))
    print(format(value, ".17g"))
    return EXIT_OK


def _cmd_noise(args: argparse.Namespace) -> int:
    img = add_clipped_awgn(load_image(args.input), args.noise_sigma, args.seed)
    write_image(img, args.output, _image_format(args))
    return EXIT_OK


def _cmd_denoise(args: argparse.Namespace) -> int:
    method = Regulariser(args.method)
    params = dict(DENOISE_PRESETS[method.value][args.preset]) if args.preset else {}
    for key, dest in (("sigma", "sigma"), ("lambda", "lam"), ("k_max", "k_max")):
        value = getattr(args, dest)
        if value is not None:
            params[key] = value
    f = load_image(args.input)
    k_max = int(params.get("k_max", 0))
    if method is Regulariser.HD:
        result = hd_denoise(f, tau=args.tau or TAU_HOMOGENEOUS, k_max=k_max)
    else:
        if "lambda" not in params:
            raise ConfigError(f"{method.value} denoising needs --lambda or --preset")
        diff = DiffusivityParams(lam=params["lambda"], sigma=params.get("sigma", 0.0))
        if method is Regulariser.EED:
            result = eed_denoise(f, diff, tau=args.tau or TAU_EED_DENOISE, k_max=k_max)
        else:
            geometry = build_sector_geometry(args.sectors, args.radius, diff.sigma)
            result = sd_denoise(f, diff, geometry, tau=args.tau, k_max=k_max)
    write_image(result, args.output, _image_format(args))
    return EXIT_OK


def _flow_params(args: argparse.Namespace) -> FlowParams:
    values: dict[str, Any] = {}
    if getattr(args, "flow_preset", None):
        values.update(FLOW_PRESETS[args.flow_preset])
    for name in ("sigma_of", "alpha_of", "eta", "eta1", "eta2", "omega", "epsilon", "sor_iterations"):
        value = getattr(args, name, None)
        if value is not None:
            values[name] = value
    return FlowParams(**values)


def _cmd_flow(args: argparse.Namespace) -> int:
    reference = load_image(args.reference)
    target = load_image(args.target)
    flow = estimate_flow(reference, target, _flow_params(args))
    write_flow(flow, args.output)
    return EXIT_OK


def _cmd_degrade(args: argparse.Namespace) -> int:
    if args.image is not None:
        hr = load_image(args.image)
    else:
        hr = make_scene(args.scene, args.size, args.seed)
    spec = DatasetSpec(
        num_frames=args.frames,
        blur_sigma=args.blur_sigma,
        scale_factor=args.factor,
        noise_sigma=args.noise_sigma,
        seed=args.seed,
        deformation_amplitude=args.amplitude,
        deformation_smoothness=args.smoothness,
    )
    dataset = generate_dataset(hr, spec, workers=args.workers)
    manifest = write_dataset(dataset, args.out_dir)
    print(manifest)
    return EXIT_OK


def _solver_params(args: argparse.Namespace) -> dict[str, Any]:
    """Defaults, then ``--preset``, then ``--config`` file, then explicit flags."""
    params = dict(SR_DEFAULTS)
    regulariser = args.regulariser or SR_DEFAULTS["regulariser"]
    if args.config is not None:
        table = load_toml(args.config)
        table = table.get("solver", table)
        unknown = set(table) - set(SOLVER_KEYS)
        if unknown:
            raise ConfigError(f"Unknown solver keys in {args.config}: {', '.join(sorted(unknown))}")
        regulariser = args.regulariser or table.get("regulariser", regulariser)
        if args.preset:
            params.update(SR_PRESETS[regulariser][args.preset])
        params.update(table)
    elif args.preset:
        params.update(SR_PRESETS[regulariser][args.preset])
    for key in SOLVER_KEYS:
        value = getattr(args, "lam" if key == "lambda" else key, None)
        if value is not None:
            params[key] = value
    params["regulariser"] = regulariser
    return params


def _pipeline(args: argparse.Namespace) -> SRPipeline:
    estimated = FlowSource(args.flow) is FlowSource.ESTIMATED
    cache = FlowCache(args.cache_dir) if estimated and not args.no_cache else None
    return SRPipeline.load(
        args.manifest,
        flow_source=FlowSource(args.flow),
        flow_params=_flow_params(args),
        upsampled_flow=args.upsampled_flow,
        cache=cache,
        workers=args.workers,
    )


def _base_config(pipeline: SRPipeline, params: dict[str, Any]) -> SolverConfig:
    return pipeline.config(
        model=ObservationalModel.parse(str(params["model"])),
        regulariser=Regulariser(params["regulariser"]),
        alpha=params["alpha"],
        tau=params.get("tau"),
        k_max=int(params["k_max"]),
        blur=BlurSpec(sigma_b=params["sigma_b"]),
        diffusivity=DiffusivityParams(lam=params["lambda"], sigma=params["sigma"]),
        num_sectors=int(params["num_sectors"]),
        radius=float(params["radius"]),
    )


def _cmd_superres(args: argparse.Namespace) -> int:
    pipeline = _pipeline(args)
    config = _base_config(pipeline, _solver_params(args))
    result = reconstruct(pipeline.problem(config), workers=args.workers)
    write_image(result, args.output, _image_format(args))
    if pipeline.ground_truth is not None:
        LOGGER.info("MSE against ground truth: %.4f", mse(result, pipeline.ground_truth))
    return EXIT_OK


def _require_ground_truth(pipeline: SRPipeline) -> None:
    if pipeline.ground_truth is None:
        raise ConfigError("The manifest lists no ground_truth image; MSE evaluation is impossible")


def _cmd_evaluate_models(args: argparse.Namespace) -> int:
    pipeline = _pipeline(args)
    _require_ground_truth(pipeline)
    base = _base_config(pipeline, _solver_params(args))
    models = [ObservationalModel.parse(name) for name in args.models.split(",") if name.strip()]
    if not models:
        raise ConfigError("--models lists no observational model")
    model_params = MODEL_PRESETS[args.model_preset] if args.model_preset else None
    rows = evaluate_models(
        pipeline.problem, base, models, pipeline.ground_truth, model_params, workers=args.workers
    )
    text = write_rows(rows, args.output)
    if args.output is None:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_grid_search(args: argparse.Namespace) -> int:
    pipeline = _pipeline(args)
    _require_ground_truth(pipeline)
    base = _base_config(pipeline, _solver_params(args))
    grid = load_toml(args.grid)
    grid = grid.get("grid", grid)
    result = grid_search(
        pipeline.problem, base, grid, pipeline.ground_truth, strategy=args.strategy, workers=args.workers
    )
    if args.output is not None:
        rows = [{**point.params, "mse": point.mse} for point in result.evaluated]
        args.output.parent.mkdir(parents=True, exist_ok=True)
        with args.output.open("w", encoding="utf-8", newline="") as handle:
            writer = csv.DictWriter(handle, fieldnames=[*grid.keys(), "mse"], lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)
    best = " ".join(f"{key}={value}" for key, value in result.best_params.items())
    print(f"{best} mse={result.best_mse:.6f}")
    return EXIT_OK


def _cmd_benchmark(args: argparse.Namespace) -> int:
    settings = BenchmarkSettings(
        size=args.size,
        seed=args.seed,
        frames=args.frames,
        factor=args.factor,
        strategy=args.strategy,
        workers=args.workers,
    )
    report = run_benchmark(args.protocol, settings, args.out_dir)
    for line in report.summary:
        print(line)
    return EXIT_OK


def _cmd_clear_cache(args: argparse.Namespace) -> int:
    cache_dir: Path = args.cache_dir
    if not cache_dir.exists():
        print(f"Cache directory {cache_dir} does not exist; nothing to clear.")
        return EXIT_OK
    if not cache_dir.is_dir():
        print(f"Error: Cache path is not a directory: {cache_dir}", file=sys.stderr)
        return EXIT_IO
    for child in cache_dir.iterdir():
        if child.is_dir():
            shutil.rmtree(child)
        else:
            child.unlink()
    if args.remove_root:
        cache_dir.rmdir()
    print(f"Cleared cache at {cache_dir}")
    return EXIT_OK


# ----------------------------------------------------------------------
# Parser
# ----------------------------------------------------------------------
def _add_format(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--format",
        choices=["pgm8", "pfm"],
        help="Output format (default: from the file extension, .pfm -> pfm, otherwise 8-bit PGM).",
    )


def _add_seed(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="Random seed (default: 0).")


def _add_workers(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--workers",
        type=int,
        default=WORKERS,
        help=f"Worker threads for per-frame work (default: {WORKERS}, env DIFFUSION_SR_WORKERS).",
    )


def _add_sector_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--sectors", "--num-sectors", dest="num_sectors", type=int, default=None,
        help=f"Number of angular sectors M (default: {NUM_SECTORS}).",
    )
    parser.add_argument(
        "--radius", type=float, default=None, help=f"Sector disc radius rho (default: {SECTOR_RADIUS:g})."
    )


def _add_flow_args(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("optical flow")
    group.add_argument(
        "--flow-preset",
        choices=sorted(FLOW_PRESETS),
        help="Dataset preset for (sigma_OF, alpha_OF) (default: none, the flags below apply).",
    )
    group.add_argument("--sigma-of", type=float, help="Pre-smoothing sigma_OF in pixels (default: 1.0).")
    group.add_argument("--alpha-of", type=float, help="Flow smoothness weight alpha_OF (default: 15.6).")
    group.add_argument("--eta", type=float, help=f"Pyramid downsampling factor eta (default: {FLOW_ETA}).")
    group.add_argument("--eta1", type=int, help=f"Inner fixed-point iterations eta1 (default: {FLOW_ETA1}).")
    group.add_argument("--eta2", type=int, help=f"Outer fixed-point iterations eta2 (default: {FLOW_ETA2}).")
    group.add_argument("--omega", type=float, help=f"SOR relaxation omega (default: {FLOW_OMEGA}).")
    group.add_argument("--epsilon", type=float, help=f"Robust penaliser epsilon (default: {FLOW_EPSILON:g}).")
    group.add_argument(
        "--sor-iterations", type=int, help=f"SOR sweeps per inner iteration (default: {FLOW_SOR_ITERATIONS})."
    )


def _add_manifest_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--manifest", type=Path, required=True, help="Dataset manifest.toml written by degrade.")
    parser.add_argument(
        "--flow",
        choices=[source.value for source in FlowSource],
        default=FlowSource.GROUND_TRUTH.value,
        help="Use the manifest's ground-truth flows or estimate them (default: ground-truth).",
    )
    parser.add_argument(
        "--upsampled-flow",
        action="store_true",
        help="Estimate flow on bilinearly upsampled frames instead of the LR frames.",
    )
    parser.add_argument("--no-cache", action="store_true", help="Do not read or write the flow cache.")
    parser.add_argument(
        "--cache-dir", type=Path, default=CACHE_DIR, help="Flow cache root (default: DIFFUSION_SR_CACHE)."
    )
    _add_workers(parser)
    _add_flow_args(parser)


def _add_solver_args(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("solver")
    group.add_argument("--config", type=Path, help="TOML file with solver keys; flags override it.")
    group.add_argument(
        "--preset", choices=sorted(SR_PRESETS["sd"]), help="Parameter preset for the chosen regulariser."
    )
    group.add_argument(
        "--model",
        choices=[model.value for model in ObservationalModel],
        help="Observational model (default: m1 = D B W).",
    )
    group.add_argument(
        "--regulariser",
        choices=[reg.value for reg in Regulariser],
        help="Smoothness term (default: sd).",
    )
    group.add_argument("--alpha", type=float, help=f"Smoothness weight alpha (default: {SR_DEFAULTS['alpha']}).")
    group.add_argument(
        "--tau",
        type=float,
        help=f"Time step tau (default: {TAU_SD_SR} for sd, {TAU_EED_SR} for eed and hd).",
    )
    group.add_argument("--kmax", dest="k_max", type=int, help=f"Iterations k_max (default: {SR_DEFAULTS['k_max']}).")
    group.add_argument(
        "--sigma", type=float, help=f"Diffusivity pre-smoothing sigma (default: {SR_DEFAULTS['sigma']})."
    )
    group.add_argument(
        "--lambda", dest="lam", type=float, help=f"Contrast parameter lambda (default: {SR_DEFAULTS['lambda']})."
    )
    group.add_argument(
        "--sigma-b", dest="sigma_b", type=float, help=f"Blur sigma_B of the model (default: {SR_DEFAULTS['sigma_b']})."
    )
    _add_sector_args(group)  # type: ignore[arg-type]


def _build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(
        prog="diffusion-sr",
        description="Multi-frame super-resolution with edge-enhancing and sector diffusion regularisers.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "--log-level",
        default=LOG_LEVEL,
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help=f"Log level on stderr (default: {LOG_LEVEL}, env DIFFUSION_SR_LOG_LEVEL).",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Shortcut for --log-level INFO.")
    subparsers = parser.add_subparsers(dest="cmd", required=True)

    # degrade
    parser_degrade = subparsers.add_parser("degrade", help="Generate a synthetic multi-frame dataset.")
    source = parser_degrade.add_mutually_exclusive_group()
    source.add_argument("--image", type=Path, help="Ground-truth HR image.")
    source.add_argument(
        "--scene", choices=sorted(SCENES), default="text", help="Synthetic scene when no --image is given (default: text)."
    )
    parser_degrade.add_argument("--size", type=int, default=128, help="Synthetic scene size in pixels (default: 128).")
    parser_degrade.add_argument("--out-dir", type=Path, required=True, help="Output directory.")
    parser_degrade.add_argument(
        "--frames", type=int, default=DATASET_FRAMES, help=f"Number of frames N (default: {DATASET_FRAMES})."
    )
    parser_degrade.add_argument("--factor", type=float, default=2.0, help="Downsampling factor (default: 2).")
    parser_degrade.add_argument(
        "--blur-sigma", type=float, default=DATASET_BLUR_SIGMA, help=f"Blur sigma (default: {DATASET_BLUR_SIGMA})."
    )
    parser_degrade.add_argument(
        "--noise-sigma",
        type=float,
        default=DATASET_NOISE_SIGMA,
        help=f"Clipped-AWGN sigma_noise (default: {DATASET_NOISE_SIGMA:g}).",
    )
    parser_degrade.add_argument(
        "--amplitude",
        type=float,
        default=DEFORMATION_AMPLITUDE,
        help=f"Maximum deformation displacement in pixels (default: {DEFORMATION_AMPLITUDE:g}).",
    )
    parser_degrade.add_argument(
        "--smoothness",
        type=float,
        default=DEFORMATION_SMOOTHNESS,
        help=f"Gaussian smoothing of the deformation field (default: {DEFORMATION_SMOOTHNESS:g}).",
    )
    _add_seed(parser_degrade)
    _add_workers(parser_degrade)
    parser_degrade.set_defaults(handler=_cmd_degrade)

    # noise
    parser_noise = subparsers.add_parser("noise", help="Add clipped Gaussian noise to an image.")
    parser_noise.add_argument("--in", dest="input", type=Path, required=True, help="Input image.")
    parser_noise.add_argument("--out", dest="output", type=Path, required=True, help="Output image.")
    parser_noise.add_argument(
        "--noise-sigma", type=float, default=DATASET_NOISE_SIGMA, help=f"sigma_noise (default: {DATASET_NOISE_SIGMA:g})."
    )
    _add_seed(parser_noise)
    _add_format(parser_noise)
    parser_noise.set_defaults(handler=_cmd_noise)

    # denoise
    parser_denoise = subparsers.add_parser("denoise", help="Denoise an image with HD, EED or SD.")
    parser_denoise.add_argument(
        "--method", choices=[reg.value for reg in Regulariser], default="sd", help="Diffusion filter (default: sd)."
    )
    parser_denoise.add_argument("--in", dest="input", type=Path, required=True, help="Noisy input image.")
    parser_denoise.add_argument("--out", dest="output", type=Path, required=True, help="Output image.")
    parser_denoise.add_argument(
        "--preset", choices=sorted(DENOISE_PRESETS["sd"]), help="Preset (sigma, lambda, k_max), e.g. P40."
    )
    parser_denoise.add_argument("--sigma", type=float, help="Diffusivity pre-smoothing sigma (default: 0).")
    parser_denoise.add_argument("--lambda", dest="lam", type=float, help="Contrast parameter lambda (required for eed/sd).")
    parser_denoise.add_argument("--kmax", dest="k_max", type=int, help="Iterations k_max (default: 0).")
    parser_denoise.add_argument(
        "--tau",
        type=float,
        help=f"Time step tau (default: {TAU_EED_DENOISE} for eed, {TAU_HOMOGENEOUS} for hd, tau_max of the sectors for sd).",
    )
    parser_denoise.add_argument(
        "--sectors", dest="sectors", type=int, default=NUM_SECTORS, help=f"Number of sectors M (default: {NUM_SECTORS})."
    )
    parser_denoise.add_argument(
        "--radius", type=float, default=SECTOR_RADIUS, help=f"Sector disc radius rho (default: {SECTOR_RADIUS:g})."
    )
    _add_format(parser_denoise)
    parser_denoise.set_defaults(handler=_cmd_denoise)

    # flow
    parser_flow = subparsers.add_parser("flow", help="Estimate optical flow between two images.")
    parser_flow.add_argument("--reference", type=Path, required=True, help="Reference image.")
    parser_flow.add_argument("--target", type=Path, required=True, help="Target image.")
    parser_flow.add_argument("--out", dest="output", type=Path, required=True, help="Output .flo file.")
    _add_flow_args(parser_flow)
    parser_flow.set_defaults(handler=_cmd_flow)

    # superres
    parser_sr = subparsers.add_parser("superres", help="Reconstruct the HR image of a dataset.")
    _add_manifest_args(parser_sr)
    _add_solver_args(parser_sr)
    parser_sr.add_argument("--out", dest="output", type=Path, required=True, help="Output image.")
    _add_format(parser_sr)
    parser_sr.set_defaults(handler=_cmd_superres)

    # evaluate-models
    parser_eval = subparsers.add_parser("evaluate-models", help="Compare observational models by MSE.")
    _add_manifest_args(parser_eval)
    _add_solver_args(parser_eval)
    parser_eval.add_argument(
        "--models",
        default=",".join(model.value for model in ObservationalModel),
        help="Comma-separated models (default: all seven).",
    )
    parser_eval.add_argument(
        "--model-preset", choices=sorted(MODEL_PRESETS), help="Per-model parameter table (T2 or T2-S)."
    )
    parser_eval.add_argument("--out", dest="output", type=Path, help="CSV output (default: stdout).")
    parser_eval.set_defaults(handler=_cmd_evaluate_models)

    # grid-search
    parser_grid = subparsers.add_parser("grid-search", help="Search solver parameters minimising MSE.")
    _add_manifest_args(parser_grid)
    _add_solver_args(parser_grid)
    parser_grid.add_argument("--grid", type=Path, required=True, help="TOML file mapping parameters to value lists.")
    parser_grid.add_argument(
        "--strategy", choices=["exhaustive", "coordinate"], default="exhaustive", help="Search strategy (default: exhaustive)."
    )
    parser_grid.add_argument("--out", dest="output", type=Path, help="CSV of every evaluated point.")
    parser_grid.set_defaults(handler=_cmd_grid_search)

    # mse
    parser_mse = subparsers.add_parser("mse", help="Mean squared error between two images.")
    parser_mse.add_argument("--a", type=Path, required=True, help="First image.")
    parser_mse.add_argument("--b", type=Path, required=True, help="Second image.")
    parser_mse.set_defaults(handler=_cmd_mse)

    # benchmark
    parser_bench = subparsers.add_parser("benchmark", help="Run a comparison protocol on synthetic scenes.")
    parser_bench.add_argument("protocol", choices=sorted(PROTOCOLS), help="Protocol to run.")
    parser_bench.add_argument("--out-dir", type=Path, required=True, help="Directory for CSV tables and summary.")
    parser_bench.add_argument("--size", type=int, default=128, help="Scene size in pixels (default: 128).")
    parser_bench.add_argument("--frames", type=int, default=8, help="Frames per SR dataset (default: 8).")
    parser_bench.add_argument("--factor", type=float, default=2.0, help="SR downsampling factor (default: 2).")
    parser_bench.add_argument(
        "--strategy", choices=["exhaustive", "coordinate"], default="coordinate", help="Search strategy (default: coordinate)."
    )
    _add_seed(parser_bench)
    _add_workers(parser_bench)
    parser_bench.set_defaults(handler=_cmd_benchmark)

    # clear-cache
    parser_cache = subparsers.add_parser("clear-cache", help="Remove cached optical flows.")
    parser_cache.add_argument(
        "--cache-dir", type=Path, default=CACHE_DIR, help="Cache directory to clean (defaults to DIFFUSION_SR_CACHE)."
    )
    parser_cache.add_argument(
        "--remove-root", action="store_true", help="Delete the cache directory itself after clearing contents."
    )
    parser_cache.set_defaults(handler=_cmd_clear_cache)

    return parser


def _configure_logging(args: argparse.Namespace) -> None:
    level = "INFO" if args.verbose and args.log_level == "WARNING" else args.log_level
    logging.basicConfig(stream=sys.stderr, level=level, format="%(levelname)s %(name)s: %(message)s")


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    _configure_logging(args)

    try:
        return args.handler(args)
    except StabilityError as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ImageFormatError, OSError) as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValidationError, ConfigError, DimensionMismatchError, KeyError, ValueError) as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
