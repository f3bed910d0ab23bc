"""Command-line interface.

Exit codes: 0 success, 2 usage error, 3 input/parse error, 4 invalid
configuration, 5 unsupported file version, 6 fitting failure, 1 other.
On failure one JSON line ``{"error": {...}}`` is written to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .core import PointCloud
from .cross_section import CrossSection
from .errors import (
    DomainError,
    InputError,
    PreconditionError,
    TubeFitError,
    UnsupportedVersionError,
)
from .evalsim import (
    SHAPES,
    AlphaSimConfig,
    PhantomConfig,
    generate_coil_phantom,
    run_alpha_sim,
    run_shape_sim,
)
from .io import (
    read_curve,
    read_point_cloud,
    read_tube,
    read_voxel_grid,
    write_csv,
    write_curve,
    write_obj,
    write_point_cloud,
    write_tube,
    write_voxel_grid,
)
from .principal_curve import CurveFitConfig, fit_principal_curve
from .profiles import arc_length, concentration_profile, voxel_neighborhood_profile
from .tube import TubeConfig, classify_alpha_grid, export_surface, fit_tube

EXIT_OK = 0
EXIT_OTHER = 1
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_CONFIG = 4
EXIT_VERSION = 5
EXIT_FIT = 6

PRESETS = {
    "spect-colon": {"t_r": 0.2, "alpha": 0.15, "df": 5},
    "dti-cst": {"t_r": 0.4, "alpha": 0.1, "df": 8},
}
DEFAULTS = {"t_r": 0.1, "alpha": 0.12, "df": 5}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _emit_error(EXIT_USAGE, "UsageError", message)
        self.exit(EXIT_USAGE)


def _emit_error(code, kind, message):
    sys.stderr.write(json.dumps({"error": {"exit_code": code, "type": kind, "message": message}}) + "\n")


def _exit_code(exc) -> int:
    if isinstance(exc, UnsupportedVersionError):
        return EXIT_VERSION
    if isinstance(exc, (InputError, FileNotFoundError)):
        return EXIT_INPUT
    if isinstance(exc, (PreconditionError, DomainError)):
        return EXIT_CONFIG
    if isinstance(exc, TubeFitError):
        return EXIT_FIT
    return EXIT_OTHER


def _floats(raw: str) -> list[float]:
    return [float(x) for x in raw.replace(",", " ").split()]


def _ints(raw: str) -> list[int]:
    return [int(x) for x in raw.replace(",", " ").split()]


def _provenance(command: str, args: argparse.Namespace) -> dict:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "command", "out", "threads")}
    return {"tool": "tubefit", "version": __version__, "command": command, "config": cfg, "seed": getattr(args, "seed", None)}


def _comments(prov: dict) -> list[str]:
    return [f"tubefit {prov['version']} {prov['command']}", "config " + json.dumps(prov["config"], sort_keys=True)]


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _resolve(args, key):
    val = getattr(args, key, None)
    if val is not None:
        return val
    if getattr(args, "preset", None):
        return PRESETS[args.preset][key]
    return DEFAULTS[key]


def _load_cloud(args) -> PointCloud:
    return read_point_cloud(args.input, args.format, args.threshold)


def _curve_config(args) -> CurveFitConfig:
    if args.start is None or args.end is None:
        raise PreconditionError("--start and --end are required to fit a curve")
    df = _resolve(args, "df")
    sched = tuple(_ints(args.schedule)) if args.schedule else None
    return CurveFitConfig(
        (tuple(args.start), tuple(args.end)),
        df,
        sched,
        args.grid,
        args.gamma,
        args.tol,
        args.max_iter,
        args.subsample,
        args.seed,
    )


def _write_mse_log(path, curve, comments):
    rows = []
    for stage, (df, hist) in enumerate(zip(curve.config.df_schedule, curve.mse_history)):
        rows += [(stage, df, it, m) for it, m in enumerate(hist)]
    write_csv(path, ["stage", "df", "iteration", "mse"], rows, comments)


def cmd_fit_curve(args) -> int:
    prov = _provenance("fit-curve", args)
    cloud = _load_cloud(args)
    curve = fit_principal_curve(cloud, _curve_config(args))
    out = _outdir(args)
    write_curve(curve, out / "curve.json", prov)
    _write_mse_log(out / "mse_log.csv", curve, _comments(prov))
    return EXIT_OK


def cmd_fit_tube(args) -> int:
    prov = _provenance("fit-tube", args)
    cloud = _load_cloud(args)
    out = _outdir(args)
    if args.curve:
        curve = read_curve(args.curve)
    else:
        curve = fit_principal_curve(cloud, _curve_config(args))
        write_curve(curve, out / "curve.json", prov)
        _write_mse_log(out / "mse_log.csv", curve, _comments(prov))
    cfg = TubeConfig(args.sections, _resolve(args, "t_r"), _resolve(args, "alpha"), args.seed)
    tube = fit_tube(curve, cloud, cfg)
    write_tube(tube, out / "tube.json", prov)
    dist = arc_length(curve, tube.t0s, curve.grid_resolution)
    rows = []
    for s, d in zip(tube.sections, dist):
        if isinstance(s, CrossSection):
            e = s.ellipse
            rows.append((s.t0, d, e.semi_major, e.semi_minor, e.area, 0))
        else:
            rows.append((s.t0, d, None, None, None, 1))
    write_csv(out / "sections.csv", ["t0", "distance", "semi_major", "semi_minor", "area", "gap"], rows, _comments(prov))
    try:
        mesh = export_surface(tube, args.n_boundary)
    except TubeFitError as exc:
        sys.stderr.write(f"warning: surface not written: {exc}\n")
    else:
        write_obj(mesh, out / "surface.obj", _comments(prov))
    return EXIT_OK


def cmd_profile(args) -> int:
    prov = _provenance("profile", args)
    tube = read_tube(args.tube)
    cloud = _load_cloud(args)
    kinds = [k.strip() for k in args.kind.split(",") if k.strip()]
    rows = []
    for kind in kinds:
        if kind == "voxel_neighborhood":
            if args.edge is None:
                raise PreconditionError("--edge is required for voxel_neighborhood profiles")
            prof = voxel_neighborhood_profile(tube.curve, cloud, args.edge, len(tube.sections), args.normalize)
        else:
            prof = concentration_profile(tube, cloud, kind, args.normalize)
        rows += [(kind, t, d, v) for t, d, v in prof.rows()]
    out = _outdir(args)
    write_csv(out / "profile.csv", ["kind", "t0", "distance", "value"], rows, _comments(prov))
    return EXIT_OK


def cmd_validate(args) -> int:
    prov = _provenance("validate", args)
    tube = read_tube(args.tube)
    values, lattice = read_voxel_grid(args.truth)
    truth = values.reshape(-1) > args.truth_threshold
    alphas = _floats(args.alpha) if args.alpha else [tube.config.alpha]
    results = classify_alpha_grid(tube, truth, lattice, alphas)
    header = ["alpha", "one_minus_alpha", "tp_rate", "fp_rate", "tp", "fp", "fn", "tn"]
    rows = [[r.as_row()[h] for h in header] for r in results]
    out = _outdir(args)
    write_csv(out / "validate.csv", header, rows, _comments(prov))
    return EXIT_OK


def cmd_simulate_alpha(args) -> int:
    prov = _provenance("simulate-alpha", args)
    grid = tuple(_floats(args.alpha)) if args.alpha else AlphaSimConfig().alpha_grid
    cfg = AlphaSimConfig(args.A, args.B, args.sigma, args.n_points, args.replicates, grid, args.seed, args.resolution)
    curve = run_alpha_sim(cfg, threads=args.threads)
    rows = list(curve.rows())
    header = ["alpha", "tp_mean", "tp_se", "fp_mean", "fp_se", "n_replicates", "n_skipped"]
    out = _outdir(args)
    write_csv(out / "alpha_sim.csv", header, [[r[h] for h in header] for r in rows], _comments(prov))
    return EXIT_OK


def cmd_simulate_shape(args) -> int:
    prov = _provenance("simulate-shape", args)
    shapes = sorted(SHAPES) if args.shape == "all" else [s.strip() for s in args.shape.split(",")]
    rows = []
    for shape in shapes:
        for alpha in _floats(args.alpha):
            r = run_shape_sim(shape, alpha, args.seed, points_per_layer=args.points_per_layer, t_r=args.t_r)
            rows.append((r.shape, r.alpha, r.tp, r.fp, r.n_gaps, r.seed))
    out = _outdir(args)
    write_csv(out / "shape_sim.csv", ["shape", "alpha", "tp", "fp", "n_gaps", "seed"], rows, _comments(prov))
    return EXIT_OK


def cmd_phantom(args) -> int:
    prov = _provenance("phantom", args)
    radius = _floats(args.tube_radius)
    cfg = PhantomConfig(
        args.coil_radius,
        radius[0] if len(radius) == 1 else tuple(radius),
        args.turns,
        args.height,
        args.pitch,
        args.noise,
        args.mean_level,
        args.blur,
        args.threshold_fraction,
        args.sample_size,
        args.seed,
    )
    ph = generate_coil_phantom(cfg)
    out = _outdir(args)
    comments = _comments(prov)
    write_voxel_grid(out / "truth.vox", ph.truth.astype(np.uint8), ph.lattice, comments)
    (start, end) = ph.endpoints
    write_point_cloud(
        out / "cloud.csv",
        ph.cloud,
        comments + ["endpoints " + json.dumps([list(start), list(end)])],
    )
    return EXIT_OK


def _add_input(p, required=True):
    p.add_argument("--input", required=required, help="point cloud file")
    p.add_argument("--format", choices=["csv", "voxel_grid"], default="csv")
    p.add_argument("--threshold", type=float, default=0.0, help="voxel_grid histogram threshold (keep values above)")


def _add_curve(p):
    p.add_argument("--start", type=float, nargs=3, metavar=("X", "Y", "Z"))
    p.add_argument("--end", type=float, nargs=3, metavar=("X", "Y", "Z"))
    p.add_argument("--df", type=int, default=None, help="final spline degrees of freedom K")
    p.add_argument("--schedule", default=None, help="comma-separated df schedule ending at K")
    p.add_argument("--grid", type=int, default=1000, help="latent-time grid resolution")
    p.add_argument("--gamma", type=float, default=None, help="intensity weight exponent")
    p.add_argument("--tol", type=float, default=1e-4, help="relative MSE stopping tolerance")
    p.add_argument("--max-iter", type=int, default=50)
    p.add_argument("--subsample", type=int, default=None)
    p.add_argument("--preset", choices=sorted(PRESETS), default=None)


def _add_common(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--threads", type=int, default=1, help="worker cap")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="tubefit",
        description="Centerline and tube estimation for tube-shaped point clouds.",
        epilog="exit codes: 0 ok, 1 other, 2 usage, 3 input/parse, 4 invalid config, 5 unsupported version, 6 fit failure",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"tubefit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit-curve", help="fit a principal-curve centerline")
    _add_input(p)
    _add_curve(p)
    _add_common(p)
    p.set_defaults(func=cmd_fit_curve)

    p = sub.add_parser("fit-tube", help="fit curve (or load one) and tube; write tube, mesh, section table")
    _add_input(p)
    _add_curve(p)
    p.add_argument("--curve", default=None, help="existing curve.json instead of fitting")
    p.add_argument("--sections", type=int, default=50)
    p.add_argument("--t-r", dest="t_r", type=float, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--n-boundary", type=int, default=32)
    _add_common(p)
    p.set_defaults(func=cmd_fit_tube)

    p = sub.add_parser("profile", help="concentration / scalar profiles along a fitted tube")
    p.add_argument("--tube", required=True)
    _add_input(p)
    p.add_argument("--kind", default="area_normalized",
                   help="comma list of sum, area_normalized, weighted_mean, voxel_neighborhood")
    p.add_argument("--edge", type=float, default=None, help="cube edge for voxel_neighborhood")
    p.add_argument("--normalize", action="store_true", help="divide each profile by its maximum")
    _add_common(p)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("validate", help="voxelwise TP/FP of a tube against a truth voxel grid")
    p.add_argument("--tube", required=True)
    p.add_argument("--truth", required=True, help="truth voxel grid file")
    p.add_argument("--truth-threshold", type=float, default=0.5)
    p.add_argument("--alpha", default=None, help="comma list of levels (default: the tube's)")
    _add_common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("simulate-alpha", help="alpha calibration simulation")
    p.add_argument("--A", type=float, default=1.0, help="semi-major axis")
    p.add_argument("--B", type=float, default=1.0, help="semi-minor axis")
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument("--alpha", default=None, help="comma list of levels")
    p.add_argument("--n-points", type=int, default=100)
    p.add_argument("--replicates", type=int, default=100)
    p.add_argument("--resolution", type=int, default=512)
    _add_common(p)
    p.set_defaults(func=cmd_simulate_alpha)

    p = sub.add_parser("simulate-shape", help="cross-section misspecification study")
    p.add_argument("--shape", default="all", help="square, u_shape, circle, a comma list, or all")
    p.add_argument("--alpha", default="0.12")
    p.add_argument("--points-per-layer", type=int, default=400)
    p.add_argument("--t-r", dest="t_r", type=float, default=0.1)
    _add_common(p)
    p.set_defaults(func=cmd_simulate_shape)

    p = sub.add_parser("phantom", help="generate a helical tube phantom")
    p.add_argument("--coil-radius", type=float, default=10.0)
    p.add_argument("--tube-radius", default="3", help="radius, or 'start,end' for a ramp")
    p.add_argument("--turns", type=float, default=1.5)
    p.add_argument("--height", type=float, default=40.0)
    p.add_argument("--pitch", type=float, default=0.5)
    p.add_argument("--noise", choices=["none", "poisson"], default="none")
    p.add_argument("--mean-level", type=float, default=20.0)
    p.add_argument("--blur", type=float, default=1.0)
    p.add_argument("--threshold-fraction", type=float, default=0.5)
    p.add_argument("--sample-size", type=int, default=1000)
    _add_common(p)
    p.set_defaults(func=cmd_phantom)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - mapped to exit codes
        code = _exit_code(exc)
        _emit_error(code, type(exc).__name__, str(exc))
        return code


if __name__ == "__main__":
    sys.exit(main())
