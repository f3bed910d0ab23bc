"""File formats: point-cloud CSV, plain-text voxel grids, tube/curve JSON, OBJ meshes.

Voxel grid text layout::

    tubefit-voxel-grid 1
    dims NX NY NZ
    pitch P            (or: pitch PX PY PZ)
    origin OX OY OZ
    data
    v000 v001 ... (NX*NY*NZ values, C order: last index fastest)

Lines beginning with ``#`` are comments in every text format.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .core import PointCloud
from .cross_section import CrossSection
from .errors import InputError, ParseError, UnsupportedVersionError
from .principal_curve import CurveFitConfig, PrincipalCurve
from .spline import CoordinateSpline
from .tube import Lattice, SectionGap, SurfaceMesh, Tube, TubeConfig

TUBE_FORMAT = "tubefit.tube"
CURVE_FORMAT = "tubefit.curve"
FORMAT_VERSION = 1
VOXEL_MAGIC = "tubefit-voxel-grid"


def _data_lines(path):
    path = Path(path)
    if not path.exists():
        raise InputError(f"input file not found: {path}")
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if s and not s.startswith("#"):
                yield lineno, s


# -- point clouds ---------------------------------------------------------------

_COLUMNS = {"x", "y", "z", "intensity", "scalar"}


def _read_csv(path) -> PointCloud:
    rows, header = [], None
    for lineno, line in _data_lines(path):
        fields = [f.strip() for f in line.split(",")]
        try:
            vals = [float(f) for f in fields]
        except ValueError:
            if header is None and not rows:
                header = [f.lower() for f in fields]
                if not {"x", "y", "z"} <= set(header) or not set(header) <= _COLUMNS:
                    raise ParseError(f"unrecognized header {fields!r}", path, lineno) from None
                continue
            raise ParseError(f"non-numeric field in row {line!r}", path, lineno) from None
        width = len(header) if header else (len(rows[0][1]) if rows else len(vals))
        if len(vals) != width or width not in (3, 4, 5):
            raise ParseError(f"expected {width} columns (3-5), got {len(vals)}", path, lineno)
        if not all(math.isfinite(v) for v in vals):
            raise ParseError("non-finite value", path, lineno)
        rows.append((lineno, vals))
    if not rows:
        raise InputError(f"no points in {path}")
    arr = np.array([r for _, r in rows], dtype=float)
    names = header or ["x", "y", "z", "intensity", "scalar"][: arr.shape[1]]
    col = {n: i for i, n in enumerate(names)}
    intens = arr[:, col["intensity"]] if "intensity" in col else None
    if intens is not None and np.any(intens < 0):
        bad = rows[int(np.argmax(intens < 0))][0]
        raise ParseError("negative intensity", path, bad)
    scal = arr[:, col["scalar"]] if "scalar" in col else None
    return PointCloud(arr[:, [col["x"], col["y"], col["z"]]], intens, scal)


def read_voxel_grid(path):
    """Return ``(values, lattice)`` from the plain-text voxel grid format."""
    lines = _data_lines(path)
    head = {}
    try:
        lineno, magic = next(lines)
    except StopIteration:
        raise ParseError("empty voxel grid file", path) from None
    parts = magic.split()
    if parts[0] != VOXEL_MAGIC:
        raise ParseError(f"missing {VOXEL_MAGIC!r} header", path, lineno)
    if len(parts) < 2 or parts[1] != str(FORMAT_VERSION):
        raise UnsupportedVersionError(f"unsupported voxel grid version {parts[1:]!r}", path, lineno)
    values = []
    in_data = False
    for lineno, line in lines:
        if not in_data:
            key, *rest = line.split()
            if key == "data":
                in_data = True
                continue
            if key not in ("dims", "pitch", "origin"):
                raise ParseError(f"unknown header key {key!r}", path, lineno)
            try:
                head[key] = [float(v) for v in rest]
            except ValueError:
                raise ParseError(f"bad {key} values", path, lineno) from None
            continue
        try:
            values.extend(float(v) for v in line.split())
        except ValueError:
            raise ParseError("non-numeric voxel value", path, lineno) from None
    for key in ("dims", "pitch", "origin"):
        if key not in head:
            raise ParseError(f"missing {key!r} header", path)
    dims = tuple(int(v) for v in head["dims"])
    if len(dims) != 3 or len(head["origin"]) != 3 or len(head["pitch"]) not in (1, 3):
        raise ParseError("dims/origin need 3 values and pitch 1 or 3", path)
    n = int(np.prod(dims))
    if len(values) != n:
        raise ParseError(f"expected {n} voxel values, found {len(values)}", path)
    pitch = head["pitch"] * 3 if len(head["pitch"]) == 1 else head["pitch"]
    lattice = Lattice(tuple(head["origin"]), tuple(pitch), dims)
    return np.array(values, dtype=float).reshape(dims), lattice


def write_voxel_grid(path, values, lattice: Lattice, comments=()):
    values = np.asarray(values)
    with Path(path).open("w", encoding="utf-8") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        fh.write(f"{VOXEL_MAGIC} {FORMAT_VERSION}\n")
        fh.write("dims {} {} {}\n".format(*lattice.shape))
        fh.write("pitch {} {} {}\n".format(*(repr(p) for p in lattice.pitch)))
        fh.write("origin {} {} {}\n".format(*(repr(o) for o in lattice.origin)))
        fh.write("data\n")
        flat = values.reshape(-1)
        row = lattice.shape[2]
        for i in range(0, flat.size, row):
            fh.write(" ".join(_fmt(v) for v in flat[i : i + row]) + "\n")


def _fmt(v) -> str:
    v = float(v)
    return str(int(v)) if v.is_integer() else repr(v)


def read_point_cloud(path, format: str = "csv", threshold: float = 0.0) -> PointCloud:
    """Load a point cloud.

    ``csv`` rows are ``x,y,z[,intensity[,scalar]]`` with an optional header
    naming those columns. ``voxel_grid`` keeps voxels whose value exceeds
    ``threshold`` and uses the value as intensity.
    """
    if format == "csv":
        return _read_csv(path)
    if format == "voxel_grid":
        values, lattice = read_voxel_grid(path)
        keep = values.reshape(-1) > threshold
        if not keep.any():
            raise InputError(f"no voxels in {path} exceed threshold {threshold}")
        return PointCloud(lattice.points()[keep], values.reshape(-1)[keep])
    raise ParseError(f"unknown point cloud format {format!r}", path)


def write_point_cloud(path, cloud: PointCloud, comments=()):
    cols = ["x", "y", "z"]
    data = [cloud.points]
    if cloud.intensities is not None:
        cols.append("intensity")
        data.append(cloud.intensities[:, None])
    if cloud.scalars is not None:
        cols.append("scalar")
        data.append(cloud.scalars[:, None])
    write_csv(path, cols, np.hstack(data).tolist(), comments)


def write_csv(path, header, rows, comments=()):
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "" if math.isnan(v) else repr(v)
    return v


# -- curves and tubes ------------------------------------------------------------

def _spline_to_dict(s: CoordinateSpline) -> dict:
    return {
        "df": s.df,
        "knots": s.knots.tolist(),
        "coefficients": s.coefficients.tolist(),
        "constrained_endpoints": None if s.constrained_endpoints is None else list(s.constrained_endpoints),
    }


def _spline_from_dict(d) -> CoordinateSpline:
    ce = d["constrained_endpoints"]
    return CoordinateSpline(np.array(d["knots"], dtype=float), np.array(d["coefficients"], dtype=float), int(d["df"]),
                            None if ce is None else tuple(ce))


def curve_to_dict(curve: PrincipalCurve) -> dict:
    return {
        "format": CURVE_FORMAT,
        "version": FORMAT_VERSION,
        "final_df": curve.final_df,
        "grid_resolution": curve.grid_resolution,
        "splines": {"x": _spline_to_dict(curve.fx), "y": _spline_to_dict(curve.fy), "z": _spline_to_dict(curve.fz)},
        "latent_times": curve.latent_times.tolist(),
        "sample_indices": None if curve.sample_indices is None else curve.sample_indices.tolist(),
        "mse_history": [list(map(float, s)) for s in curve.mse_history],
        "fit_config": None if curve.config is None else curve.config.to_dict(),
    }


def curve_from_dict(d) -> PrincipalCurve:
    _check_header(d, CURVE_FORMAT)
    cfg = d.get("fit_config")
    if cfg is not None:
        cfg = CurveFitConfig(
            tuple(tuple(e) for e in cfg["endpoints"]), cfg["final_df"], tuple(cfg["df_schedule"]),
            cfg["grid_resolution"], cfg["intensity_exponent"], cfg["rel_mse_tol"], cfg["max_iter_per_stage"],
            cfg["subsample"], cfg["seed"],
        )
    sp = d["splines"]
    si = d.get("sample_indices")
    return PrincipalCurve(
        _spline_from_dict(sp["x"]),
        _spline_from_dict(sp["y"]),
        _spline_from_dict(sp["z"]),
        np.array(d["latent_times"], dtype=float),
        int(d["final_df"]),
        int(d["grid_resolution"]),
        None if si is None else np.array(si, dtype=int),
        [list(s) for s in d.get("mse_history", [])],
        cfg,
    )


def _section_to_dict(s) -> dict:
    if isinstance(s, SectionGap):
        return {"t0": s.t0, "gap": True, "error": s.error}
    S = s.sigma
    return {
        "t0": s.t0,
        "gap": False,
        "center": s.center.tolist(),
        "rotation": s.rotation.reshape(-1).tolist(),
        "mu": s.mu.tolist(),
        "sigma": [S[0, 0], S[0, 1], S[1, 1]],
        "alpha": s.alpha,
        "member_indices": s.member_indices.tolist(),
        "weights": s.weights.tolist(),
    }


def _section_from_dict(d):
    if d["gap"]:
        return SectionGap(float(d["t0"]), d["error"])
    s11, s12, s22 = d["sigma"]
    return CrossSection(
        float(d["t0"]),
        np.array(d["center"], dtype=float),
        np.array(d["rotation"], dtype=float).reshape(3, 3),
        np.array(d["mu"], dtype=float),
        np.array([[s11, s12], [s12, s22]], dtype=float),
        float(d["alpha"]),
        np.array(d["member_indices"], dtype=int),
        np.array(d["weights"], dtype=float),
    )


def tube_to_dict(tube: Tube, provenance=None) -> dict:
    out = {
        "format": TUBE_FORMAT,
        "version": FORMAT_VERSION,
        "config": tube.config.to_dict(),
        "curve": curve_to_dict(tube.curve),
        "sections": [_section_to_dict(s) for s in tube.sections],
    }
    if provenance is not None:
        out["provenance"] = provenance
    return out


def tube_from_dict(d) -> Tube:
    _check_header(d, TUBE_FORMAT)
    c = d["config"]
    cfg = TubeConfig(int(c["n_sections"]), float(c["t_r"]), float(c["alpha"]), c.get("seed"))
    return Tube(curve_from_dict(d["curve"]), [_section_from_dict(s) for s in d["sections"]], cfg)


def _check_header(d, fmt):
    if not isinstance(d, dict) or d.get("format") != fmt:
        raise ParseError(f"not a {fmt} document")
    if d.get("version") != FORMAT_VERSION:
        raise UnsupportedVersionError(f"{fmt} version {d.get('version')!r} is not supported (expected {FORMAT_VERSION})")


def _load_json(path):
    path = Path(path)
    if not path.exists():
        raise InputError(f"input file not found: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", path, exc.lineno) from None


def _dump_json(path, payload):
    Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def write_tube(tube: Tube, path, provenance=None):
    _dump_json(path, tube_to_dict(tube, provenance))


def read_tube(path) -> Tube:
    d = _load_json(path)
    try:
        return tube_from_dict(d)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed tube document: {exc!r}", path) from None


def write_curve(curve: PrincipalCurve, path, provenance=None):
    d = curve_to_dict(curve)
    if provenance is not None:
        d["provenance"] = provenance
    _dump_json(path, d)


def read_curve(path) -> PrincipalCurve:
    d = _load_json(path)
    try:
        return curve_from_dict(d)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed curve document: {exc!r}", path) from None


def write_obj(mesh: SurfaceMesh, path, comments=()):
    """OBJ text with quad faces (1-based). Vertex scalars, when present, follow as ``# s`` lines."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        for v in mesh.vertices:
            fh.write("v {!r} {!r} {!r}\n".format(*map(float, v)))
        if mesh.vertex_scalars is not None:
            for s in mesh.vertex_scalars:
                fh.write(f"# s {float(s)!r}\n")
        for f in mesh.faces + 1:
            fh.write("f {} {} {} {}\n".format(*f))
