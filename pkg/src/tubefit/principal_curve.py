"""Modified principal curves: endpoint-pinned, intensity-weighted, with a df schedule."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .core import TOL, PointCloud, as_points
from .errors import (
    DegenerateFitError,
    DomainError,
    InsufficientDataError,
    PreconditionError,
    SingularTangentError,
)
from .spline import CoordinateSpline, fit_spline, quantile_knots

log = logging.getLogger(__name__)

@dataclass(frozen=True)
class CurveFitConfig:
    """Settings for :func:`fit_principal_curve`.

    ``df_schedule`` defaults to ``[4, 5, ..., final_df]``. ``intensity_exponent``
    defaults to 1 when the cloud carries intensities and 0 otherwise.
    """

    endpoints: tuple
    final_df: int = 5
    df_schedule: tuple | None = None
    grid_resolution: int = 1000
    intensity_exponent: float | None = None
    rel_mse_tol: float = 1e-4
    max_iter_per_stage: int = 50
    subsample: int | None = None
    seed: int | None = None

    def __post_init__(self):
        start, end = (np.asarray(e, dtype=float) for e in self.endpoints)
        if start.shape != (3,) or end.shape != (3,) or not (np.all(np.isfinite(start)) and np.all(np.isfinite(end))):
            raise PreconditionError("endpoints must be two finite 3D points")
        if np.allclose(start, end):
            raise PreconditionError("start and end points coincide")
        object.__setattr__(self, "endpoints", (tuple(start.tolist()), tuple(end.tolist())))
        if self.final_df < 4:
            raise PreconditionError("final_df must be at least 4")
        sched = self.df_schedule
        if sched is None:
            sched = tuple(range(4, self.final_df + 1))
        sched = tuple(int(k) for k in sched)
        if not sched or sched[-1] != self.final_df:
            raise PreconditionError("df_schedule must end at final_df")
        if any(b <= a for a, b in zip(sched, sched[1:])):
            raise PreconditionError("df_schedule must be strictly increasing")
        if sched[0] < 2:
            raise PreconditionError("df_schedule entries must be at least 2")
        object.__setattr__(self, "df_schedule", sched)
        if self.grid_resolution < 100:
            raise PreconditionError("grid_resolution must be at least 100")
        if not self.rel_mse_tol > 0:
            raise PreconditionError("rel_mse_tol must be positive")
        if self.intensity_exponent is not None and self.intensity_exponent < 0:
            raise PreconditionError("intensity_exponent must be nonnegative")
        if self.max_iter_per_stage < 1:
            raise PreconditionError("max_iter_per_stage must be at least 1")
        if self.subsample is not None and self.subsample < 1:
            raise PreconditionError("subsample must be positive")

    def to_dict(self) -> dict:
        return {
            "endpoints": [list(self.endpoints[0]), list(self.endpoints[1])],
            "final_df": self.final_df,
            "df_schedule": list(self.df_schedule),
            "grid_resolution": self.grid_resolution,
            "intensity_exponent": self.intensity_exponent,
            "rel_mse_tol": self.rel_mse_tol,
            "max_iter_per_stage": self.max_iter_per_stage,
            "subsample": self.subsample,
            "seed": self.seed,
        }


@dataclass(frozen=True, eq=False)
class PrincipalCurve:
    """Fitted centerline ``f(t) = (fx(t), fy(t), fz(t))`` on ``t in [0, 1]``.

    ``latent_times`` belong to the points actually used in the fit; when the
    cloud was subsampled, ``sample_indices`` maps them back to the cloud.
    ``mse_history`` holds one list of per-iteration weighted MSE values per stage.
    """

    fx: CoordinateSpline
    fy: CoordinateSpline
    fz: CoordinateSpline
    latent_times: np.ndarray
    final_df: int
    grid_resolution: int = 1000
    sample_indices: np.ndarray | None = None
    mse_history: list = field(default_factory=list)
    config: CurveFitConfig | None = None

    def points(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.column_stack([self.fx(t), self.fy(t), self.fz(t)])

    def derivatives(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.column_stack([self.fx.deriv(t), self.fy.deriv(t), self.fz.deriv(t)])

    def __call__(self, t):
        return self.points(t)

    def is_regular(self, n: int = 1000, tol: float = 1e-8) -> bool:
        """True if some coordinate derivative exceeds ``tol`` everywhere on an ``n``-point grid."""
        d = self.derivatives(np.linspace(0, 1, n))
        return bool(np.all(np.abs(d).max(axis=1) > tol))


def _curve_points(curve, t):
    if hasattr(curve, "points"):
        return curve.points(t)
    return np.asarray(curve(t), dtype=float)


def assign_latent_times(curve, cloud, grid_resolution: int = 1000) -> np.ndarray:
    """Nearest grid time ``argmin_t ||f(t) - P_i||`` for every point.

    The search runs over ``{0, 1/G, ..., 1}``; ties go to the smaller ``t``.
    """
    P = cloud.points if isinstance(cloud, PointCloud) else as_points(cloud)
    grid = np.linspace(0.0, 1.0, int(grid_resolution) + 1)
    F = _curve_points(curve, grid)
    dist, idx = cKDTree(F).query(P, k=2)
    # exact two-way ties resolve to the smaller grid index
    tie = dist[:, 0] == dist[:, 1]
    best = np.where(tie, idx.min(axis=1), idx[:, 0])
    return grid[best]


def intensity_weights(cloud: PointCloud, exponent: float | None) -> np.ndarray:
    """Spline weights ``(C_i / mean C) ** exponent``; all ones without intensities."""
    if cloud.intensities is None:
        return np.ones(len(cloud))
    gamma = 1.0 if exponent is None else float(exponent)
    if gamma == 0:
        return np.ones(len(cloud))
    mean = cloud.intensities.mean()
    if mean <= 0:
        raise PreconditionError("intensities are all zero; cannot form intensity weights")
    return (cloud.intensities / mean) ** gamma


def weighted_mse(curve, points, times, weights) -> float:
    r = _curve_points(curve, times) - points
    return float(np.sum(weights * (r * r).sum(axis=1)) / np.sum(weights))


def _chord_curve(start, end):
    splines = [CoordinateSpline(np.empty(0), np.array([a, b - a]), 2, (a, b)) for a, b in zip(start, end)]
    return splines


def _fit_coordinates(times, P, w, df, knots, start, end):
    return [
        fit_spline(times, P[:, c], w, df, endpoint_constraint=(start[c], end[c]), knots=knots)
        for c in range(3)
    ]


def fit_principal_curve(cloud: PointCloud, config: CurveFitConfig) -> PrincipalCurve:
    """Fit a centerline by alternating latent-time assignment and spline refits.

    Each stage of ``config.df_schedule`` keeps its interior knots fixed (placed
    at quantiles of the latent times on entry), which makes the weighted MSE
    non-increasing within the stage. A stage ends when the relative MSE change
    drops below ``rel_mse_tol`` or after ``max_iter_per_stage`` iterations.
    """
    n_total = len(cloud)
    sample = None
    if config.subsample is not None and config.subsample < n_total:
        rng = np.random.default_rng(config.seed)
        sample = np.sort(rng.choice(n_total, size=config.subsample, replace=False))
        cloud_fit = cloud.subset(sample)
    else:
        cloud_fit = cloud
    P = cloud_fit.points
    if len(P) < config.final_df + 2:
        raise InsufficientDataError(f"{len(P)} points cannot support final_df={config.final_df}")
    if np.allclose(P, P[0]):
        raise DegenerateFitError("all points in the cloud are identical")
    w = intensity_weights(cloud_fit, config.intensity_exponent)
    if not np.any(w > 0):
        raise DegenerateFitError("all curve-fitting weights are zero")

    start = np.asarray(config.endpoints[0])
    end = np.asarray(config.endpoints[1])
    chord = end - start
    times = np.clip((P - start) @ chord / (chord @ chord), 0.0, 1.0)
    splines = _chord_curve(start, end)
    G = config.grid_resolution

    def as_curve(sp, t):
        return PrincipalCurve(sp[0], sp[1], sp[2], t, config.final_df, G)

    history = []
    for df in config.df_schedule:
        knots = quantile_knots(times, df, w)
        prev = weighted_mse(as_curve(splines, times), P, times, w)
        stage = []
        for _ in range(config.max_iter_per_stage):
            splines = _fit_coordinates(times, P, w, df, knots, start, end)
            curve = as_curve(splines, times)
            times = assign_latent_times(curve, P, G)
            mse = weighted_mse(curve, P, times, w)
            stage.append(mse)
            rel = abs(prev - mse) / prev if prev > 0 else 0.0
            prev = mse
            if rel < config.rel_mse_tol:
                break
        log.debug("df=%d: %d iterations, mse=%.6g", df, len(stage), stage[-1])
        history.append(stage)

    return PrincipalCurve(
        splines[0],
        splines[1],
        splines[2],
        times,
        config.final_df,
        G,
        sample,
        history,
        config,
    )


def curve_point(curve, t: float) -> np.ndarray:
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"t={t!r} outside [0, 1]")
    return _curve_points(curve, np.array([t]))[0]


def curve_tangents(curve, t) -> np.ndarray:
    """Unit tangents ``f'(t) / ||f'(t)||`` for an array of times."""
    d = curve.derivatives(np.atleast_1d(np.asarray(t, dtype=float)))
    norm = np.linalg.norm(d, axis=1)
    if np.any(norm <= TOL.tangent_norm):
        bad = np.atleast_1d(t)[np.argmax(norm <= TOL.tangent_norm)]
        raise SingularTangentError(f"curve gradient vanishes at t={bad:.6g}")
    return d / norm[:, None]


def curve_tangent(curve, t: float) -> np.ndarray:
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"t={t!r} outside [0, 1]")
    return curve_tangents(curve, np.array([t]))[0]
