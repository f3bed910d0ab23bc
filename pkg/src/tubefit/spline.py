"""Cubic regression splines in latent time with optional pinned endpoints.

A spline with ``df = K`` lives in the natural cubic spline space with
boundary knots at 0 and 1 and ``K - 2`` interior knots, spanned by
``1, t`` and ``K - 2`` truncated-power cubic terms. Natural splines are
linear outside the boundary knots, which on ``[0, 1]`` only means zero
curvature at the two ends.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .core import TOL
from .errors import DegenerateFitError, DomainError, InsufficientDataError, PreconditionError


def _check_domain(t):
    t = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(t)) or np.any(t < 0.0) or np.any(t > 1.0):
        raise DomainError("spline evaluated outside [0, 1]")
    return t


def _full_knots(interior):
    return np.concatenate([[0.0], np.asarray(interior, dtype=float), [1.0]])


def natural_basis(t, interior_knots, deriv: int = 0) -> np.ndarray:
    """Design matrix of the natural cubic spline basis (or its derivative).

    Columns are ``1, t, d_k - d_{K-2}`` for ``k = 0..K-3`` where
    ``d_k(t) = ((t - xi_k)_+^3 - (t - xi_{K-1})_+^3) / (xi_{K-1} - xi_k)``.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    xi = _full_knots(interior_knots)
    K = len(xi)
    last = xi[-1]

    def d(k):
        if deriv == 0:
            num = np.clip(t - xi[k], 0, None) ** 3 - np.clip(t - last, 0, None) ** 3
        else:
            num = 3 * (np.clip(t - xi[k], 0, None) ** 2 - np.clip(t - last, 0, None) ** 2)
        return num / (last - xi[k])

    cols = []
    if deriv == 0:
        cols += [np.ones_like(t), t]
    else:
        cols += [np.zeros_like(t), np.ones_like(t)]
    dlast = d(K - 2)
    for k in range(K - 2):
        cols.append(d(k) - dlast)
    return np.column_stack(cols)


def quantile_knots(ts, df: int, weights=None) -> np.ndarray:
    """Interior knots at the ``j / (df - 1)`` quantiles of the ``ts`` with positive weight.

    Ties are separated to a minimal spacing so the knots stay strictly
    increasing inside ``(0, 1)``.
    """
    ts = np.asarray(ts, dtype=float)
    if weights is not None:
        ts = ts[np.asarray(weights, dtype=float) > 0]
    n_int = df - 2
    if n_int <= 0:
        return np.empty(0)
    probs = np.arange(1, n_int + 1) / (df - 1)
    k = np.quantile(ts, probs)
    eps = TOL.knot_spacing
    k = np.clip(k, eps, 1 - eps)
    for i in range(1, n_int):
        k[i] = max(k[i], k[i - 1] + eps)
    if k[-1] > 1 - eps:
        k[-1] = 1 - eps
        for i in range(n_int - 2, -1, -1):
            k[i] = min(k[i], k[i + 1] - eps)
    return k


@dataclass(frozen=True, eq=False)
class CoordinateSpline:
    """One coordinate of a curve as a function of latent time.

    ``coefficients`` always refer to the unconstrained natural basis, so a
    spline fitted under endpoint constraints evaluates the same way as any
    other.
    """

    knots: np.ndarray
    coefficients: np.ndarray
    df: int
    constrained_endpoints: tuple[float, float] | None = None

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        coef = np.asarray(self.coefficients, dtype=float)
        if len(knots) != self.df - 2 or len(coef) != self.df:
            raise PreconditionError(
                f"df={self.df} needs {self.df - 2} interior knots and {self.df} coefficients, "
                f"got {len(knots)} and {len(coef)}"
            )
        if len(knots) and (np.any(np.diff(knots) <= 0) or knots[0] <= 0 or knots[-1] >= 1):
            raise PreconditionError("interior knots must be strictly increasing inside (0, 1)")
        knots.setflags(write=False)
        coef.setflags(write=False)
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "coefficients", coef)
        if self.constrained_endpoints is not None:
            a, b = self.constrained_endpoints
            object.__setattr__(self, "constrained_endpoints", (float(a), float(b)))

    def __call__(self, t) -> np.ndarray:
        t = _check_domain(t)
        return natural_basis(t, self.knots) @ self.coefficients

    def deriv(self, t) -> np.ndarray:
        t = _check_domain(t)
        return natural_basis(t, self.knots, deriv=1) @ self.coefficients

    @classmethod
    def constant(cls, value: float, df: int = 2) -> "CoordinateSpline":
        knots = np.linspace(0, 1, df)[1:-1]
        coef = np.zeros(df)
        coef[0] = value
        return cls(knots, coef, df)


def _solve_normal_equations(X, y, w):
    Xw = X * w[:, None]
    XtX = X.T @ Xw
    Xty = Xw.T @ y
    try:
        c, low = linalg.cho_factor(XtX, lower=True, check_finite=False)
        beta = linalg.cho_solve((c, low), Xty, check_finite=False)
    except linalg.LinAlgError:
        scale = max(np.trace(XtX) / len(XtX), 1.0)
        c, low = linalg.cho_factor(XtX + TOL.ridge * scale * np.eye(len(XtX)), lower=True)
        beta = linalg.cho_solve((c, low), Xty)
    if not np.all(np.isfinite(beta)):
        raise DegenerateFitError("spline normal equations produced non-finite coefficients")
    return beta


def fit_spline(ts, ys, weights=None, df: int = 4, endpoint_constraint=None, knots=None) -> CoordinateSpline:
    """Weighted least-squares cubic regression spline with ``df`` degrees of freedom.

    Parameters
    ----------
    ts : array_like
        Latent times in ``[0, 1]``.
    ys : array_like
        Observed coordinate values.
    weights : array_like, optional
        Nonnegative observation weights (default all ones).
    df : int
        Degrees of freedom ``K >= 2``.
    endpoint_constraint : (float, float), optional
        Values the spline must take at ``t = 0`` and ``t = 1``.
    knots : array_like, optional
        Interior knots to use instead of the quantile placement.

    Raises
    ------
    InsufficientDataError
        Fewer than ``df + 2`` observations or distinct latent times.
    DegenerateFitError
        All latent times (with positive weight) coincide.
    """
    ts = _check_domain(np.asarray(ts, dtype=float).reshape(-1))
    ys = np.asarray(ys, dtype=float).reshape(-1)
    w = np.ones_like(ts) if weights is None else np.asarray(weights, dtype=float).reshape(-1)
    if not (len(ts) == len(ys) == len(w)):
        raise PreconditionError("ts, ys and weights must have equal length")
    if df < 2:
        raise PreconditionError("df must be at least 2")
    if np.any(w < 0) or not np.any(w > 0):
        raise PreconditionError("weights must be nonnegative and not all zero")
    if len(ts) < df + 2:
        raise InsufficientDataError(f"{len(ts)} observations cannot support df={df} (need at least {df + 2})")
    distinct = np.unique(ts[w > 0])
    if len(distinct) < 2:
        raise DegenerateFitError("all latent times coincide; the spline design is rank deficient")
    n_free = df if endpoint_constraint is None else df - 2
    if len(distinct) < n_free:
        raise InsufficientDataError(f"only {len(distinct)} distinct latent times for {n_free} free coefficients")

    if knots is None:
        knots = quantile_knots(ts, df, w)
    knots = np.asarray(knots, dtype=float)

    if endpoint_constraint is None:
        coef = _solve_normal_equations(natural_basis(ts, knots), ys, w)
        return CoordinateSpline(knots, coef, df)

    a, b = (float(v) for v in endpoint_constraint)
    chord = a + (b - a) * ts
    if df == 2:
        return CoordinateSpline(knots, np.array([a, b - a]), df, (a, b))
    N = natural_basis(ts, knots)[:, 2:]
    N1 = natural_basis(np.array([1.0]), knots)[0, 2:]
    M = N - np.outer(ts, N1)  # every column vanishes at t = 0 and t = 1
    c = _solve_normal_equations(M, ys - chord, w)
    coef = np.concatenate([[a, (b - a) - c @ N1], c])
    return CoordinateSpline(knots, coef, df, (a, b))


def eval_spline(s: CoordinateSpline, t: float) -> float:
    return float(s(np.array([t]))[0])


def eval_spline_deriv(s: CoordinateSpline, t: float) -> float:
    return float(s.deriv(np.array([t]))[0])


def weighted_rss(s: CoordinateSpline, ts, ys, weights=None) -> float:
    ts = np.asarray(ts, dtype=float)
    r = np.asarray(ys, dtype=float) - s(ts)
    w = np.ones_like(r) if weights is None else np.asarray(weights, dtype=float)
    return float(np.sum(w * r * r))
