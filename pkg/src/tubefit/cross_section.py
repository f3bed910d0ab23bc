"""One tube cross section: t-window, local-linearization projection, weighted
bivariate normal and its level-set ellipse."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import TOL, Ellipse2D, PointCloud, as_points, minimal_rotations_to_z
from .errors import (
    DegenerateCovarianceError,
    DegenerateWeightsError,
    DomainError,
    EmptyNeighborhoodError,
    PreconditionError,
)
from .principal_curve import assign_latent_times, curve_point, curve_tangents


def t_window(latent_times, t0: float, t_r: float) -> np.ndarray:
    """Indices ``i`` with ``|t0 - t_i| < t_r``, in increasing order."""
    if not t_r > 0:
        raise PreconditionError("t_r must be positive")
    times = np.asarray(latent_times, dtype=float)
    idx = np.flatnonzero(np.abs(t0 - times) < t_r)
    if len(idx) == 0:
        raise EmptyNeighborhoodError(f"no points within t_r={t_r} of t0={t0}")
    return idx


def local_coordinates(points, times, curve) -> np.ndarray:
    """Rotate each ``P_i - f(t_i)`` by the minimal rotation taking the tangent at ``t_i`` to z.

    Returns ``(n, 3)``; the first two columns are the in-plane coordinates and
    the third is the residual offset along the tangent, which is close to zero
    whenever ``t_i`` is the foot of ``P_i`` on the curve.
    """
    P = as_points(points)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    R = minimal_rotations_to_z(curve_tangents(curve, times))
    d = P - curve.points(times)
    return np.einsum("nij,nj->ni", R, d)


def project_to_plane(point, t_point: float, curve) -> np.ndarray:
    """In-plane coordinates of ``point`` relative to its foot ``f(t_point)``.

    Distance and direction from the centerline are preserved, so stacking
    points projected at different ``t`` overlays their feet at the origin.
    """
    return local_coordinates(point, [t_point], curve)[0, :2]


def project_points(points, times, curve) -> np.ndarray:
    """Vectorized :func:`project_to_plane`."""
    return local_coordinates(points, times, curve)[:, :2]


def orthogonal_projection(points, t0: float, curve) -> np.ndarray:
    """Conventional projection: nearest point on the single plane normal to the curve at ``t0``.

    Expressed in the same 2D frame as :func:`project_to_plane`. Kept for
    comparison; on curved centerlines it pulls points toward the inside of
    the bend.
    """
    P = as_points(points)
    R = minimal_rotations_to_z(curve_tangents(curve, [t0]))[0]
    return ((P - curve.points([t0])[0]) @ R.T)[:, :2]


def cosine_weights(window_times, t0: float, r: float) -> np.ndarray:
    """Normalized weights proportional to ``cos((t - t0) pi / r) + 1``."""
    if not r > 0:
        raise PreconditionError("r must be positive")
    dt = np.asarray(window_times, dtype=float) - t0
    if np.any(np.abs(dt) >= r):
        raise PreconditionError("all window times must satisfy |t - t0| < r")
    raw = np.cos(dt * np.pi / r) + 1.0
    total = raw.sum()
    if not total > 0:
        raise DegenerateWeightsError("all window weights are zero")
    return raw / total


def weighted_gaussian(points2d, weights):
    """Weighted mean and (biased) weighted covariance of 2D points."""
    X = np.asarray(points2d, dtype=float).reshape(-1, 2)
    w = np.asarray(weights, dtype=float).reshape(-1)
    if len(w) != len(X):
        raise PreconditionError("points and weights differ in length")
    if np.count_nonzero(w > 0) < 3:
        raise PreconditionError("need at least 3 points with nonzero weight")
    if abs(w.sum() - 1.0) > 1e-9:
        raise PreconditionError("weights must sum to 1")
    mu = w @ X
    D = X - mu
    sigma = (D * w[:, None]).T @ D
    sigma = 0.5 * (sigma + sigma.T)
    lam = np.linalg.eigvalsh(sigma)
    if lam[0] < TOL.degenerate_eigenvalue:
        raise DegenerateCovarianceError(f"covariance eigenvalue {lam[0]:.3g} below {TOL.degenerate_eigenvalue:g}")
    return mu, sigma


def level_set_scale(alpha: float) -> float:
    """Squared Mahalanobis radius enclosing normal mass ``1 - alpha``: ``-2 ln(alpha)``."""
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha={alpha!r} outside (0, 1)")
    return float(-2.0 * np.log(alpha))


@dataclass(frozen=True, eq=False)
class CrossSection:
    """Estimated tube slice at latent time ``t0``."""

    t0: float
    center: np.ndarray
    rotation: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    alpha: float
    member_indices: np.ndarray
    weights: np.ndarray
    ellipse: Ellipse2D = field(init=False)

    def __post_init__(self):
        for name in ("center", "rotation", "mu", "sigma", "member_indices", "weights"):
            arr = np.array(getattr(self, name), dtype=int if name == "member_indices" else float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "ellipse", Ellipse2D.from_covariance(self.mu, self.sigma, self.scale))

    @property
    def scale(self) -> float:
        return level_set_scale(self.alpha)

    @property
    def area(self) -> float:
        return self.ellipse.area

    def with_alpha(self, alpha: float) -> "CrossSection":
        return CrossSection(
            self.t0, self.center, self.rotation, self.mu, self.sigma, alpha, self.member_indices, self.weights
        )

    def mahalanobis2(self, points2d) -> np.ndarray:
        D = np.asarray(points2d, dtype=float).reshape(-1, 2) - self.mu
        return np.einsum("ni,ij,nj->n", D, np.linalg.inv(self.sigma), D)


def fit_cross_section(curve, cloud: PointCloud, t0: float, t_r: float, alpha: float, latent_times=None) -> CrossSection:
    """Estimate the tube slice at ``t0``.

    ``latent_times`` are the cloud's latent times on ``curve``; they are
    recomputed by grid search when omitted. The cosine-weight half width
    equals ``t_r``.
    """
    level_set_scale(alpha)
    if latent_times is None:
        latent_times = assign_latent_times(curve, cloud, getattr(curve, "grid_resolution", 1000))
    times = np.asarray(latent_times, dtype=float)
    idx = t_window(times, t0, t_r)
    w = cosine_weights(times[idx], t0, t_r)
    if np.count_nonzero(w > 0) < 3:
        raise EmptyNeighborhoodError(f"fewer than 3 weighted points in the window at t0={t0:.6g}")
    P2 = project_points(cloud.points[idx], times[idx], curve)
    try:
        mu, sigma = weighted_gaussian(P2, w)
    except DegenerateCovarianceError as exc:
        raise DegenerateCovarianceError(str(exc), t0=t0) from None
    R = minimal_rotations_to_z(curve_tangents(curve, [t0]))[0]
    return CrossSection(float(t0), curve_point(curve, t0), R, mu, sigma, float(alpha), idx, w)


def ellipse_boundary_2d(cs: CrossSection, n_boundary: int) -> np.ndarray:
    """Boundary points in the section plane at polar angles ``2 pi k / n`` about ``mu``.

    Sampling by frame angle (rather than the ellipse's own parameter) keeps
    vertex ``k`` of neighbouring rings pointing the same way.
    """
    theta = 2 * np.pi * np.arange(n_boundary) / n_boundary
    u = np.column_stack([np.cos(theta), np.sin(theta)])
    q = np.einsum("ni,ij,nj->n", u, np.linalg.inv(cs.sigma), u)
    rho = np.sqrt(cs.scale / q)
    return cs.mu + u * rho[:, None]


def embed_ellipse(cs: CrossSection, n_boundary: int) -> np.ndarray:
    """Map ``n_boundary`` ellipse boundary points back into 3D."""
    B = ellipse_boundary_2d(cs, n_boundary)
    local = np.column_stack([B, np.zeros(len(B))])
    return cs.center + local @ cs.rotation
