"""Shared geometry: point clouds, rotations onto the z axis, ellipses."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, PreconditionError


@dataclass(frozen=True)
class Tolerances:
    """Geometric tolerances used across the package."""

    unit_norm: float = 1e-8
    rotation: float = 1e-10
    antipodal: float = 1e-9
    tangent_norm: float = 1e-10
    degenerate_eigenvalue: float = 1e-12
    knot_spacing: float = 1e-6
    ridge: float = 1e-10


TOL = Tolerances()


def as_points(points) -> np.ndarray:
    """Coerce ``points`` to a float ``(n, 3)`` array."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1 and arr.shape[0] == 3:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise PreconditionError(f"expected an (n, 3) array of points, got shape {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Observed image sample: 3D points with optional nonnegative intensities.

    Parameters
    ----------
    points : array_like, shape (n, 3)
    intensities : array_like, shape (n,), optional
    scalars : array_like, shape (n,), optional
        A coregistered per-point scalar (e.g. FA) used by profile code.
        Kept separate from ``intensities`` so curve weighting and the
        profiled quantity can differ.
    """

    points: np.ndarray
    intensities: np.ndarray | None = None
    scalars: np.ndarray | None = None

    def __post_init__(self):
        pts = as_points(self.points)
        if len(pts) == 0:
            raise PreconditionError("point cloud is empty")
        if not np.all(np.isfinite(pts)):
            raise PreconditionError("point coordinates must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        for name in ("intensities", "scalars"):
            val = getattr(self, name)
            if val is None:
                continue
            arr = np.asarray(val, dtype=float).reshape(-1)
            if arr.shape[0] != pts.shape[0]:
                raise PreconditionError(f"{name} length {arr.shape[0]} != number of points {pts.shape[0]}")
            if not np.all(np.isfinite(arr)):
                raise PreconditionError(f"{name} must be finite")
            if name == "intensities" and np.any(arr < 0):
                raise PreconditionError("intensities must be nonnegative")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self):
        return self.points.shape[0]

    def subset(self, indices) -> "PointCloud":
        idx = np.asarray(indices, dtype=int)
        return PointCloud(
            self.points[idx],
            None if self.intensities is None else self.intensities[idx],
            None if self.scalars is None else self.scalars[idx],
        )

    def transformed(self, rotation, translation) -> "PointCloud":
        """Apply ``p -> R p + b`` to every point; attributes are carried over."""
        R = np.asarray(rotation, dtype=float)
        b = np.asarray(translation, dtype=float)
        return PointCloud(self.points @ R.T + b, self.intensities, self.scalars)


def _skew(v):
    # batched cross-product matrices, v: (..., 3)
    z = np.zeros(v.shape[:-1])
    return np.stack(
        [
            np.stack([z, -v[..., 2], v[..., 1]], -1),
            np.stack([v[..., 2], z, -v[..., 0]], -1),
            np.stack([-v[..., 1], v[..., 0], z], -1),
        ],
        -2,
    )


def minimal_rotations_to_z(tangents) -> np.ndarray:
    """Vectorized :func:`minimal_rotation_to_z` over an ``(n, 3)`` array of unit vectors."""
    n = np.asarray(tangents, dtype=float)
    single = n.ndim == 1
    n = np.atleast_2d(n)
    norms = np.linalg.norm(n, axis=1)
    if np.any(np.abs(norms - 1.0) > TOL.unit_norm):
        raise PreconditionError("tangent must have unit norm (within 1e-8)")
    z = np.array([0.0, 0.0, 1.0])
    v = np.cross(n, z)
    c = n[:, 2]
    anti = c < -1.0 + TOL.antipodal
    denom = np.where(anti, 1.0, 1.0 + c)
    K = _skew(v)
    R = np.eye(3) + K + (K @ K) / denom[:, None, None]
    if np.any(anti):
        # half turn about x maps -z to +z
        R[anti] = np.diag([1.0, -1.0, -1.0])
    return R[0] if single else R


def minimal_rotation_to_z(tangent) -> np.ndarray:
    """Rotation taking the unit vector ``tangent`` onto ``(0, 0, 1)``.

    The rotation axis is ``tangent x z``, so the result is the smallest-angle
    rotation achieving the alignment. For tangents within 1e-9 of ``-z`` the
    half turn about the x axis is returned.
    """
    t = np.asarray(tangent, dtype=float)
    if t.shape != (3,):
        raise PreconditionError("tangent must be a 3-vector")
    return minimal_rotations_to_z(t)


def is_rotation(R, tol: float = TOL.rotation) -> bool:
    R = np.asarray(R, dtype=float)
    return bool(
        np.allclose(R.T @ R, np.eye(3), rtol=0, atol=tol)
        and abs(np.linalg.det(R) - 1.0) <= tol
    )


@dataclass(frozen=True)
class Ellipse2D:
    """Ellipse with semi-axes ``semi_major >= semi_minor > 0``.

    ``orientation`` is the angle of the major axis in ``[0, pi)``.
    """

    center: tuple[float, float]
    semi_major: float
    semi_minor: float
    orientation: float = 0.0

    def __post_init__(self):
        if not (self.semi_minor > 0 and self.semi_major >= self.semi_minor):
            raise DomainError(
                f"invalid ellipse axes A={self.semi_major!r}, B={self.semi_minor!r} (need A >= B > 0)"
            )
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "orientation", float(self.orientation) % np.pi)

    @property
    def eccentricity(self) -> float:
        A, B = self.semi_major, self.semi_minor
        return float(np.sqrt((A * A - B * B) / (A * A)))

    @property
    def area(self) -> float:
        return ellipse_area(self)

    def contains(self, x, y) -> np.ndarray:
        """Vectorized closed-set membership for coordinates ``x, y``."""
        x = np.asarray(x, dtype=float) - self.center[0]
        y = np.asarray(y, dtype=float) - self.center[1]
        c, s = np.cos(self.orientation), np.sin(self.orientation)
        u = c * x + s * y
        v = -s * x + c * y
        return (u / self.semi_major) ** 2 + (v / self.semi_minor) ** 2 <= 1.0

    def bbox(self):
        c, s = np.cos(self.orientation), np.sin(self.orientation)
        hx = np.hypot(self.semi_major * c, self.semi_minor * s)
        hy = np.hypot(self.semi_major * s, self.semi_minor * c)
        cx, cy = self.center
        return (cx - hx, cx + hx, cy - hy, cy + hy)

    @classmethod
    def from_covariance(cls, mu, sigma, scale: float) -> "Ellipse2D":
        """Ellipse ``{p : (p - mu)^T sigma^-1 (p - mu) <= scale}``."""
        lam, vec = np.linalg.eigh(np.asarray(sigma, dtype=float))
        lam_min, lam_max = max(lam[0], 0.0), max(lam[1], 0.0)
        major = vec[:, 1]
        angle = np.arctan2(major[1], major[0]) % np.pi
        return cls(
            (float(mu[0]), float(mu[1])),
            float(np.sqrt(scale * lam_max)),
            float(np.sqrt(scale * lam_min)),
            float(angle),
        )


def ellipse_area(e: Ellipse2D) -> float:
    return float(np.pi * e.semi_major * e.semi_minor)


@dataclass(frozen=True)
class ParametricCurve:
    """A curve given by callables, for use where a fitted curve is not needed.

    ``func`` maps an array of ``t`` to ``(len(t), 3)`` points; ``deriv`` gives
    the componentwise derivative in the same shape.
    """

    func: object
    deriv: object
    extra: dict = field(default_factory=dict)

    def points(self, t) -> np.ndarray:
        return np.asarray(self.func(np.atleast_1d(np.asarray(t, dtype=float))), dtype=float)

    def derivatives(self, t) -> np.ndarray:
        return np.asarray(self.deriv(np.atleast_1d(np.asarray(t, dtype=float))), dtype=float)


def helix(radius: float = 1.0, turns: float = 1.0, height: float = 1.0, phase: float = 0.0) -> ParametricCurve:
    """Circular helix ``(r cos(2 pi T t + p), r sin(2 pi T t + p), h t)`` on ``t in [0, 1]``."""
    w = 2 * np.pi * turns

    def f(t):
        return np.column_stack([radius * np.cos(w * t + phase), radius * np.sin(w * t + phase), height * t])

    def df(t):
        return np.column_stack(
            [-radius * w * np.sin(w * t + phase), radius * w * np.cos(w * t + phase), np.full_like(t, height)]
        )

    return ParametricCurve(f, df)


def segment(a, b) -> ParametricCurve:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return ParametricCurve(lambda t: a + np.outer(t, b - a), lambda t: np.tile(b - a, (len(t), 1)))
