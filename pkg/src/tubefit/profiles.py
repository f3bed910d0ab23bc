"""Arc length along the centerline and scalar profiles along the tube."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import PointCloud
from .cross_section import CrossSection
from .errors import DomainError, InputError, PreconditionError

KINDS = ("sum", "area_normalized", "weighted_mean", "voxel_neighborhood", "slice")


def arc_length(curve, t, grid_resolution: int = 1000):
    """Chord-sum distance along ``curve`` from 0 to ``t`` on a uniform grid.

    Accepts a scalar or an array of ``t``. The partial cell ``[k/G, t]``
    contributes its own chord, so values are exact for straight pieces.
    """
    if grid_resolution < 100:
        raise PreconditionError("grid_resolution must be at least 100")
    ts = np.asarray(t, dtype=float)
    if np.any(ts < 0) or np.any(ts > 1):
        raise DomainError("t outside [0, 1]")
    G = int(grid_resolution)
    grid = np.linspace(0, 1, G + 1)
    F = curve.points(grid)
    cum = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(F, axis=0), axis=1))])
    flat = np.atleast_1d(ts).ravel()
    k = np.minimum(np.floor(flat * G).astype(int), G)
    tail = np.linalg.norm(curve.points(flat) - F[k], axis=1)
    out = (cum[k] + tail).reshape(ts.shape)
    return float(out) if out.ndim == 0 else out


def arc_length_integral(curve, t: float, n: int = 10_000) -> float:
    """Speed integral ``int_0^t ||f'(s)|| ds`` by the composite Simpson rule."""
    from scipy.integrate import simpson

    s = np.linspace(0.0, t, 2 * (n // 2) + 1)
    return float(simpson(np.linalg.norm(curve.derivatives(s), axis=1), x=s))


@dataclass(frozen=True)
class Profile:
    """Scalar values along the tube. Gaps hold ``nan``."""

    t0s: np.ndarray
    distances: np.ndarray
    values: np.ndarray
    kind: str
    normalized: bool = False

    def normalize(self) -> "Profile":
        """Divide by the maximum finite value."""
        v = np.asarray(self.values, dtype=float)
        top = np.nanmax(v) if np.any(np.isfinite(v)) else np.nan
        return Profile(self.t0s, self.distances, v / top, self.kind, True)

    def rows(self):
        for t, d, v in zip(self.t0s, self.distances, self.values):
            yield float(t), float(d), float(v)


def concentration_profile(tube, cloud: PointCloud, kind: str = "area_normalized", normalize: bool = False, values=None) -> Profile:
    """Per-section intensity summaries along the tube.

    ``sum`` adds the intensities of the window members, ``area_normalized``
    divides that by the ellipse area, ``weighted_mean`` uses the section's
    cosine weights. ``values`` overrides the per-point quantity (defaults
    to ``cloud.intensities``, or ``cloud.scalars`` for ``weighted_mean`` when
    the cloud has scalars).
    """
    if kind not in ("sum", "area_normalized", "weighted_mean"):
        raise PreconditionError(f"unknown profile kind {kind!r}")
    if values is None:
        values = cloud.scalars if (kind == "weighted_mean" and cloud.scalars is not None) else cloud.intensities
    if values is None:
        raise InputError(f"profile kind {kind!r} needs per-point intensities")
    C = np.asarray(values, dtype=float)
    t0s = tube.t0s
    out = np.full(len(t0s), np.nan)
    for i, s in enumerate(tube.sections):
        if not isinstance(s, CrossSection):
            continue
        c = C[s.member_indices]
        if kind == "sum":
            out[i] = c.sum()
        elif kind == "area_normalized":
            out[i] = c.sum() / s.area
        else:
            out[i] = s.weights @ c
    G = getattr(tube.curve, "grid_resolution", 1000)
    prof = Profile(t0s, arc_length(tube.curve, t0s, max(G, 100)), out, kind)
    return prof.normalize() if normalize else prof


def voxel_neighborhood_profile(curve, cloud: PointCloud, edge: float, n_points: int = 50, normalize: bool = False) -> Profile:
    """Sum of intensities inside an axis-aligned cube of side ``edge`` centred on ``f(t0)``."""
    if not edge > 0:
        raise PreconditionError("edge must be positive")
    C = cloud.intensities if cloud.intensities is not None else np.ones(len(cloud))
    t0s = np.linspace(0, 1, n_points)
    centers = curve.points(t0s)
    half = edge / 2.0
    vals = np.array([C[np.all(np.abs(cloud.points - c) <= half, axis=1)].sum() for c in centers])
    G = getattr(curve, "grid_resolution", 1000)
    prof = Profile(t0s, arc_length(curve, t0s, max(G, 100)), vals, "voxel_neighborhood")
    return prof.normalize() if normalize else prof


def slice_profile(cloud: PointCloud, axis: str = "z", window: float = 1.0, values=None) -> Profile:
    """Mean scalar per slab of width ``window`` along a cardinal axis.

    Slabs start at the smallest coordinate; ``distances`` are slab centres.
    """
    if not window > 0:
        raise PreconditionError("window must be positive")
    ax = "xyz".index(axis)
    if values is None:
        values = cloud.scalars if cloud.scalars is not None else cloud.intensities
    if values is None:
        raise InputError("slice profile needs per-point scalars or intensities")
    v = np.asarray(values, dtype=float)
    x = cloud.points[:, ax]
    lo = x.min()
    n = max(1, int(np.floor((x.max() - lo) / window)) + 1)
    slab = np.minimum(((x - lo) / window).astype(int), n - 1)
    sums = np.bincount(slab, weights=v, minlength=n)
    counts = np.bincount(slab, minlength=n)
    with np.errstate(invalid="ignore", divide="ignore"):
        means = np.where(counts > 0, sums / counts, np.nan)
    centers = lo + (np.arange(n) + 0.5) * window
    return Profile(np.full(n, np.nan), centers, means, "slice")
