"""Calibration and validation simulations.

* :func:`run_alpha_sim` - coverage of a true ellipse by the level-set
  estimate from noisy uniform samples, as a function of ``alpha``.
* :func:`run_shape_sim` - tube fits to stacked non-elliptical cross sections.
* :func:`generate_coil_phantom` / :func:`run_phantom_validation` - voxelwise
  validation on a helical tube phantom.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .core import Ellipse2D, PointCloud, helix
from .cross_section import level_set_scale
from .errors import DegenerateCovarianceError, DomainError, InputError, PreconditionError
from .principal_curve import CurveFitConfig, fit_principal_curve
from .tube import Lattice, TubeConfig, classify_alpha_grid, fit_tube


# -- regions -----------------------------------------------------------------

@dataclass(frozen=True)
class Region:
    """Planar region given by a vectorized indicator and a bounding box."""

    contains: object
    bbox: tuple  # (xmin, xmax, ymin, ymax)
    area: float
    name: str = "region"


def ellipse_region(A: float, B: float, center=(0.0, 0.0), orientation: float = 0.0) -> Region:
    e = Ellipse2D(center, A, B, orientation) if A >= B else Ellipse2D(center, B, A, orientation + np.pi / 2)
    return Region(e.contains, e.bbox(), e.area, "ellipse")


def circle_region(radius: float = 1.0) -> Region:
    return Region(lambda x, y: np.asarray(x) ** 2 + np.asarray(y) ** 2 <= radius**2,
                  (-radius, radius, -radius, radius), np.pi * radius**2, "circle")


def square_region(side: float = 2.0) -> Region:
    h = side / 2
    return Region(lambda x, y: (np.abs(x) <= h) & (np.abs(y) <= h), (-h, h, -h, h), side * side, "square")


def u_region(side: float = 2.0, notch_width: float = 1.0, notch_depth: float = 1.5) -> Region:
    """Square of ``side`` minus a centred notch open at the top (+y)."""
    h = side / 2

    def contains(x, y):
        x, y = np.asarray(x), np.asarray(y)
        sq = (np.abs(x) <= h) & (np.abs(y) <= h)
        notch = (np.abs(x) < notch_width / 2) & (y > h - notch_depth)
        return sq & ~notch

    return Region(contains, (-h, h, -h, h), side * side - notch_width * notch_depth, "u_shape")


SHAPES = {"square": square_region, "u_shape": u_region, "circle": circle_region}


def _raster(bbox, resolution):
    x0, x1, y0, y1 = bbox
    xs = x0 + (np.arange(resolution) + 0.5) * (x1 - x0) / resolution
    ys = y0 + (np.arange(resolution) + 0.5) * (y1 - y0) / resolution
    X, Y = np.meshgrid(xs, ys)
    return X, Y, (x1 - x0) * (y1 - y0) / resolution**2


def _union_bbox(a, b):
    return (min(a[0], b[0]), max(a[1], b[1]), min(a[2], b[2]), max(a[3], b[3]))


def region_overlap(G: Region, Ghat: Ellipse2D, resolution: int = 512):
    """``(TP, FP)`` areas of ``G & Ghat`` and ``~G & Ghat`` over the area of ``G``, by rasterization."""
    if resolution < 256:
        raise PreconditionError("resolution must be at least 256")
    X, Y, cell = _raster(_union_bbox(G.bbox, Ghat.bbox()), resolution)
    g = G.contains(X, Y)
    n_g = np.count_nonzero(g)
    if n_g == 0 or G.area <= 0:
        raise DomainError("true region has zero area")
    h = Ghat.contains(X, Y)
    return np.count_nonzero(g & h) / n_g, np.count_nonzero(~g & h) / n_g


def sample_uniform(region: Region, n: int, rng) -> np.ndarray:
    """``n`` points uniform in ``region`` by rejection from its bounding box."""
    x0, x1, y0, y1 = region.bbox
    out, have = [], 0
    while have < n:
        m = max(64, 2 * (n - have))
        xy = np.column_stack([rng.uniform(x0, x1, m), rng.uniform(y0, y1, m)])
        keep = xy[region.contains(xy[:, 0], xy[:, 1])]
        out.append(keep)
        have += len(keep)
    return np.concatenate(out)[:n]


# -- alpha calibration -------------------------------------------------------

DEFAULT_ALPHA_GRID = tuple(np.round(np.linspace(0.02, 0.96, 48), 4).tolist())


@dataclass(frozen=True)
class AlphaSimConfig:
    semi_major: float = 1.0
    semi_minor: float = 1.0
    sigma: float = 0.1
    n_points: int = 100
    n_replicates: int = 100
    alpha_grid: tuple = DEFAULT_ALPHA_GRID
    seed: int = 0
    resolution: int = 512

    def __post_init__(self):
        if not (self.semi_major >= self.semi_minor > 0):
            raise PreconditionError("need semi_major >= semi_minor > 0")
        if self.sigma < 0:
            raise PreconditionError("sigma must be nonnegative")
        if self.n_replicates < 1 or self.n_points < 3:
            raise PreconditionError("need n_replicates >= 1 and n_points >= 3")
        grid = tuple(float(a) for a in np.atleast_1d(self.alpha_grid))
        for a in grid:
            level_set_scale(a)
        object.__setattr__(self, "alpha_grid", grid)

    def to_dict(self):
        return {
            "semi_major": self.semi_major,
            "semi_minor": self.semi_minor,
            "sigma": self.sigma,
            "n_points": self.n_points,
            "n_replicates": self.n_replicates,
            "alpha_grid": list(self.alpha_grid),
            "seed": self.seed,
            "resolution": self.resolution,
        }


@dataclass(frozen=True)
class TPFPCurve:
    alpha_grid: np.ndarray
    tp: np.ndarray
    fp: np.ndarray
    tp_se: np.ndarray
    fp_se: np.ndarray
    n_used: int
    n_skipped: int = 0
    config: AlphaSimConfig | None = None

    def rows(self):
        for i, a in enumerate(self.alpha_grid):
            yield {
                "alpha": float(a),
                "tp_mean": float(self.tp[i]),
                "tp_se": float(self.tp_se[i]),
                "fp_mean": float(self.fp[i]),
                "fp_se": float(self.fp_se[i]),
                "n_replicates": self.n_used,
                "n_skipped": self.n_skipped,
            }


def _alpha_replicate(cfg: AlphaSimConfig, seq) -> np.ndarray | None:
    rng = np.random.default_rng(seq)
    G = ellipse_region(cfg.semi_major, cfg.semi_minor)
    pts = sample_uniform(G, cfg.n_points, rng)
    obs = pts + rng.normal(0.0, cfg.sigma, pts.shape) if cfg.sigma > 0 else pts
    mu = obs.mean(axis=0)
    D = obs - mu
    S = D.T @ D / len(obs)
    lam = np.linalg.eigvalsh(S)
    if lam[0] < 1e-12:
        return None
    scales = np.array([level_set_scale(a) for a in cfg.alpha_grid])
    # one raster covers G and the largest estimate
    big = Ellipse2D.from_covariance(mu, S, scales.max())
    X, Y, _ = _raster(_union_bbox(G.bbox, big.bbox()), cfg.resolution)
    g = G.contains(X, Y)
    n_g = np.count_nonzero(g)
    Sinv = np.linalg.inv(S)
    dx, dy = X - mu[0], Y - mu[1]
    m2 = Sinv[0, 0] * dx * dx + 2 * Sinv[0, 1] * dx * dy + Sinv[1, 1] * dy * dy
    m2g, m2n = m2[g], m2[~g]
    out = np.empty((len(scales), 2))
    for k, c in enumerate(scales):
        out[k] = np.count_nonzero(m2g <= c) / n_g, np.count_nonzero(m2n <= c) / n_g
    return out


def run_alpha_sim(config: AlphaSimConfig, threads: int = 1) -> TPFPCurve:
    """Monte Carlo TP/FP curves for the level-set ellipse estimate.

    Each replicate samples ``n_points`` uniformly inside the true ellipse,
    adds isotropic normal noise, fits an equal-weight bivariate normal and
    scores the level sets for every ``alpha`` in the grid. Replicate streams
    are spawned from ``seed``, so results do not depend on ``threads``.
    """
    seqs = np.random.SeedSequence(config.seed).spawn(config.n_replicates)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            reps = list(pool.map(lambda s: _alpha_replicate(config, s), seqs))
    else:
        reps = [_alpha_replicate(config, s) for s in seqs]
    good = [r for r in reps if r is not None]
    if not good:
        raise DegenerateCovarianceError("every replicate produced a degenerate covariance")
    arr = np.stack(good)
    n = len(good)
    se = arr.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros(arr.shape[1:])
    return TPFPCurve(
        np.array(config.alpha_grid),
        arr[:, :, 0].mean(axis=0),
        arr[:, :, 1].mean(axis=0),
        se[:, 0],
        se[:, 1],
        n,
        len(reps) - n,
        config,
    )


# -- shape misspecification ---------------------------------------------------

@dataclass(frozen=True)
class ShapeSimResult:
    shape: str
    alpha: float
    tp: float
    fp: float
    n_gaps: int
    seed: int


def stacked_shape_cloud(shape: str, n_layers: int = 50, points_per_layer: int = 400, seed: int = 0) -> PointCloud:
    """Uniform points in ``shape`` on each of ``n_layers`` planes ``z = 0, 1, ...``."""
    if shape not in SHAPES:
        raise PreconditionError(f"unknown shape {shape!r}; choose from {sorted(SHAPES)}")
    region = SHAPES[shape]()
    rng = np.random.default_rng(seed)
    layers = [
        np.column_stack([sample_uniform(region, points_per_layer, rng), np.full(points_per_layer, float(z))])
        for z in range(n_layers)
    ]
    return PointCloud(np.concatenate(layers))


def run_shape_sim(
    shape: str,
    alpha: float = 0.12,
    seed: int = 0,
    n_layers: int = 50,
    points_per_layer: int = 400,
    t_r: float = 0.1,
    final_df: int = 4,
    pitch: float = 0.05,
) -> ShapeSimResult:
    """Fit a tube to a straight stack of a non-elliptical cross section and score it.

    Scoring is on a lattice with in-plane spacing ``pitch`` at every layer;
    the truth is the shape on each layer.
    """
    cloud = stacked_shape_cloud(shape, n_layers, points_per_layer, seed)
    top = float(n_layers - 1)
    curve = fit_principal_curve(cloud, CurveFitConfig(((0, 0, 0), (0, 0, top)), final_df, seed=seed))
    tube = fit_tube(curve, cloud, TubeConfig(50, t_r, alpha, seed))
    region = SHAPES[shape]()
    half = 2.0  # shapes fit in [-1, 1]^2; leave room for over-coverage
    n = int(round(2 * half / pitch)) + 1
    lattice = Lattice((-half, -half, 0.0), (pitch, pitch, 1.0), (n, n, n_layers))
    P = lattice.points()
    truth = region.contains(P[:, 0], P[:, 1])
    res = classify_alpha_grid(tube, truth, lattice, [alpha])[0]
    return ShapeSimResult(shape, alpha, res.true_positive_rate, res.false_positive_rate, len(tube.gaps), seed)


# -- straight cylinders ---------------------------------------------------------

def generate_cylinder_cloud(
    radius: float = 1.0,
    length: float = 10.0,
    n_points: int = 20_000,
    seed: int = 0,
    step_radius: float | None = None,
    intensity: float | None = None,
) -> PointCloud:
    """Points uniform in volume inside a z-aligned cylinder from ``z = 0`` to ``length``.

    With ``step_radius`` the radius switches from ``radius`` to
    ``step_radius`` at ``length / 2`` while the point density per unit volume
    stays constant. ``intensity`` attaches a constant intensity.
    """
    rng = np.random.default_rng(seed)
    r_max = max(radius, step_radius or 0.0)

    def inside(p):
        lim = np.full(len(p), radius) if step_radius is None else np.where(p[:, 2] < length / 2, radius, step_radius)
        return p[:, 0] ** 2 + p[:, 1] ** 2 <= lim**2

    out, have = [], 0
    while have < n_points:
        m = 2 * (n_points - have) + 64
        p = np.column_stack([rng.uniform(-r_max, r_max, (m, 2)), rng.uniform(0, length, m)])
        keep = p[inside(p)]
        out.append(keep)
        have += len(keep)
    pts = np.concatenate(out)[:n_points]
    pts = pts[np.argsort(pts[:, 2], kind="stable")]
    intens = None if intensity is None else np.full(n_points, float(intensity))
    return PointCloud(pts, intens)


# -- coil phantom -------------------------------------------------------------

@dataclass(frozen=True)
class PhantomConfig:
    """Helical tube phantom.

    ``tube_radius`` may be a pair ``(start, end)`` for a linear ramp.
    Noise ``"poisson"`` blurs the truth indicator by ``blur`` voxels, draws
    Poisson counts with mean ``mean_level`` inside the structure and keeps
    voxels whose count reaches ``threshold_fraction * mean_level``; lower
    ``mean_level`` is noisier.
    """

    coil_radius: float = 10.0
    tube_radius: object = 3.0
    turns: float = 1.5
    height: float = 40.0
    pitch: float = 0.5
    noise: str = "none"
    mean_level: float = 20.0
    blur: float = 1.0
    threshold_fraction: float = 0.5
    sample_size: int = 1000
    seed: int = 0

    def __post_init__(self):
        r = np.atleast_1d(np.asarray(self.tube_radius, dtype=float))
        if r.size not in (1, 2) or np.any(r < 0):
            raise PreconditionError("tube_radius must be a nonnegative number or a (start, end) pair")
        if self.coil_radius <= 0 or self.height <= 0 or self.turns <= 0 or self.pitch <= 0:
            raise PreconditionError("coil geometry and pitch must be positive")
        if self.noise not in ("none", "poisson"):
            raise PreconditionError("noise must be 'none' or 'poisson'")
        if self.noise == "poisson" and self.mean_level <= 0:
            raise PreconditionError("mean_level must be positive")
        if self.sample_size < 1:
            raise PreconditionError("sample_size must be positive")

    @property
    def radii(self) -> tuple[float, float]:
        r = np.atleast_1d(np.asarray(self.tube_radius, dtype=float))
        return (float(r[0]), float(r[-1]))

    def centerline(self):
        return helix(self.coil_radius, self.turns, self.height)

    def to_dict(self):
        return {
            "coil_radius": self.coil_radius,
            "tube_radius": list(self.radii),
            "turns": self.turns,
            "height": self.height,
            "pitch": self.pitch,
            "noise": self.noise,
            "mean_level": self.mean_level,
            "blur": self.blur,
            "threshold_fraction": self.threshold_fraction,
            "sample_size": self.sample_size,
            "seed": self.seed,
        }


@dataclass(frozen=True, eq=False)
class Phantom:
    truth: np.ndarray  # boolean, lattice shape
    lattice: Lattice
    cloud: PointCloud
    config: PhantomConfig
    image: np.ndarray | None = None

    @property
    def endpoints(self):
        c = self.config.centerline()
        return tuple(tuple(p) for p in c.points([0.0, 1.0]).tolist())


def _helix_truth(cfg: PhantomConfig, lattice: Lattice, n_dense: int = 40_000) -> np.ndarray:
    c = cfg.centerline()
    s = np.linspace(0, 1, n_dense)
    H = c.points(s)
    P = lattice.points()
    r0, r1 = cfg.radii
    reach = max(r0, r1, cfg.pitch) * 1.01
    dist, idx = cKDTree(H).query(P, distance_upper_bound=reach)
    near = np.isfinite(dist)
    idx = np.where(near, idx, 0)
    radius = r0 + (r1 - r0) * s[idx]
    inside = near & (dist <= radius)
    # flat end caps: drop points lying beyond either end plane
    t0 = c.derivatives([0.0])[0]
    t1 = c.derivatives([1.0])[0]
    before = (idx == 0) & ((P - H[0]) @ t0 < -1e-9)
    after = (idx == n_dense - 1) & ((P - H[-1]) @ t1 > 1e-9)
    inside &= ~(before | after)
    if max(r0, r1) == 0:
        # zero radius: keep the voxels the centerline passes through
        inside |= near & (dist <= cfg.pitch / 2)
    return inside.reshape(lattice.shape)


def generate_coil_phantom(config: PhantomConfig) -> Phantom:
    """Voxelized helical tube plus a sampled observation cloud."""
    c = config.centerline()
    H = c.points(np.linspace(0, 1, 2000))
    pad = max(config.radii) + 2 * config.blur + 4 * config.pitch
    lattice = Lattice.bounding(H, config.pitch, pad)
    truth = _helix_truth(config, lattice)
    if not truth.any():
        raise DomainError("phantom truth set is empty; increase tube_radius or decrease pitch")
    rng = np.random.default_rng(config.seed)
    P = lattice.points()

    if config.noise == "none":
        candidates = np.flatnonzero(truth.ravel())
        image = None
        intens_all = np.ones(lattice.size)
    else:
        expected = config.mean_level * ndimage.gaussian_filter(truth.astype(float), config.blur / config.pitch)
        counts = rng.poisson(expected).astype(float)
        image = counts
        intens_all = counts.ravel()
        candidates = np.flatnonzero(counts.ravel() >= config.threshold_fraction * config.mean_level)
        if len(candidates) == 0:
            raise InputError("no voxels survive the histogram threshold")
    m = min(config.sample_size, len(candidates))
    pick = np.sort(rng.choice(candidates, size=m, replace=False))
    cloud = PointCloud(P[pick], intens_all[pick])
    return Phantom(truth, lattice, cloud, config, image)


@dataclass(frozen=True, eq=False)
class PhantomValidation:
    phantom: Phantom
    tube: object
    results: list  # ClassificationResult per alpha


def run_phantom_validation(
    config: PhantomConfig,
    alpha_grid=(0.3, 0.25, 0.2, 0.15, 0.1, 0.05),
    final_df: int = 10,
    df_schedule=None,
    t_r: float = 0.1,
    n_sections: int = 50,
    intensity_exponent: float | None = 0.0,
) -> PhantomValidation:
    """Fit curve and tube to a sampled phantom and classify every lattice voxel per ``alpha``."""
    ph = generate_coil_phantom(config)
    curve_cfg = CurveFitConfig(
        ph.endpoints, final_df, df_schedule, intensity_exponent=intensity_exponent, seed=config.seed
    )
    curve = fit_principal_curve(ph.cloud, curve_cfg)
    tube = fit_tube(curve, ph.cloud, TubeConfig(n_sections, t_r, float(alpha_grid[0]), config.seed))
    results = classify_alpha_grid(tube, ph.truth, ph.lattice, alpha_grid)
    return PhantomValidation(ph, tube, results)


def boundary_distance(truth: np.ndarray) -> np.ndarray:
    """Distance (in voxels) from each voxel to the truth boundary, inside or out."""
    inside = ndimage.distance_transform_edt(truth)
    outside = ndimage.distance_transform_edt(~truth)
    return np.where(truth, inside, outside)
