"""Tubes: cross sections along a centerline, membership, validation, meshing."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import PointCloud, as_points
from .cross_section import (
    CrossSection,
    embed_ellipse,
    fit_cross_section,
    level_set_scale,
    local_coordinates,
)
from .errors import DomainError, ExportError, PreconditionError, TubeFitError, TubeFitFailedError
from .principal_curve import assign_latent_times


@dataclass(frozen=True)
class TubeConfig:
    n_sections: int = 50
    t_r: float = 0.1
    alpha: float = 0.12
    seed: int | None = None

    def __post_init__(self):
        if self.n_sections < 1:
            raise PreconditionError("n_sections must be positive")
        if not self.t_r > 0:
            raise PreconditionError("t_r must be positive")
        level_set_scale(self.alpha)

    def to_dict(self):
        return {"n_sections": self.n_sections, "t_r": self.t_r, "alpha": self.alpha, "seed": self.seed}


@dataclass(frozen=True)
class SectionGap:
    """A starting point where no cross section could be estimated."""

    t0: float
    error: str


@dataclass(frozen=True, eq=False)
class Tube:
    curve: object
    sections: tuple
    config: TubeConfig = field(default_factory=TubeConfig)

    def __post_init__(self):
        object.__setattr__(self, "sections", tuple(self.sections))
        t0s = [s.t0 for s in self.sections]
        if any(b <= a for a, b in zip(t0s, t0s[1:])):
            raise PreconditionError("sections must be strictly increasing in t0")

    @property
    def t0s(self) -> np.ndarray:
        return np.array([s.t0 for s in self.sections])

    @property
    def valid_sections(self) -> list[CrossSection]:
        return [s for s in self.sections if isinstance(s, CrossSection)]

    @property
    def gaps(self) -> list[SectionGap]:
        return [s for s in self.sections if isinstance(s, SectionGap)]

    def with_alpha(self, alpha: float) -> "Tube":
        """Same centerline and Gaussian fits, level set re-drawn at ``alpha``."""
        cfg = TubeConfig(self.config.n_sections, self.config.t_r, alpha, self.config.seed)
        secs = [s.with_alpha(alpha) if isinstance(s, CrossSection) else s for s in self.sections]
        return Tube(self.curve, secs, cfg)


def fit_tube(curve, cloud: PointCloud, config: TubeConfig | None = None, latent_times=None) -> Tube:
    """Cross sections at ``n_sections`` equally spaced starting times in ``[0, 1]``.

    Failed sections become :class:`SectionGap` entries. Raises
    :class:`TubeFitFailedError` when more than half fail.
    """
    config = config or TubeConfig()
    if latent_times is None:
        latent_times = assign_latent_times(curve, cloud, getattr(curve, "grid_resolution", 1000))
    sections = []
    for t0 in np.linspace(0.0, 1.0, config.n_sections):
        try:
            sections.append(fit_cross_section(curve, cloud, float(t0), config.t_r, config.alpha, latent_times))
        except TubeFitError as exc:
            sections.append(SectionGap(float(t0), f"{type(exc).__name__}: {exc}"))
    n_gaps = sum(isinstance(s, SectionGap) for s in sections)
    if n_gaps * 2 > len(sections):
        raise TubeFitFailedError(f"{n_gaps} of {len(sections)} cross sections failed")
    return Tube(curve, sections, config)


def _grid_chord(curve) -> float:
    G = getattr(curve, "grid_resolution", 1000)
    F = curve.points(np.linspace(0, 1, G + 1))
    return float(np.linalg.norm(np.diff(F, axis=0), axis=1).max())


@dataclass(frozen=True)
class TubeCoordinates:
    """Per-point data needed to test membership at any level ``alpha``."""

    times: np.ndarray
    section: np.ndarray  # index into tube.sections, -1 if past an end cap
    mahalanobis2: np.ndarray


def tube_coordinates(tube: Tube, points) -> TubeCoordinates:
    """Locate points relative to the tube.

    Each point is projected through its own foot on the curve (the same
    local linearization used to fit the sections) and compared with the
    valid section whose ``t0`` is nearest its latent time. Points whose foot
    is clamped to an end of the curve and that lie beyond the end plane by
    more than one grid chord are marked outside.
    """
    P = as_points(points)
    valid = [i for i, s in enumerate(tube.sections) if isinstance(s, CrossSection)]
    if not valid:
        raise PreconditionError("tube has no valid sections")
    curve = tube.curve
    times = assign_latent_times(curve, P, getattr(curve, "grid_resolution", 1000))
    local = local_coordinates(P, times, curve)

    vt = np.array([tube.sections[i].t0 for i in valid])
    pos = np.clip(np.searchsorted(vt, times), 1, max(len(vt) - 1, 1))
    if len(vt) == 1:
        pick = np.zeros(len(P), dtype=int)
    else:
        left, right = vt[pos - 1], vt[pos]
        # ties go to the smaller t0
        pick = np.where(times - left <= right - times, pos - 1, pos)
    sec = np.asarray(valid)[pick]

    m2 = np.empty(len(P))
    for j, i in enumerate(valid):
        sel = pick == j
        if np.any(sel):
            m2[sel] = tube.sections[i].mahalanobis2(local[sel, :2])

    cap = _grid_chord(curve)
    beyond = ((times == 0.0) & (local[:, 2] < -cap)) | ((times == 1.0) & (local[:, 2] > cap))
    sec = np.where(beyond, -1, sec)
    m2 = np.where(beyond, np.inf, m2)
    return TubeCoordinates(times, sec, m2)


def points_in_tube(tube: Tube, points, alpha: float | None = None) -> np.ndarray:
    alpha = tube.config.alpha if alpha is None else alpha
    return tube_coordinates(tube, points).mahalanobis2 <= level_set_scale(alpha)


def point_in_tube(tube: Tube, p) -> bool:
    return bool(points_in_tube(tube, np.asarray(p, dtype=float).reshape(1, 3))[0])


@dataclass(frozen=True)
class Lattice:
    """Regular grid ``origin + pitch * index`` with C-ordered ``shape``."""

    origin: tuple
    pitch: tuple
    shape: tuple

    def __post_init__(self):
        pitch = np.broadcast_to(np.asarray(self.pitch, dtype=float), (3,))
        if np.any(pitch <= 0):
            raise PreconditionError("lattice pitch must be positive")
        object.__setattr__(self, "pitch", tuple(pitch.tolist()))
        object.__setattr__(self, "origin", tuple(float(v) for v in self.origin))
        object.__setattr__(self, "shape", tuple(int(v) for v in self.shape))

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def points(self) -> np.ndarray:
        axes = [o + p * np.arange(n) for o, p, n in zip(self.origin, self.pitch, self.shape)]
        X, Y, Z = np.meshgrid(*axes, indexing="ij")
        return np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])

    @classmethod
    def bounding(cls, points, pitch: float, pad: float = 0.0) -> "Lattice":
        P = as_points(points)
        lo = np.floor((P.min(axis=0) - pad) / pitch) * pitch
        hi = np.ceil((P.max(axis=0) + pad) / pitch) * pitch
        shape = np.round((hi - lo) / pitch).astype(int) + 1
        return cls(tuple(lo), (pitch,) * 3, tuple(shape))


@dataclass(frozen=True)
class ClassificationResult:
    """Voxelwise tube-versus-truth rates, both normalized by the truth size."""

    true_positive_rate: float
    false_positive_rate: float
    counts: tuple  # (TP, FP, FN, TN)
    alpha: float | None = None
    per_section: list | None = None  # (t0, TP, FP) per section

    def as_row(self) -> dict:
        tp, fp, fn, tn = self.counts
        return {
            "alpha": self.alpha,
            "one_minus_alpha": None if self.alpha is None else 1.0 - self.alpha,
            "tp_rate": self.true_positive_rate,
            "fp_rate": self.false_positive_rate,
            "tp": tp,
            "fp": fp,
            "fn": fn,
            "tn": tn,
        }


def _truth_mask(truth, lattice: Lattice) -> np.ndarray:
    mask = np.asarray(truth)
    if mask.dtype == bool and mask.size == lattice.size:
        return mask.reshape(-1)
    # otherwise interpret as an (n, 3) integer index array
    idx = np.asarray(truth, dtype=int).reshape(-1, 3)
    out = np.zeros(lattice.shape, dtype=bool)
    if len(idx):
        out[idx[:, 0], idx[:, 1], idx[:, 2]] = True
    return out.reshape(-1)


def classify_alpha_grid(tube: Tube, truth, lattice: Lattice, alphas) -> list[ClassificationResult]:
    """Classify every lattice voxel for several levels, reusing one projection pass."""
    mask = _truth_mask(truth, lattice)
    n_truth = int(mask.sum())
    if n_truth == 0:
        raise DomainError("truth set is empty")
    coords = tube_coordinates(tube, lattice.points())
    out = []
    for alpha in alphas:
        inside = coords.mahalanobis2 <= level_set_scale(alpha)
        tp = int(np.sum(inside & mask))
        fp = int(np.sum(inside & ~mask))
        fn = n_truth - tp
        tn = int(mask.size - n_truth - fp)
        per = []
        for i, s in enumerate(tube.sections):
            if isinstance(s, CrossSection):
                sel = coords.section == i
                per.append((s.t0, int(np.sum(inside & mask & sel)), int(np.sum(inside & ~mask & sel))))
        out.append(ClassificationResult(tp / n_truth, fp / n_truth, (tp, fp, fn, tn), float(alpha), per))
    return out


def classify_against_truth(tube: Tube, truth, lattice: Lattice) -> ClassificationResult:
    """Voxelwise TP and FP rates of the tube against a truth voxel set on ``lattice``.

    ``truth`` is either a boolean array with one entry per lattice voxel or an
    ``(n, 3)`` array of voxel indices.
    """
    return classify_alpha_grid(tube, truth, lattice, [tube.config.alpha])[0]


@dataclass(frozen=True)
class SurfaceMesh:
    vertices: np.ndarray
    faces: np.ndarray  # (m, 4) quads, 0-based
    vertex_scalars: np.ndarray | None = None


def export_surface(tube: Tube, n_boundary: int = 32, n_rings: int | None = None, section_scalars=None) -> SurfaceMesh:
    """Quad mesh through ellipse rings of the valid sections.

    Only consecutive sections that are both valid are joined, so gaps split
    the surface. ``n_rings`` thins the sections to that many evenly spaced
    ones. ``section_scalars`` (one value per section) are copied onto each
    ring's vertices.
    """
    if n_boundary < 3:
        raise PreconditionError("n_boundary must be at least 3")
    order = np.arange(len(tube.sections))
    if n_rings is not None and n_rings < len(order):
        order = np.unique(np.round(np.linspace(0, len(order) - 1, n_rings)).astype(int))
    valid = [i for i in order if isinstance(tube.sections[i], CrossSection)]
    if len(valid) < 2:
        raise ExportError("need at least 2 valid sections to build a surface")

    verts, faces, scal = [], [], []
    ring_start = {}
    for i in valid:
        ring_start[i] = len(verts) * n_boundary
        verts.append(embed_ellipse(tube.sections[i], n_boundary))
        if section_scalars is not None:
            scal.append(np.full(n_boundary, float(section_scalars[i])))
    k = np.arange(n_boundary)
    for a, b in zip(order, order[1:]):
        if a in ring_start and b in ring_start:
            ra, rb = ring_start[a], ring_start[b]
            faces.append(np.column_stack([ra + k, ra + (k + 1) % n_boundary, rb + (k + 1) % n_boundary, rb + k]))
    if not faces:
        raise ExportError("no two adjacent sections are valid")
    return SurfaceMesh(
        np.concatenate(verts),
        np.concatenate(faces),
        np.concatenate(scal) if scal else None,
    )
