import numpy as np
import pytest

from tubefit import CrossSection, Lattice, TubeConfig, classify_against_truth, export_surface, fit_tube, point_in_tube
from tubefit.core import segment
from tubefit.cross_section import level_set_scale, project_points
from tubefit.errors import DomainError, ExportError, PreconditionError, TubeFitFailedError
from tubefit.principal_curve import assign_latent_times
from tubefit.tube import SectionGap, Tube, classify_alpha_grid, points_in_tube, tube_coordinates

AXIS = segment([0, 0, 0], [0, 0, 10])


@pytest.fixture(scope="module")
def straight_tube(cylinder_cloud):
    return fit_tube(AXIS, cylinder_cloud, TubeConfig(50, 0.1, 0.12))


def test_cylinder_sections(cylinder_tube):
    assert len(cylinder_tube.sections) == 50
    assert not cylinder_tube.gaps
    for s in cylinder_tube.sections:
        assert 0.85 <= s.ellipse.semi_minor <= s.ellipse.semi_major <= 1.1


def test_partial_cloud_leaves_gaps(cylinder_cloud):
    part = cylinder_cloud.subset(np.flatnonzero(cylinder_cloud.points[:, 2] < 4.5))
    tube = fit_tube(AXIS, part, TubeConfig(50, 0.1, 0.12))
    for s in tube.sections:
        if s.t0 > 0.45 + 0.1:
            assert isinstance(s, SectionGap)
            assert "EmptyNeighborhood" in s.error
        elif s.t0 < 0.4:
            assert isinstance(s, CrossSection)


def test_mostly_empty_fails(cylinder_cloud):
    part = cylinder_cloud.subset(np.flatnonzero(cylinder_cloud.points[:, 2] < 2.0))
    with pytest.raises(TubeFitFailedError):
        fit_tube(AXIS, part, TubeConfig(50, 0.1, 0.12))


def test_deterministic(cylinder_cloud, cylinder_curve):
    a = fit_tube(cylinder_curve, cylinder_cloud, TubeConfig(20, 0.1, 0.12))
    b = fit_tube(cylinder_curve, cylinder_cloud, TubeConfig(20, 0.1, 0.12))
    for x, y in zip(a.sections, b.sections):
        assert np.array_equal(x.sigma, y.sigma) and np.array_equal(x.mu, y.mu) and np.array_equal(x.center, y.center)


class TestMembership:
    def test_centerline_point(self, cylinder_tube):
        assert point_in_tube(cylinder_tube, cylinder_tube.curve.points(np.array([0.5]))[0])

    def test_far_point(self, cylinder_tube):
        big = max(s.ellipse.semi_major for s in cylinder_tube.sections)
        assert not point_in_tube(cylinder_tube, [100 * big, 0, 5])

    def test_boundary_along_major_axis(self, straight_tube):
        s = straight_tube.sections[20]
        e = s.ellipse
        u = np.array([np.cos(e.orientation), np.sin(e.orientation)])
        for factor, inside in ((1.0 - 1e-9, True), (1.01, False)):
            p2 = s.mu + factor * e.semi_major * u
            p3 = s.center + np.array([*p2, 0.0]) @ s.rotation
            assert point_in_tube(straight_tube, p3) is inside

    def test_beyond_end_caps(self, straight_tube):
        assert point_in_tube(straight_tube, [0, 0, 0.001])
        assert not point_in_tube(straight_tube, [0, 0, -0.5])
        assert not point_in_tube(straight_tube, [0, 0, 10.5])

    def test_consistent_with_nearest_section(self, cylinder_tube, cylinder_cloud):
        # independent recomputation of the membership rule for every cloud point
        curve = cylinder_tube.curve
        P = cylinder_cloud.points
        t = assign_latent_times(curve, P, curve.grid_resolution)
        X = project_points(P, t, curve)
        t0s = cylinder_tube.t0s
        nearest = np.array([np.flatnonzero(np.abs(t0s - ti) == np.abs(t0s - ti).min())[0] for ti in t])
        c = level_set_scale(cylinder_tube.config.alpha)
        want = np.array([cylinder_tube.sections[j].mahalanobis2(x)[0] <= c for j, x in zip(nearest, X)])
        coords = tube_coordinates(cylinder_tube, P)
        interior = coords.section >= 0
        assert np.array_equal(points_in_tube(cylinder_tube, P)[interior], want[interior])
        assert want.mean() > 0.8

    def test_monotone_in_alpha(self, cylinder_tube):
        alphas = [0.5, 0.3, 0.12, 0.05, 0.01]
        areas = np.array([[s.area for s in cylinder_tube.with_alpha(a).sections] for a in alphas])
        assert np.all(np.diff(areas, axis=0) >= 0)


def cylinder_truth(radius=1.0, length=10.0, pitch=0.1):
    lat = Lattice((-1.5, -1.5, 0.0), pitch, (31, 31, int(round(length / pitch)) + 1))
    P = lat.points()
    return lat, P[:, 0] ** 2 + P[:, 1] ** 2 <= radius**2


class TestClassify:
    def test_generous_alpha_covers_cylinder(self, straight_tube):
        lat, truth = cylinder_truth()
        r = classify_against_truth(straight_tube.with_alpha(0.01), truth, lat)
        assert r.true_positive_rate >= 0.95
        tp, fp, fn, tn = r.counts
        assert tp + fn == truth.sum() and tp + fp + fn + tn == lat.size
        assert r.true_positive_rate == pytest.approx(tp / truth.sum())

    def test_translated_far_has_no_tp(self, straight_tube):
        lat, truth = cylinder_truth()
        moved = Lattice((98.5, -1.5, 0.0), lat.pitch, lat.shape)
        assert classify_against_truth(straight_tube, truth, moved).true_positive_rate == 0.0

    def test_full_truth_has_no_fp(self, straight_tube):
        lat, truth = cylinder_truth()
        r = classify_against_truth(straight_tube, np.ones_like(truth), lat)
        assert r.false_positive_rate == 0.0

    def test_empty_truth(self, straight_tube):
        lat, truth = cylinder_truth()
        with pytest.raises(DomainError):
            classify_against_truth(straight_tube, np.zeros_like(truth), lat)

    def test_tp_count_monotone_in_alpha(self, straight_tube):
        lat, truth = cylinder_truth(pitch=0.2)
        res = classify_alpha_grid(straight_tube, truth, lat, [0.6, 0.3, 0.12, 0.05])
        tps = [r.counts[0] for r in res]
        assert tps == sorted(tps)

    def test_index_truth(self, straight_tube):
        lat, truth = cylinder_truth(pitch=0.2)
        idx = np.argwhere(truth.reshape(lat.shape))
        a = classify_against_truth(straight_tube, idx, lat)
        b = classify_against_truth(straight_tube, truth, lat)
        assert a.counts == b.counts


def manual_section(t0, center, radius=1.0):
    return CrossSection(t0, np.asarray(center, float), np.eye(3), np.zeros(2), np.eye(2) * radius**2 / 2, np.exp(-1), [], [])


class TestExport:
    def test_counts(self):
        tube = Tube(None, [manual_section(0.0, (0, 0, 0)), manual_section(1.0, (0, 0, 1))])
        mesh = export_surface(tube, n_boundary=4)
        assert mesh.vertices.shape == (8, 3)
        assert mesh.faces.shape == (4, 4)
        assert mesh.faces.max() == 7

    def test_straight_cylinder_radius(self, straight_tube):
        mesh = export_surface(straight_tube, 32)
        r = np.linalg.norm(mesh.vertices[:, :2], axis=1)
        lo = min(s.ellipse.semi_minor for s in straight_tube.sections)
        hi = max(s.ellipse.semi_major for s in straight_tube.sections)
        assert np.all((r >= lo - 0.05) & (r <= hi + 0.05))

    def test_gap_splits_surface(self):
        secs = [manual_section(0.0, (0, 0, 0)), SectionGap(0.5, "x"), manual_section(0.7, (0, 0, 1)), manual_section(1.0, (0, 0, 2))]
        mesh = export_surface(Tube(None, secs), 6)
        assert len(mesh.vertices) == 18
        assert len(mesh.faces) == 6

    def test_too_few(self):
        with pytest.raises(ExportError):
            export_surface(Tube(None, [manual_section(0.0, (0, 0, 0)), SectionGap(1.0, "x")]), 8)

    def test_rings_and_scalars(self, straight_tube):
        mesh = export_surface(straight_tube, 8, n_rings=10, section_scalars=np.arange(50.0))
        assert len(mesh.vertices) == 80
        assert mesh.vertex_scalars[0] == 0.0 and mesh.vertex_scalars[-1] == 49.0


def test_config_validation():
    with pytest.raises(PreconditionError):
        TubeConfig(0)
    with pytest.raises(PreconditionError):
        TubeConfig(10, 0.0)
    with pytest.raises(DomainError):
        TubeConfig(10, 0.1, 1.5)


def test_lattice_bounding():
    lat = Lattice.bounding(np.array([[0.1, 0.2, 0.3], [1.0, 1.0, 1.0]]), 0.5)
    P = lat.points()
    assert P.min(axis=0) == pytest.approx([0, 0, 0])
    assert P.max(axis=0) == pytest.approx([1, 1, 1])
    assert lat.size == 27
