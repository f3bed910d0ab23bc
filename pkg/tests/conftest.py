import numpy as np
import pytest

from tubefit import CurveFitConfig, PointCloud, TubeConfig, fit_principal_curve, fit_tube
from tubefit.evalsim import generate_cylinder_cloud


@pytest.fixture(scope="session")
def segment_fit():
    t = np.linspace(0, 1, 500)
    cloud = PointCloud(np.outer(t, [1.0, 1.0, 1.0]))
    cfg = CurveFitConfig(((0, 0, 0), (1, 1, 1)), final_df=5)
    return cloud, fit_principal_curve(cloud, cfg)


@pytest.fixture(scope="session")
def noisy_helix():
    rng = np.random.default_rng(7)
    t = rng.uniform(0, 1, 2000)
    clean = np.column_stack([np.cos(2 * np.pi * t), np.sin(2 * np.pi * t), 2 * t])
    cloud = PointCloud(clean + rng.normal(0, 0.05, clean.shape))
    cfg = CurveFitConfig(((1, 0, 0), (1, 0, 2)), final_df=8, df_schedule=(4, 6, 8))
    return cloud, fit_principal_curve(cloud, cfg)


@pytest.fixture(scope="session")
def cylinder_cloud():
    return generate_cylinder_cloud(radius=1.0, length=10.0, n_points=20_000, seed=3)


@pytest.fixture(scope="session")
def cylinder_curve(cylinder_cloud):
    cfg = CurveFitConfig(((0, 0, 0), (0, 0, 10)), final_df=4)
    return fit_principal_curve(cylinder_cloud, cfg)


@pytest.fixture(scope="session")
def cylinder_tube(cylinder_cloud, cylinder_curve):
    return fit_tube(cylinder_curve, cylinder_cloud, TubeConfig(50, 0.1, 0.12))


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
