"""Centerline and tube estimation for tube-shaped 3D point clouds."""

__version__ = "0.1.0"

from .core import Ellipse2D, ParametricCurve, PointCloud, ellipse_area, helix, minimal_rotation_to_z, segment
from .cross_section import (
    CrossSection,
    cosine_weights,
    embed_ellipse,
    fit_cross_section,
    level_set_scale,
    project_to_plane,
    t_window,
    weighted_gaussian,
)
from .principal_curve import (
    CurveFitConfig,
    PrincipalCurve,
    assign_latent_times,
    curve_point,
    curve_tangent,
    fit_principal_curve,
)
from .profiles import Profile, arc_length, concentration_profile, slice_profile, voxel_neighborhood_profile
from .spline import CoordinateSpline, eval_spline, eval_spline_deriv, fit_spline
from .tube import (
    ClassificationResult,
    Lattice,
    Tube,
    TubeConfig,
    classify_against_truth,
    export_surface,
    fit_tube,
    point_in_tube,
)
