"""Convex keep-out sets, projections, supporting cuts and ellipsoidal covers."""

from scvx_toolkit.geometry.cover import (
    DegenerateCoverError,
    MergedObstacle,
    khachiyan,
    merge_intersecting,
    mvee_cover,
    sample_boundary,
)
from scvx_toolkit.geometry.intersection import intersects
from scvx_toolkit.geometry.projection import (
    AmbiguousNormalError,
    HalfspaceCut,
    ProjectionConvergenceError,
    ProjectionResult,
    cut_at,
    interior_point,
    membership_gradient,
    membership_value,
    nearest_boundary,
    project,
    supporting_cut,
    tie_break_direction,
)
from scvx_toolkit.geometry.sets import Ball, ConvexSet, Ellipsoid, FloatArray, Halfspace, Polytope, is_bounded

__all__: tuple[str, ...] = (
    "Ellipsoid",
    "Polytope",
    "Ball",
    "Halfspace",
    "ConvexSet",
    "FloatArray",
    "is_bounded",
    "ProjectionResult",
    "HalfspaceCut",
    "ProjectionConvergenceError",
    "AmbiguousNormalError",
    "membership_value",
    "membership_gradient",
    "interior_point",
    "project",
    "nearest_boundary",
    "supporting_cut",
    "cut_at",
    "tie_break_direction",
    "intersects",
    "mvee_cover",
    "merge_intersecting",
    "khachiyan",
    "sample_boundary",
    "MergedObstacle",
    "DegenerateCoverError",
)
