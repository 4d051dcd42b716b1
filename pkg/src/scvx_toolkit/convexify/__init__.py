"""Project-and-convexify regions and the infeasible-initialization routine."""

from scvx_toolkit.convexify.region import (
    ConvexifiedRegion,
    CutLabel,
    Domain,
    InfeasibleIterateError,
    contains,
    is_feasible,
    obstacle_clearance,
    project_and_convexify,
)
from scvx_toolkit.convexify.initialization import ObstructedCorridorError, infeasible_initialization

__all__: tuple[str, ...] = (
    "ConvexifiedRegion",
    "CutLabel",
    "Domain",
    "project_and_convexify",
    "contains",
    "is_feasible",
    "obstacle_clearance",
    "InfeasibleIterateError",
    "infeasible_initialization",
    "ObstructedCorridorError",
)
