"""Problem definition, variable stacking and the exact penalty objective."""

from scvx_toolkit.core.dynamics import (
    ConvexDynamics,
    DynamicsModel,
    LinearDynamics,
    discretize_double_integrator,
    rollout,
)
from scvx_toolkit.core.penalty import (
    ConstraintStack,
    PenaltyMode,
    PenaltyObjective,
    dynamics_defect,
    evaluate_cost,
    evaluate_penalty,
)
from scvx_toolkit.core.problem import (
    AdmissibleSet,
    BoundaryConditions,
    BoxBound,
    CostModel,
    CustomCost,
    EndpointInsideObstacleError,
    LinearCost,
    MinimumFuelCost,
    NormBound,
    ProblemDefinition,
    ThrustCone,
    applies_at,
)
from scvx_toolkit.core.variables import DimensionMismatchError, StackedVariable, StackLayout, stack, unstack

__all__: tuple[str, ...] = (
    "StackedVariable",
    "StackLayout",
    "stack",
    "unstack",
    "DimensionMismatchError",
    "LinearDynamics",
    "ConvexDynamics",
    "DynamicsModel",
    "discretize_double_integrator",
    "rollout",
    "ProblemDefinition",
    "BoundaryConditions",
    "MinimumFuelCost",
    "LinearCost",
    "CustomCost",
    "CostModel",
    "NormBound",
    "ThrustCone",
    "BoxBound",
    "AdmissibleSet",
    "applies_at",
    "EndpointInsideObstacleError",
    "PenaltyMode",
    "PenaltyObjective",
    "ConstraintStack",
    "dynamics_defect",
    "evaluate_cost",
    "evaluate_penalty",
)
