"""Configuration for the successive convexification loop."""

from dataclasses import dataclass, field
from typing import Literal

from scvx_toolkit.core import PenaltyMode
from scvx_toolkit.subproblem import BackendSettings


@dataclass(slots=True, frozen=True)
class SolverConfig:
    """Outer-loop settings.

    ``mode=None`` picks hard equalities for linear dynamics and the penalty otherwise. A penalized run that
    converges with a dynamics defect above ``defect_tolerance`` multiplies ``penalty_weight`` by
    ``lambda_escalation_factor`` (starting from ``initial_escalated_weight`` when it is zero) and continues,
    at most ``max_lambda_escalations`` times.
    """

    epsilon: float = 1e-4
    max_iterations: int = 100
    penalty_weight: float = 0.0
    mode: PenaltyMode | None = None
    seed: int = 0
    feasibility_tolerance: float = 1e-6
    defect_tolerance: float = 1e-6
    lambda_escalation_factor: float = 10.0
    max_lambda_escalations: int = 3
    initial_escalated_weight: float = 1.0
    backend: Literal["clarabel", "ecos"] = "clarabel"
    backend_settings: BackendSettings = field(default_factory=BackendSettings)

    def __post_init__(self) -> None:
        if not self.epsilon > 0.0:
            raise ValueError("epsilon must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not self.penalty_weight >= 0.0:
            raise ValueError("penalty_weight must be nonnegative")
        if not self.feasibility_tolerance > 0.0:
            raise ValueError("feasibility_tolerance must be positive")
        if not self.defect_tolerance > 0.0:
            raise ValueError("defect_tolerance must be positive")
        if not self.lambda_escalation_factor > 1.0:
            raise ValueError("lambda_escalation_factor must exceed 1")
        if self.max_lambda_escalations < 0:
            raise ValueError("max_lambda_escalations must be nonnegative")
        if not self.initial_escalated_weight > 0.0:
            raise ValueError("initial_escalated_weight must be positive")
        if self.backend not in ("clarabel", "ecos"):
            raise ValueError("backend must be 'clarabel' or 'ecos'")
