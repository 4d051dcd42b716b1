from collections.abc import Mapping
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import TYPE_CHECKING, Protocol

from scvx_toolkit.geometry import FloatArray

if TYPE_CHECKING:
    from scvx_toolkit.subproblem.program import ConicProgram


class SolveStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NUMERICAL_LIMIT = "numerical_limit"


@dataclass(slots=True, frozen=True)
class BackendSettings:
    """Tolerances handed to the conic solver."""

    primal_feasibility: float = 1e-8
    dual_feasibility: float = 1e-8
    gap: float = 1e-8
    max_iterations: int = 200
    verbose: bool = False

    def __post_init__(self) -> None:
        for name in ("primal_feasibility", "dual_feasibility", "gap"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")

    def relaxed(self, tolerance: float = 1e-6) -> "BackendSettings":
        return replace(self, primal_feasibility=tolerance, dual_feasibility=tolerance, gap=tolerance)


@dataclass(slots=True, frozen=True, eq=False)
class BackendResult:
    """
    Raw outcome of one backend solve.

    Attributes:
        status: Normalized solver status.
        x: Best primal point over the program's full variable vector, or ``None``.
        objective_value: Objective at ``x`` including the program's constant offset.
        stats: Solver statistics such as ``iterations`` and ``solve_time``.
    """

    status: SolveStatus
    x: FloatArray | None = None
    objective_value: float | None = None
    stats: Mapping[str, float] = field(default_factory=dict)


class SolverBackend(Protocol):
    @property
    def supports_soc(self) -> bool:
        """Whether the backend accepts second-order-cone constraints."""

    def solve(self, program: "ConicProgram", settings: BackendSettings) -> BackendResult:
        """
        Solves a conic program.

        Args:
            program: The program to solve; never mutated.
            settings: Tolerances and iteration limits.

        Returns:
            A BackendResult whose ``x`` is set whenever ``status`` is ``OPTIMAL`` or ``NUMERICAL_LIMIT``
            with a usable iterate.
        """
