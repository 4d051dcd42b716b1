import logging
from collections.abc import Mapping
from dataclasses import dataclass, field

from scvx_toolkit.core import StackedVariable
from scvx_toolkit.subproblem.program import ConicProgram
from scvx_toolkit.subproblem.protocols import BackendResult, BackendSettings, SolverBackend, SolveStatus

logger = logging.getLogger(__name__)


class SubproblemError(RuntimeError):
    """Raised when a subproblem cannot be solved to optimality."""

    def __init__(self, status: SolveStatus, message: str) -> None:
        super().__init__(f"{message} (status: {status.value})")
        self.status = status


@dataclass(slots=True, frozen=True, eq=False)
class SubproblemSolution:
    """The minimizer over the convexified region and the optimal value ``Φ(z)``."""

    y_opt: StackedVariable
    objective_value: float
    status: SolveStatus
    stats: Mapping[str, float] = field(default_factory=dict)
    relaxed: bool = False


def solve(
    program: ConicProgram,
    backend: SolverBackend,
    settings: BackendSettings | None = None,
) -> SubproblemSolution:
    """Solve ``program``; a numerical-limit outcome is retried once at relaxed tolerances.

    Raises:
        SubproblemError: The program is infeasible or unbounded, or the retry also failed.
    """
    if program.soc_blocks and not backend.supports_soc:
        raise ValueError("backend does not support second-order cones")
    settings = settings or BackendSettings()

    result = backend.solve(program, settings)
    relaxed = False
    if result.status is SolveStatus.NUMERICAL_LIMIT:
        relaxed_settings = settings.relaxed()
        logger.warning(
            "subproblem hit a numerical limit; retrying at tolerance %.0e", relaxed_settings.primal_feasibility
        )
        result = backend.solve(program, relaxed_settings)
        relaxed = True

    return _accept(program, result, relaxed)


def _accept(program: ConicProgram, result: BackendResult, relaxed: bool) -> SubproblemSolution:
    match result.status:
        case SolveStatus.OPTIMAL if result.x is not None and result.objective_value is not None:
            return SubproblemSolution(
                y_opt=program.extract(result.x),
                objective_value=result.objective_value,
                status=result.status,
                stats=dict(result.stats),
                relaxed=relaxed,
            )
        case SolveStatus.INFEASIBLE:
            raise SubproblemError(result.status, "subproblem is infeasible; the convexified region is empty")
        case SolveStatus.UNBOUNDED:
            raise SubproblemError(result.status, "subproblem is unbounded")
    raise SubproblemError(SolveStatus.NUMERICAL_LIMIT, "subproblem solve failed after the relaxed retry")
