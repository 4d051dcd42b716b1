from dataclasses import dataclass
from enum import Enum

from scvx_toolkit.core import StackedVariable
from scvx_toolkit.subproblem import SolveStatus


class TerminationReason(Enum):
    CONVERGED = "converged"
    ITERATION_CAP = "iteration_cap"
    BACKEND_FAILURE = "backend_failure"


@dataclass(slots=True, frozen=True, eq=False)
class SolveReport:
    """
    History of one run.

    Attributes:
        iterates: ``z⁽⁰⁾ … z⁽ᵏ*⁾``; ``z⁽⁰⁾`` is the initialized guess when initialization ran.
        penalty_history: ``P(z⁽ᵏ⁾)`` for every iterate, under the penalty weight in force at that iterate.
        subproblem_values: ``Φ(z⁽ᵏ⁾)`` for every solved subproblem; one shorter than ``iterates``.
        statuses: Backend status of every subproblem.
        wall_times: Seconds per iteration (convexify, build and solve).
        displacements: ``‖z⁽ᵏ⁺¹⁾ - z⁽ᵏ⁾‖₂`` per iteration.
        penalty_weights: ``λ`` used by every subproblem.
        termination_reason: Why the loop stopped.
        initialization_used: Whether the guess went through infeasible initialization.
        initial_guess: The guess as given, before initialization.
    """

    iterates: tuple[StackedVariable, ...]
    penalty_history: tuple[float, ...]
    subproblem_values: tuple[float, ...]
    statuses: tuple[SolveStatus, ...]
    wall_times: tuple[float, ...]
    displacements: tuple[float, ...]
    penalty_weights: tuple[float, ...]
    termination_reason: TerminationReason
    initialization_used: bool
    initial_guess: StackedVariable

    @property
    def final_iterate(self) -> StackedVariable:
        return self.iterates[-1]

    @property
    def converged(self) -> bool:
        return self.termination_reason is TerminationReason.CONVERGED

    @property
    def iterations(self) -> int:
        """Number of subproblems solved."""
        return len(self.subproblem_values)
