from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from scvx_toolkit.driver.report import SolveReport

MINIMUM_ITERATES = 4
ERROR_FLOOR = 1e-12


class InsufficientIterationsError(ValueError):
    """Raised when a run is too short to estimate a convergence rate."""


@dataclass(slots=True, frozen=True)
class RateTable:
    """
    Attributes:
        errors: ``e_k = ‖z⁽ᵏ⁾ - z*‖₂``, stopping before the first error at or below the floor.
        ratios: ``e_{k+1} / e_k``.
        final_phase: The ratios over the final half of the run.
        superlinear: Whether the final-phase ratios strictly decrease.
    """

    errors: tuple[float, ...]
    ratios: tuple[float, ...]
    final_phase: tuple[float, ...]
    superlinear: bool

    @property
    def verdict(self) -> str:
        return "superlinear signature" if self.superlinear else "not superlinear"


def rate_table(errors: Sequence[float]) -> RateTable:
    """Ratios of successive errors and the strictly-decreasing test over the final half.

    Errors at or below ``ERROR_FLOOR`` carry no rate information and end the table.

    Raises:
        InsufficientIterationsError: Fewer than three usable errors.
    """
    usable: list[float] = []
    for error in errors:
        if error <= ERROR_FLOOR:
            break
        usable.append(float(error))
    if len(usable) < MINIMUM_ITERATES - 1:
        raise InsufficientIterationsError(
            f"need at least {MINIMUM_ITERATES - 1} nonzero errors to estimate a rate, got {len(usable)}"
        )

    ratios = tuple(usable[k + 1] / usable[k] for k in range(len(usable) - 1))
    final_phase = ratios[len(ratios) // 2 :] if len(ratios) >= 4 else ratios
    superlinear = len(final_phase) >= 2 and all(
        later < earlier for earlier, later in zip(final_phase, final_phase[1:], strict=False)
    )
    return RateTable(errors=tuple(usable), ratios=ratios, final_phase=final_phase, superlinear=superlinear)


def convergence_rate_diagnostics(report: SolveReport) -> RateTable:
    """Rate table of a converged run, measured against its final iterate.

    Raises:
        InsufficientIterationsError: Fewer than four iterates, or the run did not converge.
    """
    if not report.converged:
        raise InsufficientIterationsError("rate diagnostics need a converged run")
    if len(report.iterates) < MINIMUM_ITERATES:
        raise InsufficientIterationsError(
            f"need at least {MINIMUM_ITERATES} iterates, got {len(report.iterates)}"
        )
    z_star = report.final_iterate.data
    errors = [float(np.linalg.norm(z.data - z_star)) for z in report.iterates[:-1]]
    return rate_table(errors)
