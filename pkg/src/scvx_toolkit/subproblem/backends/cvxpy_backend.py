import logging
from typing import Any, Literal

import cvxpy as cp
import numpy as np

from scvx_toolkit.subproblem.program import ConicProgram
from scvx_toolkit.subproblem.protocols import BackendResult, BackendSettings, SolverBackend, SolveStatus

_STATUS_MAP: dict[str, SolveStatus] = {
    cp.OPTIMAL: SolveStatus.OPTIMAL,
    cp.OPTIMAL_INACCURATE: SolveStatus.NUMERICAL_LIMIT,
    cp.INFEASIBLE: SolveStatus.INFEASIBLE,
    cp.INFEASIBLE_INACCURATE: SolveStatus.INFEASIBLE,
    cp.UNBOUNDED: SolveStatus.UNBOUNDED,
    cp.UNBOUNDED_INACCURATE: SolveStatus.UNBOUNDED,
}


class CvxpyBackend(SolverBackend):
    """In-process interior-point backend: the program is handed to cvxpy and solved with Clarabel or ECOS."""

    __slots__ = ("solver", "logger")

    def __init__(self, solver: Literal["CLARABEL", "ECOS"] = "CLARABEL", logger: logging.Logger | None = None) -> None:
        if solver not in ("CLARABEL", "ECOS"):
            raise ValueError(f"unsupported solver {solver!r}")
        self.solver = solver
        self.logger = logger or logging.getLogger(__name__)

    @property
    def supports_soc(self) -> bool:
        return True

    def solve(self, program: ConicProgram, settings: BackendSettings) -> BackendResult:
        w = cp.Variable(program.layout.size)
        v = cp.multiply(program.scaling, w)
        constraints: list[Any] = []
        if program.eq_vector.size:
            constraints.append(program.eq_matrix @ v == program.eq_vector)
        if program.ineq_vector.size:
            constraints.append(program.ineq_matrix @ v <= program.ineq_vector)
        for block in program.soc_blocks:
            constraints.append(cp.SOC(block.c @ v + block.d, block.A @ v + block.b))
        problem = cp.Problem(cp.Minimize(program.linear_cost @ v + program.cost_offset), constraints)

        try:
            problem.solve(solver=self.solver, verbose=settings.verbose, **self._options(settings))
        except cp.error.SolverError as e:
            self.logger.warning("%s failed: %s", self.solver, e)
            return BackendResult(status=SolveStatus.NUMERICAL_LIMIT)

        status = _STATUS_MAP.get(problem.status, SolveStatus.NUMERICAL_LIMIT)
        stats = {
            "iterations": float(problem.solver_stats.num_iters or 0),
            "solve_time": float(problem.solver_stats.solve_time or 0.0),
        }
        self.logger.debug("%s status %s after %d iterations", self.solver, problem.status, stats["iterations"])
        if w.value is None or status in (SolveStatus.INFEASIBLE, SolveStatus.UNBOUNDED):
            return BackendResult(status=status, stats=stats)
        x = np.asarray(program.scaling * w.value, dtype=np.float64)
        objective = float(program.linear_cost @ x + program.cost_offset)
        return BackendResult(status=status, x=x, objective_value=objective, stats=stats)

    def _options(self, settings: BackendSettings) -> dict[str, float | int]:
        match self.solver:
            case "CLARABEL":
                return {
                    "tol_gap_abs": settings.gap,
                    "tol_gap_rel": settings.gap,
                    "tol_feas": min(settings.primal_feasibility, settings.dual_feasibility),
                    "max_iter": settings.max_iterations,
                }
            case "ECOS":
                return {
                    "abstol": settings.gap,
                    "reltol": settings.gap,
                    "feastol": settings.primal_feasibility,
                    "max_iters": settings.max_iterations,
                }
        raise ValueError(f"unsupported solver {self.solver!r}")
