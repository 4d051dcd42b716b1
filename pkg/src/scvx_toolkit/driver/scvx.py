"""The successive convexification outer loop."""

import logging
import time
from collections.abc import Callable
from logging import Logger

import numpy as np

from scvx_toolkit.convexify import (
    InfeasibleIterateError,
    infeasible_initialization,
    is_feasible,
    project_and_convexify,
)
from scvx_toolkit.core import (
    PenaltyMode,
    PenaltyObjective,
    ProblemDefinition,
    StackedVariable,
    dynamics_defect,
    evaluate_penalty,
)
from scvx_toolkit.driver.config import SolverConfig
from scvx_toolkit.driver.report import SolveReport, TerminationReason
from scvx_toolkit.subproblem import (
    ConicProgram,
    CvxpyBackend,
    SolverBackend,
    SolveStatus,
    SubproblemError,
    build,
    solve,
)

ProgramHook = Callable[[int, ConicProgram], None]


def default_backend(config: SolverConfig) -> SolverBackend:
    return CvxpyBackend(solver="ECOS" if config.backend == "ecos" else "CLARABEL")


class ScvxFastSolver:
    """Runs project, convexify and solve until the subproblem value stops improving.

    Every accepted iterate lies in its own convexified region, which sits inside the feasible set, so
    iterates stay feasible and the penalty never increases.
    """

    __slots__ = ("config", "backend", "logger")

    def __init__(self, config: SolverConfig, backend: SolverBackend, logger: Logger) -> None:
        self.config = config
        self.backend = backend
        self.logger = logger

    def objective_for(self, problem: ProblemDefinition) -> PenaltyObjective:
        return PenaltyObjective.for_problem(problem, penalty_weight=self.config.penalty_weight, mode=self.config.mode)

    def solve(
        self, problem: ProblemDefinition, z0: StackedVariable, on_program: ProgramHook | None = None
    ) -> SolveReport:
        """
        Args:
            problem: The problem to solve.
            z0: Any trajectory of the right shape; infeasible guesses go through initialization first.
            on_program: Called with the iteration index and every built subproblem, e.g. to dump it.

        Raises:
            ObstructedCorridorError: Initialization found no feasible trajectory.
            InfeasibleIterateError: Initialization returned a trajectory that is still infeasible.
        """
        config = self.config
        problem.check_shape(z0)
        objective = self.objective_for(problem)
        tolerance = config.feasibility_tolerance

        z = z0
        initialization_used = not is_feasible(z0, problem, objective.mode, tolerance)
        if initialization_used:
            self.logger.info("initial guess is infeasible; running infeasible initialization")
            z = infeasible_initialization(
                z0,
                problem,
                mode=objective.mode,
                backend=self.backend,
                settings=config.backend_settings,
                seed=config.seed,
            )
            if not is_feasible(z, problem, objective.mode, tolerance):
                raise InfeasibleIterateError(
                    f"infeasible initialization left the trajectory outside feasibility by more than {tolerance:.0e}"
                )

        iterates = [z]
        penalties = [evaluate_penalty(z, problem, objective)]
        values: list[float] = []
        statuses: list[SolveStatus] = []
        wall_times: list[float] = []
        displacements: list[float] = []
        weights: list[float] = []
        previous = penalties[0]
        escalations = 0
        termination = TerminationReason.ITERATION_CAP

        for k in range(config.max_iterations):
            started = time.perf_counter()
            region = project_and_convexify(z, problem, mode=objective.mode, tolerance=tolerance, seed=config.seed)
            program = build(objective, region, problem)
            if on_program is not None:
                on_program(k, program)
            try:
                solution = solve(program, self.backend, config.backend_settings)
            except SubproblemError as e:
                self.logger.error("iteration %d: %s", k, e)
                termination = TerminationReason.BACKEND_FAILURE
                break

            z_next = solution.y_opt
            values.append(solution.objective_value)
            statuses.append(solution.status)
            weights.append(objective.penalty_weight)
            displacements.append(float(np.linalg.norm(z_next.data - z.data)))
            iterates.append(z_next)
            penalties.append(evaluate_penalty(z_next, problem, objective))
            wall_times.append(time.perf_counter() - started)
            improvement = abs(previous - solution.objective_value)
            self.logger.info(
                "iteration %d: P=%.10g Phi=%.10g improvement=%.3e step=%.3e",
                k,
                penalties[-1],
                solution.objective_value,
                improvement,
                displacements[-1],
            )
            previous = solution.objective_value
            z = z_next

            if improvement >= config.epsilon:
                continue
            if self._needs_escalation(problem, objective, z) and escalations < config.max_lambda_escalations:
                weight = (
                    objective.penalty_weight * config.lambda_escalation_factor
                    if objective.penalty_weight > 0.0
                    else config.initial_escalated_weight
                )
                self.logger.warning("dynamics defect persists at convergence; raising penalty weight to %g", weight)
                objective = objective.with_weight(weight)
                escalations += 1
                previous = evaluate_penalty(z, problem, objective)
                continue
            termination = TerminationReason.CONVERGED
            break

        if termination is TerminationReason.ITERATION_CAP:
            self.logger.warning("stopped at the iteration cap of %d", config.max_iterations)
        self.logger.info("terminated (%s) after %d subproblems", termination.value, len(values))
        return SolveReport(
            iterates=tuple(iterates),
            penalty_history=tuple(penalties),
            subproblem_values=tuple(values),
            statuses=tuple(statuses),
            wall_times=tuple(wall_times),
            displacements=tuple(displacements),
            penalty_weights=tuple(weights),
            termination_reason=termination,
            initialization_used=initialization_used,
            initial_guess=z0,
        )

    def _needs_escalation(self, problem: ProblemDefinition, objective: PenaltyObjective, z: StackedVariable) -> bool:
        if objective.mode is not PenaltyMode.PENALIZED:
            return False
        defect = dynamics_defect(z, problem)
        return bool(np.max(np.abs(defect), initial=0.0) > self.config.defect_tolerance)

    def fixed_point_residual(self, report: SolveReport, problem: ProblemDefinition) -> float:
        """Re-solve at the final iterate ``z*`` and return ``‖y_opt - z*‖₂``.

        Raises:
            ValueError: The report did not converge.
            SubproblemError: The backend failed.
        """
        if not report.converged:
            raise ValueError("fixed-point residual needs a converged report")
        z_star = report.final_iterate
        weight = report.penalty_weights[-1] if report.penalty_weights else self.config.penalty_weight
        objective = self.objective_for(problem).with_weight(weight)
        region = project_and_convexify(
            z_star, problem, mode=objective.mode, tolerance=self.config.feasibility_tolerance, seed=self.config.seed
        )
        solution = solve(build(objective, region, problem), self.backend, self.config.backend_settings)
        return float(np.linalg.norm(solution.y_opt.data - z_star.data))


def scvx_fast(
    problem: ProblemDefinition,
    z0: StackedVariable,
    config: SolverConfig | None = None,
    *,
    backend: SolverBackend | None = None,
    logger: Logger | None = None,
) -> SolveReport:
    config = config or SolverConfig()
    solver = ScvxFastSolver(config, backend or default_backend(config), logger or logging.getLogger(__name__))
    return solver.solve(problem, z0)


def fixed_point_residual(
    report: SolveReport,
    problem: ProblemDefinition,
    config: SolverConfig | None = None,
    *,
    backend: SolverBackend | None = None,
) -> float:
    config = config or SolverConfig()
    solver = ScvxFastSolver(config, backend or default_backend(config), logging.getLogger(__name__))
    return solver.fixed_point_residual(report, problem)
