"""One-shot recovery of a feasible trajectory from an infeasible guess."""

import logging

import numpy as np

from scvx_toolkit.convexify.region import (
    FEASIBILITY_TOLERANCE,
    ConvexifiedRegion,
    CutLabel,
    dynamics_cut,
    dynamics_row,
    dynamics_row_gradient,
    is_feasible,
    obstacle_cut,
)
from scvx_toolkit.core import EndpointInsideObstacleError, PenaltyMode, ProblemDefinition, StackedVariable
from scvx_toolkit.geometry import HalfspaceCut, merge_intersecting
from scvx_toolkit.subproblem import (
    BackendSettings,
    CvxpyBackend,
    SolverBackend,
    SolveStatus,
    SubproblemError,
    build_least_distance,
    solve,
)

logger = logging.getLogger(__name__)

CUT_MARGIN = 1e-7


class ObstructedCorridorError(RuntimeError):
    """Raised when the halfspaces of the initialization leave no admissible trajectory."""


def infeasible_initialization(
    z0: StackedVariable,
    problem: ProblemDefinition,
    *,
    mode: PenaltyMode = PenaltyMode.HARD_EQUALITY,
    backend: SolverBackend | None = None,
    settings: BackendSettings | None = None,
    seed: int = 0,
) -> StackedVariable:
    """Turn an arbitrary guess into a trajectory that satisfies every keep-out row.

    Intersecting obstacles are first replaced by their ellipsoidal covers. Every row violated by the guess
    is linearized at the nearest boundary point of its zone, every other row gets its ordinary supporting
    cut, and the guess is projected onto the resulting convex set (together with the domain, the pins and,
    in hard-equality mode, the dynamics).

    Raises:
        ObstructedCorridorError: The halfspaces and the domain do not intersect.
    """
    problem.check_shape(z0)
    if is_feasible(z0, problem, mode):
        logger.debug("initial guess is already feasible")
        return z0

    merged = merge_intersecting(problem.obstacles)
    try:
        covered = problem.with_obstacles(tuple(item.region for item in merged))
    except EndpointInsideObstacleError as e:
        raise ObstructedCorridorError(
            "a boundary state lies inside the ellipsoidal cover of intersecting obstacles; move the endpoint "
            "or separate the obstacles"
        ) from e

    region = _initialization_region(z0, covered, mode, seed)
    violated = sum(1 for cut in region.cuts if cut.value(z0.data) < 0.0)
    logger.info("initialization: %d of %d rows violated by the guess", violated, len(region.cuts))

    program = build_least_distance(region, covered, z0)
    try:
        solution = solve(program, backend or CvxpyBackend(), settings)
    except SubproblemError as e:
        if e.status is SolveStatus.INFEASIBLE:
            raise ObstructedCorridorError(
                "no trajectory satisfies the initialization halfspaces; the corridor is obstructed, repair the "
                "scenario (move obstacles apart or relax the limits)"
            ) from e
        raise

    data = np.array(solution.y_opt.data)
    layout = problem.layout
    for step, state in problem.boundary.pins(problem.horizon).items():
        data[layout.state_slice(step)] = state
    return StackedVariable.like(z0, data)


def _initialization_region(
    z0: StackedVariable, problem: ProblemDefinition, mode: PenaltyMode, seed: int
) -> ConvexifiedRegion:
    cuts: list[HalfspaceCut] = []
    labels: list[CutLabel] = []
    for step in problem.free_steps:
        for index in range(problem.obstacle_rows_per_step):
            label = CutLabel(kind="obstacle", step=step, index=index)
            cuts.append(_with_margin(obstacle_cut(z0, problem, label, seed)))
            labels.append(label)
    if mode is PenaltyMode.PENALIZED:
        for step in range(problem.horizon - 1):
            for component in range(problem.state_dim):
                label = CutLabel(kind="dynamics", step=step, index=component)
                cuts.append(_with_margin(_initial_dynamics_cut(z0, problem, label)))
                labels.append(label)
    return ConvexifiedRegion(cuts=tuple(cuts), labels=tuple(labels), problem=problem, mode=mode, source_iterate=z0)


def _initial_dynamics_cut(z0: StackedVariable, problem: ProblemDefinition, label: CutLabel) -> HalfspaceCut:
    indices, row = dynamics_row(problem, label)
    w0 = z0.data[indices]
    if row(w0) >= -FEASIBILITY_TOLERANCE:
        return dynamics_cut(z0, problem, label)
    # convex rows satisfy g(y) >= g(w0) + ∇g(w0)ᵀ(y - w0)
    gradient = dynamics_row_gradient(problem, label, w0)
    return HalfspaceCut(a=gradient, b=row(w0) - float(gradient @ w0)).lifted(problem.layout.size, indices)


def _with_margin(cut: HalfspaceCut) -> HalfspaceCut:
    return HalfspaceCut(a=cut.a, b=cut.b - CUT_MARGIN)
