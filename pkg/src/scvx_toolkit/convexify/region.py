"""Project-and-convexify: the convex inner approximation ``F_z`` of the feasible set around an iterate."""

import logging
from collections.abc import Callable, Iterable, Iterator
from concurrent.futures import Executor
from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike
from scipy.optimize import minimize

from scvx_toolkit.core import (
    ConstraintStack,
    LinearDynamics,
    NormBound,
    PenaltyMode,
    ProblemDefinition,
    StackedVariable,
    ThrustCone,
    applies_at,
    dynamics_defect,
)
from scvx_toolkit.core.dynamics import ConvexDynamics
from scvx_toolkit.geometry import FloatArray, HalfspaceCut, cut_at, membership_value

logger = logging.getLogger(__name__)

FEASIBILITY_TOLERANCE = 1e-6
MEMBERSHIP_TOLERANCE = 1e-8


class InfeasibleIterateError(ValueError):
    """Raised when an iterate violates a keep-out row; route it through infeasible initialization."""


@dataclass(slots=True, frozen=True)
class CutLabel:
    """Origin of a cut: obstacle ``index`` at ``step``, or dynamics component ``index`` of interval ``step``."""

    kind: Literal["obstacle", "dynamics"]
    step: int
    index: int


@dataclass(slots=True, frozen=True, eq=False)
class Domain:
    """The convex domain ``Y``: per-step admissible sets and the pinned boundary states."""

    problem: ProblemDefinition

    def violations(self, y: StackedVariable) -> Iterator[tuple[str, float]]:
        problem = self.problem
        for step in range(problem.horizon):
            for index, constraint in enumerate(problem.state_sets):
                if applies_at(constraint, step):
                    yield f"state_sets[{index}] at step {step}", constraint.violation(y.state_at(step))
        for step in range(problem.horizon - 1):
            for index, constraint in enumerate(problem.control_sets):
                if applies_at(constraint, step):
                    yield f"control_sets[{index}] at step {step}", constraint.violation(y.control_at(step))
        for step, state in problem.boundary.pins(problem.horizon).items():
            yield f"pin at step {step}", float(np.max(np.abs(y.state_at(step) - state)))

    def violation(self, y: StackedVariable) -> float:
        return max((value for _, value in self.violations(y)), default=0.0)

    def contains(self, y: StackedVariable, tolerance: float = MEMBERSHIP_TOLERANCE) -> bool:
        return self.violation(y) <= tolerance

    @property
    def soc_count(self) -> int:
        """Number of second-order-cone memberships the domain contributes to a subproblem."""
        problem = self.problem
        state_cones = sum(
            1
            for step in range(problem.horizon)
            for c in problem.state_sets
            if isinstance(c, NormBound | ThrustCone) and applies_at(c, step)
        )
        control_cones = sum(
            1
            for step in range(problem.horizon - 1)
            for c in problem.control_sets
            if isinstance(c, NormBound | ThrustCone) and applies_at(c, step)
        )
        return state_cones + control_cones


@dataclass(slots=True, frozen=True, eq=False)
class ConvexifiedRegion:
    """``F_z = {y ∈ Y | aᵀy + b >= 0 for every cut}``, built at ``source_iterate``.

    In hard-equality mode the dynamics equalities are part of the region; in penalized mode the
    dynamics rows contribute cuts of their own.
    """

    cuts: tuple[HalfspaceCut, ...]
    labels: tuple[CutLabel, ...]
    problem: ProblemDefinition
    mode: PenaltyMode
    source_iterate: StackedVariable

    def __post_init__(self) -> None:
        if len(self.cuts) != len(self.labels):
            raise ValueError("every cut needs a label")

    @property
    def domain(self) -> Domain:
        return Domain(self.problem)

    def cut_matrix(self) -> tuple[FloatArray, FloatArray]:
        """Stacked ``(a, b)`` of all cuts, one row per cut."""
        size = self.problem.layout.size
        if not self.cuts:
            return np.zeros((0, size)), np.zeros(0)
        return np.vstack([cut.a for cut in self.cuts]), np.array([cut.b for cut in self.cuts])

    def slacks(self, y: StackedVariable) -> FloatArray:
        a, b = self.cut_matrix()
        return a @ y.data + b


def project_and_convexify(
    z: StackedVariable,
    problem: ProblemDefinition,
    *,
    mode: PenaltyMode = PenaltyMode.HARD_EQUALITY,
    tolerance: float = FEASIBILITY_TOLERANCE,
    seed: int = 0,
    executor: Executor | None = None,
) -> ConvexifiedRegion:
    """Project the iterate onto every keep-out zone and replace each zone by its supporting halfspace.

    Obstacle cuts are generated at every unpinned step. In penalized mode each dynamics row also gets a
    cut. ``executor`` may spread the projections over workers; cut order does not depend on it.

    Raises:
        InfeasibleIterateError: Some row is violated by more than ``tolerance``.
    """
    problem.check_shape(z)
    _check_iterate(z, problem, mode, tolerance)

    jobs: list[tuple[CutLabel, Callable[[], HalfspaceCut]]] = [
        (label, _obstacle_cut_job(z, problem, label, seed)) for label in _obstacle_labels(problem)
    ]
    if mode is PenaltyMode.PENALIZED:
        jobs.extend((label, _dynamics_cut_job(z, problem, label)) for label in _dynamics_labels(problem))

    cuts = tuple(_run_jobs((job for _, job in jobs), executor))
    logger.debug("convexified %d rows at the current iterate", len(cuts))
    return ConvexifiedRegion(
        cuts=cuts, labels=tuple(label for label, _ in jobs), problem=problem, mode=mode, source_iterate=z
    )


def contains(region: ConvexifiedRegion, y: StackedVariable, tolerance: float = MEMBERSHIP_TOLERANCE) -> bool:
    region.problem.check_shape(y)
    if region.cuts and float(np.min(region.slacks(y))) < -tolerance:
        return False
    if not region.domain.contains(y, tolerance):
        return False
    if region.mode is PenaltyMode.HARD_EQUALITY:
        return bool(np.max(np.abs(dynamics_defect(y, region.problem)), initial=0.0) <= tolerance)
    return True


def obstacle_clearance(y: StackedVariable, problem: ProblemDefinition) -> float:
    """Smallest keep-out row value over all steps; ``inf`` without obstacles."""
    rows = ConstraintStack(problem).obstacle_rows(y)
    return float(rows.min()) if rows.size else float("inf")


def is_feasible(
    y: StackedVariable, problem: ProblemDefinition, mode: PenaltyMode, tolerance: float = FEASIBILITY_TOLERANCE
) -> bool:
    """Membership in ``F``: keep-out rows, domain, and dynamics (equalities or ``g >= 0`` per mode)."""
    if obstacle_clearance(y, problem) < -tolerance:
        return False
    if not Domain(problem).contains(y, tolerance):
        return False
    defect = dynamics_defect(y, problem)
    if mode is PenaltyMode.HARD_EQUALITY:
        return bool(np.max(np.abs(defect), initial=0.0) <= tolerance)
    return bool(np.min(defect, initial=0.0) >= -tolerance)


def _check_iterate(z: StackedVariable, problem: ProblemDefinition, mode: PenaltyMode, tolerance: float) -> None:
    for label in _obstacle_labels(problem):
        value = membership_value(problem.obstacles[label.index], problem.obstacle_point(z, label.step))
        if value < -tolerance:
            raise InfeasibleIterateError(
                f"state at step {label.step} is inside obstacle {label.index} (row value {value:.3e})"
            )
    if mode is PenaltyMode.PENALIZED:
        defect = dynamics_defect(z, problem)
        if defect.size and defect.min() < -tolerance:
            worst = int(np.argmin(defect))
            raise InfeasibleIterateError(f"dynamics row {worst} is negative ({defect[worst]:.3e})")


def _obstacle_labels(problem: ProblemDefinition) -> list[CutLabel]:
    return [
        CutLabel(kind="obstacle", step=step, index=index)
        for step in problem.free_steps
        for index in range(problem.obstacle_rows_per_step)
    ]


def _dynamics_labels(problem: ProblemDefinition) -> list[CutLabel]:
    return [
        CutLabel(kind="dynamics", step=step, index=component)
        for step in range(problem.horizon - 1)
        for component in range(problem.state_dim)
    ]


def _run_jobs(jobs: Iterable[Callable[[], HalfspaceCut]], executor: Executor | None) -> Iterator[HalfspaceCut]:
    if executor is None:
        return (job() for job in jobs)
    return executor.map(lambda job: job(), jobs)


def obstacle_cut(z: StackedVariable, problem: ProblemDefinition, label: CutLabel, seed: int) -> HalfspaceCut:
    """The obstacle cut for ``label`` lifted into stacked coordinates."""
    obstacle = problem.obstacles[label.index]
    local = cut_at(
        obstacle,
        problem.obstacle_point(z, label.step),
        tie_break=label.step * problem.obstacle_rows_per_step + label.index,
        seed=seed,
    )
    indices = problem.layout.state_indices(label.step, problem.obstacle_state_indices)
    return local.lifted(problem.layout.size, indices)


def _obstacle_cut_job(
    z: StackedVariable, problem: ProblemDefinition, label: CutLabel, seed: int
) -> Callable[[], HalfspaceCut]:
    return lambda: obstacle_cut(z, problem, label, seed)


def _dynamics_cut_job(z: StackedVariable, problem: ProblemDefinition, label: CutLabel) -> Callable[[], HalfspaceCut]:
    return lambda: dynamics_cut(z, problem, label)


def dynamics_row(problem: ProblemDefinition, label: CutLabel) -> tuple[FloatArray, Callable[[FloatArray], float]]:
    """Stacked indices of ``(x_i, u_i, x_{i+1})`` and the row ``g_{i,j}`` as a function of that local block."""
    layout = problem.layout
    step, component = label.step, label.index
    n, m = problem.state_dim, problem.control_dim
    indices = np.concatenate(
        [layout.state_indices(step), layout.control_indices(step), layout.state_indices(step + 1)]
    )

    def row(w: FloatArray) -> float:
        x, u, x_next = w[:n], w[n : n + m], w[n + m :]
        return float(problem.dynamics.increment(x, u)[component] - x_next[component] + x[component])

    return indices, row


def dynamics_row_gradient(problem: ProblemDefinition, label: CutLabel, w: ArrayLike) -> FloatArray:
    n, m = problem.state_dim, problem.control_dim
    local = np.asarray(w, dtype=np.float64)
    partial = problem.dynamics.increment_jacobian(local[:n], local[n : n + m])[label.index]
    gradient = np.zeros(2 * n + m)
    gradient[: n + m] = partial
    gradient[label.index] += 1.0
    gradient[n + m + label.index] -= 1.0
    return gradient


def dynamics_cut(z: StackedVariable, problem: ProblemDefinition, label: CutLabel) -> HalfspaceCut:
    """Cut for the reverse-convex row ``g_{i,j}(y) >= 0``.

    Affine rows are their own cut. For convex rows the local block is projected onto the sublevel set
    ``{g <= 0}`` and the supporting halfspace at the projection is returned; a block on or inside that set
    is cut by the linearization at the block itself.
    """
    indices, row = dynamics_row(problem, label)
    w0 = z.data[indices]
    size = problem.layout.size

    match problem.dynamics:
        case LinearDynamics():
            gradient = dynamics_row_gradient(problem, label, w0)
            return HalfspaceCut(a=gradient, b=row(w0) - float(gradient @ w0)).lifted(size, indices)
        case ConvexDynamics():
            value = row(w0)
            if value > MEMBERSHIP_TOLERANCE:
                boundary = _project_onto_sublevel(problem, label, w0, row)
                normal = w0 - boundary
                if float(np.linalg.norm(normal)) > 1e-9:
                    return HalfspaceCut(a=normal, b=-float(normal @ boundary)).lifted(size, indices)
            gradient = dynamics_row_gradient(problem, label, w0)
            return HalfspaceCut(a=gradient, b=value - float(gradient @ w0)).lifted(size, indices)
    raise TypeError(f"unsupported dynamics {type(problem.dynamics).__name__}")


def _project_onto_sublevel(
    problem: ProblemDefinition, label: CutLabel, w0: FloatArray, row: Callable[[FloatArray], float]
) -> FloatArray:
    result = minimize(
        lambda w: float(np.sum((w - w0) ** 2)),
        w0,
        jac=lambda w: 2.0 * (w - w0),
        method="SLSQP",
        constraints=(
            {
                "type": "ineq",
                "fun": lambda w: -row(w),
                "jac": lambda w: -dynamics_row_gradient(problem, label, w),
            },
        ),
        options={"maxiter": 200, "ftol": 1e-14},
    )
    if not result.success:
        logger.warning("dynamics row projection at step %d did not converge: %s", label.step, result.message)
    return np.asarray(result.x, dtype=np.float64)
