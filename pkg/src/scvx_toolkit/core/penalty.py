"""Constraint rows ``q(y) = (g(y), h(y))`` and the exact penalty objective ``P(y) = J(y) + λ‖g(y)‖₁``."""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from scvx_toolkit.core.problem import CostModel, ProblemDefinition
from scvx_toolkit.core.variables import StackedVariable
from scvx_toolkit.geometry import FloatArray, membership_gradient, membership_value


class PenaltyMode(Enum):
    HARD_EQUALITY = "hard_equality"
    PENALIZED = "penalized"


@dataclass(slots=True, frozen=True)
class PenaltyObjective:
    """The objective minimized by every subproblem.

    In ``HARD_EQUALITY`` mode the dynamics stay as equality constraints and ``P = J``; this needs linear
    dynamics. In ``PENALIZED`` mode ``P = J + λ‖g‖₁`` and the subproblem keeps ``g >= 0``.
    """

    base_cost: CostModel
    penalty_weight: float = 0.0
    mode: PenaltyMode = PenaltyMode.HARD_EQUALITY

    def __post_init__(self) -> None:
        if not self.penalty_weight >= 0.0:
            raise ValueError("penalty_weight must be nonnegative")

    @classmethod
    def for_problem(
        cls, problem: ProblemDefinition, *, penalty_weight: float = 0.0, mode: PenaltyMode | None = None
    ) -> "PenaltyObjective":
        """Linear dynamics default to hard equalities, componentwise-convex dynamics to the penalty."""
        if mode is None:
            mode = PenaltyMode.HARD_EQUALITY if problem.dynamics.is_linear else PenaltyMode.PENALIZED
        if mode is PenaltyMode.HARD_EQUALITY and not problem.dynamics.is_linear:
            raise ValueError("hard_equality mode needs linear dynamics; use penalized mode")
        return cls(base_cost=problem.cost, penalty_weight=penalty_weight, mode=mode)

    def with_weight(self, penalty_weight: float) -> "PenaltyObjective":
        return PenaltyObjective(base_cost=self.base_cost, penalty_weight=penalty_weight, mode=self.mode)


def dynamics_defect(y: StackedVariable, problem: ProblemDefinition) -> FloatArray:
    """The stacked ``g(y)`` with ``g_i = f(x_i, u_i) - x_{i+1} + x_i``; zero exactly on dynamic trajectories."""
    problem.check_shape(y)
    states, controls = y.states, y.controls
    return np.concatenate(
        [
            problem.dynamics.increment(states[i], controls[i]) - states[i + 1] + states[i]
            for i in range(problem.horizon - 1)
        ]
    )


def evaluate_cost(y: StackedVariable, problem: ProblemDefinition) -> float:
    problem.check_shape(y)
    return problem.cost.evaluate(y)


def evaluate_penalty(y: StackedVariable, problem: ProblemDefinition, objective: PenaltyObjective) -> float:
    problem.check_shape(y)
    cost = objective.base_cost.evaluate(y)
    if objective.mode is PenaltyMode.HARD_EQUALITY or objective.penalty_weight == 0.0:
        return cost
    return cost + objective.penalty_weight * float(np.sum(np.abs(dynamics_defect(y, problem))))


@dataclass(slots=True, frozen=True, eq=False)
class ConstraintStack:
    """Row evaluators over the stacked vector.

    Obstacle rows are ordered step-major: row ``i * s + j`` is obstacle ``j`` at step ``i``.
    """

    problem: ProblemDefinition

    @property
    def dynamics_size(self) -> int:
        return self.problem.state_dim * (self.problem.horizon - 1)

    @property
    def obstacle_size(self) -> int:
        return self.problem.obstacle_rows_per_step * self.problem.horizon

    @property
    def size(self) -> int:
        """``M = sT + n(T - 1)``."""
        return self.dynamics_size + self.obstacle_size

    def dynamics_rows(self, y: StackedVariable) -> FloatArray:
        return dynamics_defect(y, self.problem)

    def obstacle_rows(self, y: StackedVariable) -> FloatArray:
        self.problem.check_shape(y)
        return np.array(
            [
                membership_value(obstacle, self.problem.obstacle_point(y, step))
                for step in range(self.problem.horizon)
                for obstacle in self.problem.obstacles
            ],
            dtype=np.float64,
        )

    def combined(self, y: StackedVariable) -> FloatArray:
        return np.concatenate([self.dynamics_rows(y), self.obstacle_rows(y)])

    def jacobian(self, y: StackedVariable) -> FloatArray:
        """Generalized Jacobian of ``combined`` as an ``M × N`` matrix."""
        problem = self.problem
        problem.check_shape(y)
        layout = problem.layout
        n = problem.state_dim
        matrix = np.zeros((self.size, layout.size))
        for i in range(problem.horizon - 1):
            rows = slice(i * n, (i + 1) * n)
            partial = problem.dynamics.increment_jacobian(y.state_at(i), y.control_at(i))
            matrix[rows, layout.state_slice(i)] = partial[:, :n] + np.eye(n)
            matrix[rows, layout.control_slice(i)] = partial[:, n:]
            matrix[rows, layout.state_slice(i + 1)] -= np.eye(n)
        row = self.dynamics_size
        for step in range(problem.horizon):
            columns = layout.state_indices(step, problem.obstacle_state_indices)
            point = problem.obstacle_point(y, step)
            for obstacle in problem.obstacles:
                matrix[row, columns] = membership_gradient(obstacle, point)
                row += 1
        return matrix

