"""The discrete-time optimal control problem with keep-out zones."""

from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Literal, TypeAlias

import numpy as np
from numpy.typing import ArrayLike

from scvx_toolkit.core.dynamics import DynamicsModel
from scvx_toolkit.core.variables import DimensionMismatchError, StackedVariable, StackLayout
from scvx_toolkit.geometry import ConvexSet, FloatArray, is_bounded, membership_value
from scvx_toolkit.geometry.sets import as_vector


class EndpointInsideObstacleError(ValueError):
    """Raised when a pinned boundary state lies inside a keep-out zone."""


@dataclass(slots=True, frozen=True)
class MinimumFuelCost:
    """``J(y) = Σ_i ‖u_i‖₂``."""

    kind: Literal["minimum_fuel"] = "minimum_fuel"

    @property
    def conic_representable(self) -> bool:
        return True

    def evaluate(self, y: StackedVariable) -> float:
        return float(np.sum(np.linalg.norm(y.controls, axis=1)))


@dataclass(slots=True, frozen=True, eq=False)
class LinearCost:
    """``J(y) = wᵀy``."""

    weights: FloatArray
    kind: Literal["linear"] = "linear"

    def __post_init__(self) -> None:
        object.__setattr__(self, "weights", as_vector(self.weights, "weights"))

    @property
    def conic_representable(self) -> bool:
        return True

    def evaluate(self, y: StackedVariable) -> float:
        if self.weights.shape != y.data.shape:
            raise DimensionMismatchError(
                f"weights have length {self.weights.size}, y has {y.data.size}", field="weights"
            )
        return float(self.weights @ y.data)


@dataclass(slots=True, frozen=True, eq=False)
class CustomCost:
    """An arbitrary convex cost known only through its evaluator; usable for scoring but not in subproblems."""

    evaluator: Callable[[StackedVariable], float]
    kind: Literal["custom"] = "custom"

    @property
    def conic_representable(self) -> bool:
        return False

    def evaluate(self, y: StackedVariable) -> float:
        return float(self.evaluator(y))


CostModel: TypeAlias = MinimumFuelCost | LinearCost | CustomCost


@dataclass(slots=True, frozen=True)
class NormBound:
    """``‖v[indices]‖₂ <= bound`` at the given steps (all steps when ``steps`` is ``None``)."""

    indices: tuple[int, ...]
    bound: float
    steps: tuple[int, ...] | None = None
    kind: Literal["norm_bound"] = "norm_bound"

    def __post_init__(self) -> None:
        if not self.indices:
            raise ValueError("indices must not be empty")
        if not self.bound > 0.0:
            raise ValueError("bound must be positive")

    def violation(self, v: FloatArray) -> float:
        return max(0.0, float(np.linalg.norm(v[list(self.indices)])) - self.bound)


@dataclass(slots=True, frozen=True, eq=False)
class ThrustCone:
    """``axisᵀu >= ‖u‖₂ cos(half_angle)``, with ``half_angle`` in radians."""

    axis: FloatArray
    half_angle: float
    steps: tuple[int, ...] | None = None
    kind: Literal["thrust_cone"] = "thrust_cone"

    def __post_init__(self) -> None:
        axis = np.array(self.axis, dtype=np.float64)
        norm = float(np.linalg.norm(axis))
        if axis.ndim != 1 or norm == 0.0:
            raise ValueError("axis must be a nonzero vector")
        axis = axis / norm
        axis.setflags(write=False)
        object.__setattr__(self, "axis", axis)
        if not 0.0 < self.half_angle < 0.5 * np.pi:
            raise ValueError("half_angle must lie in (0, pi/2)")

    def violation(self, v: FloatArray) -> float:
        return max(0.0, float(np.linalg.norm(v)) * np.cos(self.half_angle) - float(self.axis @ v))


@dataclass(slots=True, frozen=True, eq=False)
class BoxBound:
    """``lower <= v <= upper`` componentwise; infinite entries are unconstrained."""

    lower: FloatArray
    upper: FloatArray
    steps: tuple[int, ...] | None = None
    kind: Literal["box"] = "box"

    def __post_init__(self) -> None:
        lower = np.array(self.lower, dtype=np.float64)
        upper = np.array(self.upper, dtype=np.float64)
        if lower.ndim != 1 or lower.shape != upper.shape:
            raise ValueError("lower and upper must be vectors of one length")
        if np.any(lower > upper):
            raise ValueError("lower must not exceed upper")
        lower.setflags(write=False)
        upper.setflags(write=False)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    def violation(self, v: FloatArray) -> float:
        return float(max(0.0, np.max(self.lower - v), np.max(v - self.upper)))


AdmissibleSet: TypeAlias = NormBound | ThrustCone | BoxBound


def applies_at(constraint: AdmissibleSet, step: int) -> bool:
    return constraint.steps is None or step in constraint.steps


@dataclass(slots=True, frozen=True, eq=False)
class BoundaryConditions:
    """Pinned initial and final states; ``None`` leaves that end free."""

    initial_state: FloatArray | None = None
    final_state: FloatArray | None = None

    def __post_init__(self) -> None:
        if self.initial_state is not None:
            object.__setattr__(self, "initial_state", as_vector(self.initial_state, "initial_state"))
        if self.final_state is not None:
            object.__setattr__(self, "final_state", as_vector(self.final_state, "final_state"))

    def pins(self, horizon: int) -> dict[int, FloatArray]:
        pinned: dict[int, FloatArray] = {}
        if self.initial_state is not None:
            pinned[0] = self.initial_state
        if self.final_state is not None:
            pinned[horizon - 1] = self.final_state
        return pinned


@dataclass(slots=True, frozen=True, eq=False)
class ProblemDefinition:
    """Minimize ``J(y)`` over trajectories obeying the dynamics, the admissible sets and the keep-out zones.

    Args:
        horizon: Number of temporal points ``T``; controls act on the ``T - 1`` intervals.
        state_dim: ``n``.
        control_dim: ``m``.
        dynamics: Linear ZOH or componentwise-convex dynamics.
        boundary: Pinned endpoint states.
        cost: The objective ``J``.
        obstacles: Bounded keep-out zones; each contributes one scalar row per step.
        obstacle_state_indices: Components of ``x_i`` that the obstacles live in (the position block).
        state_sets: Constraints on ``x_i``.
        control_sets: Constraints on ``u_i``.
        time_step: Interval length, used only to report a time axis.
    """

    horizon: int
    state_dim: int
    control_dim: int
    dynamics: DynamicsModel
    boundary: BoundaryConditions
    cost: CostModel = field(default_factory=MinimumFuelCost)
    obstacles: tuple[ConvexSet, ...] = ()
    obstacle_state_indices: tuple[int, ...] = ()
    state_sets: tuple[AdmissibleSet, ...] = ()
    control_sets: tuple[AdmissibleSet, ...] = ()
    time_step: float = 1.0

    def __post_init__(self) -> None:
        layout = StackLayout(self.horizon, self.state_dim, self.control_dim)
        if (self.dynamics.state_dim, self.dynamics.control_dim) != (self.state_dim, self.control_dim):
            raise DimensionMismatchError(
                f"dynamics act on (n, m) = {(self.dynamics.state_dim, self.dynamics.control_dim)}, "
                f"problem declares {(self.state_dim, self.control_dim)}",
                field="dynamics",
            )
        for step, state in self.boundary.pins(layout.horizon).items():
            if state.shape != (self.state_dim,):
                raise DimensionMismatchError(f"boundary state has length {state.size}", index=step, field="boundary")
        if not self.time_step > 0.0:
            raise ValueError("time_step must be positive")
        if isinstance(self.cost, LinearCost) and self.cost.weights.size != layout.size:
            raise DimensionMismatchError(f"linear cost must have {layout.size} weights", field="cost")
        self._check_sets(self.state_sets, self.state_dim, self.horizon, "state_sets")
        self._check_sets(self.control_sets, self.control_dim, self.horizon - 1, "control_sets")
        self._check_obstacles()

    def _check_sets(self, sets: tuple[AdmissibleSet, ...], dim: int, steps: int, name: str) -> None:
        for index, constraint in enumerate(sets):
            match constraint:
                case NormBound(indices=indices):
                    if any(not 0 <= k < dim for k in indices):
                        raise DimensionMismatchError(f"{name}[{index}] indexes outside 0..{dim - 1}", index=index)
                case ThrustCone(axis=axis):
                    if axis.size != dim:
                        raise DimensionMismatchError(f"{name}[{index}] axis must have length {dim}", index=index)
                case BoxBound(lower=lower):
                    if lower.size != dim:
                        raise DimensionMismatchError(f"{name}[{index}] bounds must have length {dim}", index=index)
            if constraint.steps is not None and any(not 0 <= s < steps for s in constraint.steps):
                raise ValueError(f"{name}[{index}] names a step outside 0..{steps - 1}")

    def _check_obstacles(self) -> None:
        if self.obstacles and not self.obstacle_state_indices:
            raise ValueError("obstacle_state_indices must be given when obstacles are present")
        if any(not 0 <= k < self.state_dim for k in self.obstacle_state_indices):
            raise DimensionMismatchError("obstacle_state_indices exceed the state dimension", field="obstacles")
        for index, obstacle in enumerate(self.obstacles):
            if not is_bounded(obstacle):
                raise ValueError(f"obstacle {index} is unbounded; keep-out zones must be bounded")
            if obstacle.dim != len(self.obstacle_state_indices):
                raise DimensionMismatchError(
                    f"obstacle {index} has dimension {obstacle.dim}, expected {len(self.obstacle_state_indices)}",
                    index=index,
                    field="obstacles",
                )
            for step, state in self.boundary.pins(self.horizon).items():
                if membership_value(obstacle, state[list(self.obstacle_state_indices)]) < -1e-9:
                    raise EndpointInsideObstacleError(f"boundary state at step {step} lies inside obstacle {index}")

    @property
    def layout(self) -> StackLayout:
        return StackLayout(self.horizon, self.state_dim, self.control_dim)

    @property
    def obstacle_rows_per_step(self) -> int:
        """``s``: scalar keep-out rows per temporal point."""
        return len(self.obstacles)

    @property
    def pinned_steps(self) -> tuple[int, ...]:
        return tuple(sorted(self.boundary.pins(self.horizon)))

    @property
    def free_steps(self) -> tuple[int, ...]:
        pinned = set(self.pinned_steps)
        return tuple(step for step in range(self.horizon) if step not in pinned)

    def with_obstacles(self, obstacles: tuple[ConvexSet, ...]) -> "ProblemDefinition":
        return ProblemDefinition(
            horizon=self.horizon,
            state_dim=self.state_dim,
            control_dim=self.control_dim,
            dynamics=self.dynamics,
            boundary=self.boundary,
            cost=self.cost,
            obstacles=obstacles,
            obstacle_state_indices=self.obstacle_state_indices,
            state_sets=self.state_sets,
            control_sets=self.control_sets,
            time_step=self.time_step,
        )

    def obstacle_point(self, y: StackedVariable, step: int) -> FloatArray:
        return y.state_at(step)[list(self.obstacle_state_indices)]

    def check_shape(self, y: StackedVariable) -> None:
        if (y.horizon, y.state_dim, y.control_dim) != (self.horizon, self.state_dim, self.control_dim):
            raise DimensionMismatchError(
                f"trajectory has (T, n, m) = {(y.horizon, y.state_dim, y.control_dim)}, "
                f"problem has {(self.horizon, self.state_dim, self.control_dim)}",
                field="y",
            )

    def time_grid(self) -> FloatArray:
        return self.time_step * np.arange(self.horizon, dtype=np.float64)

    def stacked(self, data: ArrayLike) -> StackedVariable:
        return StackedVariable(
            data=np.asarray(data), horizon=self.horizon, state_dim=self.state_dim, control_dim=self.control_dim
        )
