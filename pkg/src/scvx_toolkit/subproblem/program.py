"""Translation of a convexified region and its objective into a second-order-cone program."""

import hashlib
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from scvx_toolkit.core import (
    AdmissibleSet,
    BoxBound,
    ConstraintStack,
    CustomCost,
    LinearCost,
    LinearDynamics,
    MinimumFuelCost,
    NormBound,
    PenaltyMode,
    PenaltyObjective,
    ProblemDefinition,
    StackedVariable,
    StackLayout,
    ThrustCone,
    applies_at,
    dynamics_defect,
)
from scvx_toolkit.geometry import FloatArray

if TYPE_CHECKING:
    from scvx_toolkit.convexify.region import ConvexifiedRegion

TEXT_FORMAT_HEADER = "# scvx-conic 1"


class UnsupportedCostError(ValueError):
    """Raised when the cost has no second-order-cone representation."""


@dataclass(slots=True, frozen=True)
class VariableLayout:
    """Blocks of the program's variable vector ``v = (y, t, s⁺, s⁻, τ)``.

    ``t`` are fuel epigraphs, ``s±`` the slack pairs of the ℓ1 penalty, ``τ`` the distance epigraph of a
    least-distance program.
    """

    y_size: int
    fuel_size: int = 0
    slack_size: int = 0
    epigraph_size: int = 0

    @property
    def fuel_offset(self) -> int:
        return self.y_size

    @property
    def slack_offset(self) -> int:
        return self.y_size + self.fuel_size

    @property
    def epigraph_offset(self) -> int:
        return self.slack_offset + 2 * self.slack_size

    @property
    def size(self) -> int:
        return self.epigraph_offset + self.epigraph_size


@dataclass(slots=True, frozen=True, eq=False)
class SocBlock:
    """``‖A v + b‖₂ <= cᵀv + d``."""

    label: str
    A: FloatArray
    b: FloatArray
    c: FloatArray
    d: float

    @property
    def cone_dim(self) -> int:
        return int(self.A.shape[0]) + 1


@dataclass(slots=True, frozen=True, eq=False)
class ConicProgram:
    """
    minimize ``costᵀv + offset`` subject to ``E v = e``, ``G v <= h`` and the second-order cones.

    ``scaling`` is a diagonal variable scaling applied by backends as ``v = scaling ⊙ w``.
    """

    layout: VariableLayout
    stack_layout: StackLayout
    linear_cost: FloatArray
    cost_offset: float
    eq_matrix: FloatArray
    eq_vector: FloatArray
    eq_labels: tuple[str, ...]
    ineq_matrix: FloatArray
    ineq_vector: FloatArray
    ineq_labels: tuple[str, ...]
    soc_blocks: tuple[SocBlock, ...]
    scaling: FloatArray = field(default_factory=lambda: np.ones(0))

    def __post_init__(self) -> None:
        size = self.layout.size
        if self.scaling.size == 0:
            object.__setattr__(self, "scaling", np.ones(size))
        if self.linear_cost.shape != (size,):
            raise ValueError("linear_cost does not match the variable layout")
        if self.eq_matrix.shape[1] != size or self.ineq_matrix.shape[1] != size:
            raise ValueError("constraint matrices do not match the variable layout")
        for block in self.soc_blocks:
            if block.A.shape[1] != size or block.c.shape != (size,) or block.cone_dim < 2:
                raise ValueError(f"cone {block.label} is malformed")

    def extract(self, x: FloatArray) -> StackedVariable:
        layout = self.stack_layout
        return StackedVariable(
            data=np.array(x[: self.layout.y_size]),
            horizon=layout.horizon,
            state_dim=layout.state_dim,
            control_dim=layout.control_dim,
        )

    def to_text(self) -> str:
        """Plain-text dump, one line per constraint.

        Sparse rows are written as ``index:value`` pairs; every float uses 17 significant digits.
        """
        lines = [
            TEXT_FORMAT_HEADER,
            f"variables {self.layout.size} equalities {len(self.eq_labels)} "
            f"inequalities {len(self.ineq_labels)} cones {len(self.soc_blocks)}",
            f"blocks y {self.layout.y_size} fuel {self.layout.fuel_size} "
            f"slack {self.layout.slack_size} epigraph {self.layout.epigraph_size}",
            f"cost {_sparse(self.linear_cost)} offset {_fmt(self.cost_offset)}",
            f"scaling {' '.join(_fmt(s) for s in self.scaling)}",
        ]
        for label, row, rhs in zip(self.eq_labels, self.eq_matrix, self.eq_vector):
            lines.append(f"eq {label} {_sparse(row)} = {_fmt(rhs)}")
        for label, row, rhs in zip(self.ineq_labels, self.ineq_matrix, self.ineq_vector):
            lines.append(f"ineq {label} {_sparse(row)} <= {_fmt(rhs)}")
        for block in self.soc_blocks:
            rows = " | ".join(f"{_sparse(row)} + {_fmt(offset)}" for row, offset in zip(block.A, block.b))
            bound = f"{_sparse(block.c)} + {_fmt(block.d)}"
            lines.append(f"soc {block.label} dim {block.cone_dim} | {rows} | bound {bound}")
        return "\n".join(lines) + "\n"

    def fingerprint(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _sparse(row: FloatArray) -> str:
    entries = [f"{i}:{_fmt(row[i])}" for i in np.flatnonzero(row)]
    return "[" + " ".join(entries) + "]"


class _ProgramBuilder:
    __slots__ = ("layout", "cost", "offset", "eq_rows", "ineq_rows", "cones")

    def __init__(self, layout: VariableLayout) -> None:
        self.layout = layout
        self.cost = np.zeros(layout.size)
        self.offset = 0.0
        self.eq_rows: list[tuple[str, FloatArray, float]] = []
        self.ineq_rows: list[tuple[str, FloatArray, float]] = []
        self.cones: list[SocBlock] = []

    def row(self) -> FloatArray:
        return np.zeros(self.layout.size)

    def selector(self, indices: np.ndarray) -> FloatArray:
        matrix = np.zeros((len(indices), self.layout.size))
        matrix[np.arange(len(indices)), indices] = 1.0
        return matrix

    def equality(self, label: str, row: FloatArray, rhs: float) -> None:
        self.eq_rows.append((label, row, float(rhs)))

    def inequality(self, label: str, row: FloatArray, rhs: float) -> None:
        self.ineq_rows.append((label, row, float(rhs)))

    def cone(self, label: str, A: FloatArray, b: FloatArray, c: FloatArray, d: float) -> None:
        self.cones.append(SocBlock(label=label, A=A, b=b, c=c, d=float(d)))

    def finish(self, stack_layout: StackLayout) -> ConicProgram:
        def pack(rows: list[tuple[str, FloatArray, float]]) -> tuple[FloatArray, FloatArray, tuple[str, ...]]:
            if not rows:
                return np.zeros((0, self.layout.size)), np.zeros(0), ()
            return (
                np.vstack([r for _, r, _ in rows]),
                np.array([rhs for _, _, rhs in rows]),
                tuple(label for label, _, _ in rows),
            )

        eq_matrix, eq_vector, eq_labels = pack(self.eq_rows)
        ineq_matrix, ineq_vector, ineq_labels = pack(self.ineq_rows)
        return ConicProgram(
            layout=self.layout,
            stack_layout=stack_layout,
            linear_cost=self.cost,
            cost_offset=self.offset,
            eq_matrix=eq_matrix,
            eq_vector=eq_vector,
            eq_labels=eq_labels,
            ineq_matrix=ineq_matrix,
            ineq_vector=ineq_vector,
            ineq_labels=ineq_labels,
            soc_blocks=tuple(self.cones),
        )


def build(objective: PenaltyObjective, region: "ConvexifiedRegion", problem: ProblemDefinition) -> ConicProgram:
    """The subproblem ``min P(y)`` over ``F_z`` as a second-order-cone program.

    The minimum-fuel cost becomes ``Σ t_i`` with ``‖u_i‖ <= t_i``. In penalized mode with ``λ > 0`` the
    term ``λ‖g‖₁`` is modelled by slack pairs on the first-order model of ``g`` at the region's source
    iterate. Identical inputs yield bit-identical programs.

    Raises:
        UnsupportedCostError: The cost is only available as an opaque evaluator.
    """
    layout = problem.layout
    fuel_size = problem.horizon - 1 if isinstance(objective.base_cost, MinimumFuelCost) else 0
    penalized = objective.mode is PenaltyMode.PENALIZED and objective.penalty_weight > 0.0
    slack_size = problem.state_dim * (problem.horizon - 1) if penalized else 0
    builder = _ProgramBuilder(VariableLayout(y_size=layout.size, fuel_size=fuel_size, slack_size=slack_size))

    match objective.base_cost:
        case MinimumFuelCost():
            for step in range(problem.horizon - 1):
                fuel = builder.row()
                fuel[builder.layout.fuel_offset + step] = 1.0
                builder.cost[builder.layout.fuel_offset + step] = 1.0
                control = builder.selector(layout.control_indices(step))
                builder.cone(f"fuel[{step}]", control, np.zeros(problem.control_dim), fuel, 0.0)
        case LinearCost(weights=weights):
            builder.cost[: layout.size] = weights
        case CustomCost():
            raise UnsupportedCostError("custom costs cannot be written as a conic program")

    if penalized:
        _add_penalty_slacks(builder, objective, region, problem)
    _add_common(builder, region, problem, objective.mode)
    return builder.finish(layout)


def build_least_distance(
    region: "ConvexifiedRegion", problem: ProblemDefinition, target: StackedVariable
) -> ConicProgram:
    """``min ‖y - target‖₂`` over the region, as ``min τ`` with one cone."""
    layout = problem.layout
    builder = _ProgramBuilder(VariableLayout(y_size=layout.size, epigraph_size=1))
    epigraph = builder.row()
    epigraph[builder.layout.epigraph_offset] = 1.0
    builder.cost[builder.layout.epigraph_offset] = 1.0
    builder.cone("distance", builder.selector(np.arange(layout.size)), -target.data, epigraph, 0.0)
    _add_common(builder, region, problem, region.mode)
    return builder.finish(layout)


def _add_penalty_slacks(
    builder: _ProgramBuilder, objective: PenaltyObjective, region: "ConvexifiedRegion", problem: ProblemDefinition
) -> None:
    # s⁺ - s⁻ = g(z) + G (y - z), s± >= 0
    z = region.source_iterate
    stack = ConstraintStack(problem)
    jacobian = stack.jacobian(z)[: stack.dynamics_size]
    defect = dynamics_defect(z, problem)
    offset = builder.layout.slack_offset
    count = builder.layout.slack_size
    builder.cost[offset : offset + 2 * count] = objective.penalty_weight
    for r in range(count):
        row = builder.row()
        row[: builder.layout.y_size] = -jacobian[r]
        row[offset + r] = 1.0
        row[offset + count + r] = -1.0
        builder.equality(f"penalty[{r}]", row, float(defect[r] - jacobian[r] @ z.data))
    for r in range(2 * count):
        row = builder.row()
        row[offset + r] = -1.0
        builder.inequality(f"slack_sign[{r}]", row, 0.0)


def _add_common(
    builder: _ProgramBuilder, region: "ConvexifiedRegion", problem: ProblemDefinition, mode: PenaltyMode
) -> None:
    layout = problem.layout
    y_size = layout.size

    for step, state in problem.boundary.pins(problem.horizon).items():
        for k, index in enumerate(layout.state_indices(step)):
            row = builder.row()
            row[index] = 1.0
            builder.equality(f"pin[{step}][{k}]", row, float(state[k]))

    if mode is PenaltyMode.HARD_EQUALITY:
        dynamics = problem.dynamics
        if not isinstance(dynamics, LinearDynamics):
            raise ValueError("hard_equality mode needs linear dynamics")
        n = problem.state_dim
        for step in range(problem.horizon - 1):
            for j in range(n):
                row = builder.row()
                row[layout.state_indices(step)] = dynamics.A[j]
                row[layout.control_indices(step)] = dynamics.B[j]
                row[layout.state_indices(step + 1)[j]] -= 1.0
                builder.equality(f"dynamics[{step}][{j}]", row, -float(dynamics.affine_term[j]))

    for cut, label in zip(region.cuts, region.labels):
        row = builder.row()
        row[:y_size] = -cut.a
        builder.inequality(f"cut[{label.kind}:{label.step}:{label.index}]", row, cut.b)

    for step in range(problem.horizon):
        for index, constraint in enumerate(problem.state_sets):
            if applies_at(constraint, step):
                _add_admissible(builder, f"state_sets[{index}]", step, constraint, layout.state_indices(step))
    for step in range(problem.horizon - 1):
        for index, constraint in enumerate(problem.control_sets):
            if applies_at(constraint, step):
                _add_admissible(builder, f"control_sets[{index}]", step, constraint, layout.control_indices(step))


def _add_admissible(
    builder: _ProgramBuilder, name: str, step: int, constraint: AdmissibleSet, block: np.ndarray
) -> None:
    label = f"{name}.{constraint.kind}[{step}]"
    match constraint:
        case NormBound(indices=indices, bound=limit):
            selected = block[list(indices)]
            builder.cone(label, builder.selector(selected), np.zeros(len(selected)), builder.row(), limit)
        case ThrustCone(axis=axis, half_angle=half_angle):
            # ‖u‖ <= axisᵀu / cos θ
            scaled_axis = builder.row()
            scaled_axis[block] = axis / np.cos(half_angle)
            builder.cone(label, builder.selector(block), np.zeros(block.size), scaled_axis, 0.0)
        case BoxBound(lower=lower, upper=upper):
            for k, index in enumerate(block):
                if np.isfinite(upper[k]):
                    row = builder.row()
                    row[index] = 1.0
                    builder.inequality(f"{label}[{k}]:upper", row, float(upper[k]))
                if np.isfinite(lower[k]):
                    row = builder.row()
                    row[index] = -1.0
                    builder.inequality(f"{label}[{k}]:lower", row, -float(lower[k]))
