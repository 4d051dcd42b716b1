import dataclasses

import numpy as np
import pytest

from scvx_toolkit.convexify import project_and_convexify
from scvx_toolkit.core import (
    BoxBound,
    CustomCost,
    LinearCost,
    PenaltyMode,
    PenaltyObjective,
    ThrustCone,
    dynamics_defect,
    evaluate_cost,
)
from scvx_toolkit.geometry import Ball
from scvx_toolkit.subproblem import (
    BackendResult,
    BackendSettings,
    ConicProgram,
    CvxpyBackend,
    SolveStatus,
    SubproblemError,
    UnsupportedCostError,
    VariableLayout,
    build,
    build_least_distance,
    solve,
)
from scvx_toolkit.subproblem.program import TEXT_FORMAT_HEADER

from tests.problems import coasting_trajectory, make_planar_problem, straight_line


class ScriptedBackend:
    def __init__(self, *statuses: SolveStatus, supports_soc: bool = True) -> None:
        self._statuses = list(statuses)
        self._supports_soc = supports_soc
        self.settings: list[BackendSettings] = []

    @property
    def supports_soc(self) -> bool:
        return self._supports_soc

    def solve(self, program: ConicProgram, settings: BackendSettings) -> BackendResult:
        self.settings.append(settings)
        status = self._statuses.pop(0)
        if status is SolveStatus.OPTIMAL:
            return BackendResult(status=status, x=np.zeros(program.layout.size), objective_value=0.0)
        return BackendResult(status=status)


def hard_program(problem):
    z = coasting_trajectory(problem)
    return build(PenaltyObjective.for_problem(problem), project_and_convexify(z, problem), problem)


@pytest.fixture
def free_program(free_problem):
    return hard_program(free_problem)


class TestVariableLayout:
    def test_offsets(self):
        layout = VariableLayout(y_size=10, fuel_size=3, slack_size=4, epigraph_size=1)
        assert layout.fuel_offset == 10
        assert layout.slack_offset == 13
        assert layout.epigraph_offset == 21
        assert layout.size == 22


class TestBuild:
    def test_hard_equality_rows(self, free_problem, free_program):
        horizon, n = free_problem.horizon, free_problem.state_dim
        assert free_program.layout.y_size == free_problem.layout.size
        assert free_program.layout.fuel_size == horizon - 1
        assert free_program.layout.slack_size == 0
        assert len(free_program.eq_labels) == 2 * n + n * (horizon - 1)
        assert free_program.eq_labels[0] == "pin[0][0]"
        assert "dynamics[0][0]" in free_program.eq_labels
        assert free_program.ineq_labels == ()

    def test_fuel_and_control_cones(self, free_problem, free_program):
        labels = [block.label for block in free_program.soc_blocks]
        steps = free_problem.horizon - 1
        assert labels[:steps] == [f"fuel[{step}]" for step in range(steps)]
        assert labels[steps:] == [f"control_sets[0].norm_bound[{step}]" for step in range(steps)]
        assert all(block.cone_dim == 3 for block in free_program.soc_blocks)

    def test_fuel_cost_sums_the_epigraphs(self, free_program):
        layout = free_program.layout
        expected = np.zeros(layout.size)
        expected[layout.fuel_offset : layout.fuel_offset + layout.fuel_size] = 1.0
        np.testing.assert_array_equal(free_program.linear_cost, expected)
        assert free_program.cost_offset == 0.0

    def test_obstacle_cuts_become_inequalities(self):
        problem = make_planar_problem(obstacles=(Ball(center=np.array([3.0, 1.5]), radius=1.0),))
        z = coasting_trajectory(problem)
        program = hard_program(problem)
        assert program.ineq_labels == tuple(f"cut[obstacle:{step}:0]" for step in problem.free_steps)
        assert np.all(program.ineq_matrix[:, : z.data.size] @ z.data <= program.ineq_vector + 1e-12)

    def test_penalized_mode_uses_slack_pairs(self, free_problem):
        objective = PenaltyObjective.for_problem(free_problem, penalty_weight=2.5, mode=PenaltyMode.PENALIZED)
        region = project_and_convexify(coasting_trajectory(free_problem), free_problem, mode=PenaltyMode.PENALIZED)
        program = build(objective, region, free_problem)
        count = free_problem.state_dim * (free_problem.horizon - 1)
        assert program.layout.slack_size == count
        assert not any(label.startswith("dynamics[") for label in program.eq_labels)
        assert sum(label.startswith("penalty[") for label in program.eq_labels) == count
        assert sum(label.startswith("slack_sign[") for label in program.ineq_labels) == 2 * count
        offset = program.layout.slack_offset
        np.testing.assert_array_equal(program.linear_cost[offset : offset + 2 * count], 2.5)

    def test_zero_weight_has_no_slacks(self, free_problem):
        objective = PenaltyObjective.for_problem(free_problem, mode=PenaltyMode.PENALIZED)
        region = project_and_convexify(coasting_trajectory(free_problem), free_problem, mode=PenaltyMode.PENALIZED)
        assert build(objective, region, free_problem).layout.slack_size == 0

    def test_linear_cost(self, free_problem):
        weights = np.arange(free_problem.layout.size, dtype=np.float64)
        problem = dataclasses.replace(free_problem, cost=LinearCost(weights=weights))
        program = hard_program(problem)
        assert program.layout.fuel_size == 0
        np.testing.assert_array_equal(program.linear_cost[: weights.size], weights)

    def test_custom_cost_is_rejected(self, free_problem):
        problem = dataclasses.replace(free_problem, cost=CustomCost(evaluator=lambda y: 0.0))
        with pytest.raises(UnsupportedCostError):
            hard_program(problem)

    def test_thrust_cone_and_box(self, free_problem):
        problem = dataclasses.replace(
            free_problem,
            control_sets=(
                ThrustCone(axis=np.array([1.0, 0.0]), half_angle=np.pi / 3),
                BoxBound(lower=np.array([-np.inf, -1.0]), upper=np.array([2.0, np.inf]), steps=(0,)),
            ),
        )
        program = hard_program(problem)
        cone = next(block for block in program.soc_blocks if block.label == "control_sets[0].thrust_cone[0]")
        columns = problem.layout.control_indices(0)
        np.testing.assert_allclose(cone.c[columns], [2.0, 0.0])
        assert program.ineq_labels == ("control_sets[1].box[0][0]:upper", "control_sets[1].box[0][1]:lower")
        np.testing.assert_array_equal(program.ineq_vector, [2.0, 1.0])

    def test_least_distance(self, free_problem):
        z = straight_line(free_problem)
        region = project_and_convexify(coasting_trajectory(free_problem), free_problem)
        program = build_least_distance(region, free_problem, z)
        assert program.layout.epigraph_size == 1
        assert program.soc_blocks[0].label == "distance"
        np.testing.assert_array_equal(program.soc_blocks[0].b, -z.data)
        assert program.linear_cost[program.layout.epigraph_offset] == 1.0

    def test_malformed_program(self, free_program):
        with pytest.raises(ValueError, match="linear_cost"):
            dataclasses.replace(free_program, linear_cost=np.zeros(3))


class TestTextDump:
    def test_header_and_counts(self, free_program):
        lines = free_program.to_text().splitlines()
        assert lines[0] == TEXT_FORMAT_HEADER
        assert lines[1] == (
            f"variables {free_program.layout.size} equalities {len(free_program.eq_labels)} "
            f"inequalities 0 cones {len(free_program.soc_blocks)}"
        )
        assert sum(line.startswith("eq ") for line in lines) == len(free_program.eq_labels)
        assert sum(line.startswith("soc ") for line in lines) == len(free_program.soc_blocks)

    def test_rebuild_is_bit_identical(self, free_problem, free_program):
        again = hard_program(free_problem)
        assert again.to_text() == free_program.to_text()
        assert again.fingerprint() == free_program.fingerprint()

    def test_coefficients_keep_seventeen_digits(self):
        problem = make_planar_problem(t_f=7.3)
        text = hard_program(problem).to_text()
        dt = problem.time_step
        assert ":" + format(0.5 * dt**2, ".17g") in text


class TestSolve:
    def test_optimal(self, free_program):
        backend = ScriptedBackend(SolveStatus.OPTIMAL)
        solution = solve(free_program, backend)
        assert solution.status is SolveStatus.OPTIMAL
        assert not solution.relaxed
        assert solution.y_opt.data.size == free_program.layout.y_size
        assert backend.settings == [BackendSettings()]

    def test_numerical_limit_is_retried_relaxed(self, free_program):
        backend = ScriptedBackend(SolveStatus.NUMERICAL_LIMIT, SolveStatus.OPTIMAL)
        solution = solve(free_program, backend)
        assert solution.relaxed
        assert backend.settings[1].primal_feasibility == 1e-6
        assert backend.settings[1].gap == 1e-6

    def test_second_numerical_limit_fails(self, free_program):
        backend = ScriptedBackend(SolveStatus.NUMERICAL_LIMIT, SolveStatus.NUMERICAL_LIMIT)
        with pytest.raises(SubproblemError) as exc_info:
            solve(free_program, backend)
        assert exc_info.value.status is SolveStatus.NUMERICAL_LIMIT

    @pytest.mark.parametrize("status", [SolveStatus.INFEASIBLE, SolveStatus.UNBOUNDED])
    def test_infeasible_and_unbounded_are_not_retried(self, free_program, status):
        backend = ScriptedBackend(status)
        with pytest.raises(SubproblemError) as exc_info:
            solve(free_program, backend)
        assert exc_info.value.status is status
        assert len(backend.settings) == 1

    def test_backend_without_cones(self, free_program):
        with pytest.raises(ValueError, match="second-order cones"):
            solve(free_program, ScriptedBackend(SolveStatus.OPTIMAL, supports_soc=False))


class TestBackendSettings:
    @pytest.mark.parametrize("name", ["primal_feasibility", "dual_feasibility", "gap"])
    def test_tolerances_must_be_positive(self, name):
        with pytest.raises(ValueError, match=name):
            BackendSettings(**{name: 0.0})

    def test_max_iterations(self):
        with pytest.raises(ValueError, match="max_iterations"):
            BackendSettings(max_iterations=0)


class TestCvxpyBackend:
    def test_rejects_unknown_solver(self):
        with pytest.raises(ValueError, match="unsupported solver"):
            CvxpyBackend(solver="SCS")

    def test_minimum_fuel_without_obstacles(self, free_problem, free_program):
        solution = solve(free_program, CvxpyBackend())
        y = solution.y_opt
        assert np.max(np.abs(dynamics_defect(y, free_problem))) <= 1e-6
        np.testing.assert_allclose(y.state_at(free_problem.horizon - 1), free_problem.boundary.final_state, atol=1e-7)
        assert solution.objective_value == pytest.approx(evaluate_cost(y, free_problem), abs=1e-6)
        assert solution.objective_value <= evaluate_cost(coasting_trajectory(free_problem), free_problem) + 1e-6
