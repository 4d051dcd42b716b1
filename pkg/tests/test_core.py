import numpy as np
import pytest

from scvx_toolkit.core import (
    BoundaryConditions,
    BoxBound,
    ConstraintStack,
    ConvexDynamics,
    CustomCost,
    DimensionMismatchError,
    EndpointInsideObstacleError,
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
    discretize_double_integrator,
    dynamics_defect,
    evaluate_cost,
    evaluate_penalty,
    rollout,
    stack,
    unstack,
)
from scvx_toolkit.geometry import Ball, Ellipsoid, Polytope

from tests.problems import coasting_trajectory, make_planar_problem, straight_line


def softplus_dynamics() -> ConvexDynamics:
    """``x⁺ = x + log(1 + exp(u))``: every increment component is convex."""
    return ConvexDynamics(
        increment_fn=lambda x, u: np.logaddexp(0.0, u),
        jacobian_fn=lambda x, u: np.hstack([np.zeros((1, 1)), [[1.0 / (1.0 + np.exp(-u[0]))]]]),
        state_dim=1,
        control_dim=1,
        convex_components=(True,),
    )


class TestStackLayout:
    def test_size_counts_states_and_controls(self):
        layout = StackLayout(horizon=20, state_dim=6, control_dim=3)
        assert layout.size == 3 * 19 + 6 * 20

    def test_slices_are_state_major_then_controls(self):
        layout = StackLayout(horizon=3, state_dim=2, control_dim=1)
        assert layout.state_slice(0) == slice(0, 2)
        assert layout.state_slice(2) == slice(4, 6)
        assert layout.control_slice(0) == slice(6, 7)
        assert layout.control_slice(1) == slice(7, 8)
        assert layout.state_indices(1, (1,)).tolist() == [3]

    def test_control_at_last_step_is_out_of_range(self):
        with pytest.raises(IndexError):
            StackLayout(horizon=3, state_dim=2, control_dim=1).control_slice(2)

    @pytest.mark.parametrize("horizon, n, m", [(1, 2, 1), (3, 0, 1), (3, 2, 0)])
    def test_rejects_degenerate_dimensions(self, horizon, n, m):
        with pytest.raises(ValueError):
            StackLayout(horizon=horizon, state_dim=n, control_dim=m)


class TestStack:
    def test_stack_then_read_back(self):
        states = [[0.0, 1.0], [2.0, 3.0], [4.0, 5.0]]
        controls = [[7.0], [8.0]]
        y = stack(states, controls)
        assert y.data.tolist() == [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 7.0, 8.0]
        assert y.state_at(1).tolist() == [2.0, 3.0]
        assert y.control_at(1).tolist() == [8.0]
        xs, us = unstack(y)
        assert [x.tolist() for x in xs] == states
        assert [u.tolist() for u in us] == controls

    def test_data_is_read_only(self):
        y = stack([[0.0], [1.0]], [[0.0]])
        with pytest.raises(ValueError):
            y.data[0] = 5.0

    def test_wrong_control_count(self):
        with pytest.raises(DimensionMismatchError) as exc_info:
            stack([[0.0], [1.0], [2.0]], [[0.0]])
        assert exc_info.value.field == "controls"

    def test_ragged_state_names_the_index(self):
        with pytest.raises(DimensionMismatchError) as exc_info:
            stack([[0.0, 0.0], [1.0], [2.0, 2.0]], [[0.0], [0.0]])
        assert exc_info.value.index == 1
        assert exc_info.value.field == "states"

    def test_wrong_length_vector(self):
        with pytest.raises(DimensionMismatchError):
            StackedVariable(data=np.zeros(5), horizon=2, state_dim=2, control_dim=2)


class TestDynamics:
    def test_double_integrator_matrices(self):
        dynamics = discretize_double_integrator(0.5, 1)
        assert dynamics.A.tolist() == [[1.0, 0.5], [0.0, 1.0]]
        assert dynamics.B.tolist() == [[0.125], [0.5]]
        assert dynamics.affine_term.tolist() == [0.0, 0.0]

    def test_gravity_enters_through_b(self):
        dynamics = discretize_double_integrator(1.0, 3, gravity=[0.0, 0.0, -9.81])
        hover = dynamics.step(np.zeros(6), [0.0, 0.0, 9.81])
        np.testing.assert_allclose(hover, np.zeros(6), atol=1e-12)

    def test_rejects_nonpositive_step(self):
        with pytest.raises(ValueError):
            discretize_double_integrator(0.0, 2)

    def test_rollout_has_zero_defect(self, free_problem):
        controls = [np.array([0.3, -0.1 * i]) for i in range(free_problem.horizon - 1)]
        y = rollout(free_problem.dynamics, np.zeros(4), controls)
        assert np.max(np.abs(dynamics_defect(y, free_problem))) < 1e-12

    def test_linear_increment_jacobian(self):
        dynamics = LinearDynamics(A=[[1.0, 1.0], [0.0, 1.0]], B=[[0.0], [1.0]], affine_term=[0.0, 0.0])
        np.testing.assert_array_equal(dynamics.increment_jacobian([0.0, 0.0], [0.0]), [[0, 1, 0], [0, 0, 1]])

    def test_convex_dynamics_requires_every_component_convex(self):
        with pytest.raises(ValueError, match="not declared convex"):
            ConvexDynamics(
                increment_fn=lambda x, u: u,
                jacobian_fn=lambda x, u: np.eye(2, 4),
                state_dim=2,
                control_dim=2,
                convex_components=(True, False),
            )

    def test_convex_dynamics_checks_increment_shape(self):
        dynamics = ConvexDynamics(
            increment_fn=lambda x, u: np.zeros(3),
            jacobian_fn=lambda x, u: np.zeros((1, 2)),
            state_dim=1,
            control_dim=1,
            convex_components=(True,),
        )
        with pytest.raises(DimensionMismatchError):
            dynamics.increment([0.0], [0.0])


class TestCosts:
    def test_minimum_fuel_sums_control_norms(self):
        y = stack([[0.0], [0.0], [0.0]], [[3.0, 4.0], [0.0, 1.0]])
        assert MinimumFuelCost().evaluate(y) == pytest.approx(6.0)

    def test_linear_cost(self):
        y = stack([[1.0], [2.0]], [[3.0]])
        assert LinearCost(weights=[1.0, 1.0, 2.0]).evaluate(y) == pytest.approx(9.0)

    def test_custom_cost_is_not_conic(self):
        cost = CustomCost(evaluator=lambda y: float(np.sum(y.data**2)))
        assert not cost.conic_representable
        assert cost.evaluate(stack([[1.0], [2.0]], [[0.0]])) == pytest.approx(5.0)


class TestAdmissibleSets:
    def test_norm_bound_violation(self):
        bound = NormBound(indices=(0, 1), bound=1.0)
        assert bound.violation(np.array([3.0, 4.0, 100.0])) == pytest.approx(4.0)
        assert bound.violation(np.array([0.1, 0.1, 100.0])) == 0.0

    def test_thrust_cone(self):
        cone = ThrustCone(axis=[0.0, 0.0, 2.0], half_angle=np.radians(30.0))
        assert cone.axis.tolist() == [0.0, 0.0, 1.0]
        assert cone.violation(np.array([0.0, 0.0, 9.81])) == 0.0
        assert cone.violation(np.array([1.0, 0.0, 0.0])) > 0.0

    @pytest.mark.parametrize("angle", [0.0, np.pi / 2, -0.1])
    def test_thrust_cone_rejects_angle(self, angle):
        with pytest.raises(ValueError):
            ThrustCone(axis=[0.0, 1.0], half_angle=angle)

    def test_box_bound(self):
        box = BoxBound(lower=[-1.0, -np.inf], upper=[1.0, 2.0])
        assert box.violation(np.array([0.0, -1e9])) == 0.0
        assert box.violation(np.array([1.5, 2.5])) == pytest.approx(0.5)

    def test_applies_at(self):
        assert applies_at(NormBound(indices=(0,), bound=1.0), 7)
        assert not applies_at(NormBound(indices=(0,), bound=1.0, steps=(1, 2)), 7)


class TestProblemDefinition:
    def test_pins_and_free_steps(self, free_problem):
        assert free_problem.pinned_steps == (0, free_problem.horizon - 1)
        assert free_problem.free_steps == tuple(range(1, free_problem.horizon - 1))

    def test_rejects_endpoint_inside_obstacle(self):
        with pytest.raises(EndpointInsideObstacleError):
            make_planar_problem(obstacles=(Ball(center=np.array([6.0, 0.0]), radius=0.5),))

    def test_obstacle_dimension_must_match(self):
        with pytest.raises(DimensionMismatchError) as exc_info:
            make_planar_problem(obstacles=(Ball(center=np.array([3.0, 0.0, 0.0]), radius=0.5),))
        assert exc_info.value.field == "obstacles"

    def test_rejects_mismatched_dynamics(self):
        with pytest.raises(DimensionMismatchError):
            ProblemDefinition(
                horizon=4,
                state_dim=2,
                control_dim=2,
                dynamics=discretize_double_integrator(1.0, 1),
                boundary=BoundaryConditions(),
            )

    def test_rejects_control_set_of_wrong_size(self):
        with pytest.raises(DimensionMismatchError):
            ProblemDefinition(
                horizon=4,
                state_dim=2,
                control_dim=1,
                dynamics=discretize_double_integrator(1.0, 1),
                boundary=BoundaryConditions(),
                control_sets=(BoxBound(lower=[0.0, 0.0], upper=[1.0, 1.0]),),
            )

    def test_with_obstacles_keeps_everything_else(self, free_problem):
        box = Polytope.box([2.0, -1.0], [3.0, 1.0])
        problem = free_problem.with_obstacles((box,))
        assert problem.obstacles == (box,)
        assert problem.obstacle_state_indices == (0, 1)
        assert problem.horizon == free_problem.horizon

    def test_check_shape(self, free_problem):
        with pytest.raises(DimensionMismatchError):
            free_problem.check_shape(stack([[0.0], [1.0]], [[0.0]]))


class TestPenalty:
    def test_linear_dynamics_default_to_hard_equalities(self, free_problem):
        assert PenaltyObjective.for_problem(free_problem).mode is PenaltyMode.HARD_EQUALITY

    def test_convex_dynamics_default_to_penalty(self):
        problem = ProblemDefinition(
            horizon=3, state_dim=1, control_dim=1, dynamics=softplus_dynamics(), boundary=BoundaryConditions()
        )
        assert PenaltyObjective.for_problem(problem).mode is PenaltyMode.PENALIZED
        with pytest.raises(ValueError):
            PenaltyObjective.for_problem(problem, mode=PenaltyMode.HARD_EQUALITY)

    def test_penalty_adds_weighted_defect(self, free_problem):
        y = straight_line(free_problem)
        defect = dynamics_defect(y, free_problem)
        assert np.sum(np.abs(defect)) > 0.0
        objective = PenaltyObjective(base_cost=MinimumFuelCost(), penalty_weight=2.0, mode=PenaltyMode.PENALIZED)
        expected = evaluate_cost(y, free_problem) + 2.0 * np.sum(np.abs(defect))
        assert evaluate_penalty(y, free_problem, objective) == pytest.approx(expected)

    def test_hard_mode_penalty_is_the_cost(self, free_problem):
        y = straight_line(free_problem)
        objective = PenaltyObjective(base_cost=MinimumFuelCost(), penalty_weight=2.0)
        assert evaluate_penalty(y, free_problem, objective) == evaluate_cost(y, free_problem)

    def test_rejects_negative_weight(self):
        with pytest.raises(ValueError):
            PenaltyObjective(base_cost=MinimumFuelCost(), penalty_weight=-1.0)

    def test_scalar_example(self):
        problem = ProblemDefinition(
            horizon=2,
            state_dim=1,
            control_dim=1,
            dynamics=LinearDynamics(A=[[1.0]], B=[[1.0]], affine_term=[0.0]),
            boundary=BoundaryConditions(),
            cost=LinearCost(weights=[0.0, 1.0, 0.0]),
        )
        objective = PenaltyObjective.for_problem(problem, penalty_weight=10.0, mode=PenaltyMode.PENALIZED)
        overshoot = stack([[0.0], [2.0]], [[1.0]])
        np.testing.assert_array_equal(dynamics_defect(overshoot, problem), [-1.0])
        assert evaluate_penalty(overshoot, problem, objective) == 12.0
        exact = stack([[0.0], [1.0]], [[1.0]])
        assert evaluate_penalty(exact, problem, objective) == evaluate_cost(exact, problem) == 1.0

    def test_penalty_exceeds_the_cost_off_the_dynamics(self, free_problem):
        rng = np.random.default_rng(3)
        objective = PenaltyObjective(base_cost=MinimumFuelCost(), penalty_weight=10.0, mode=PenaltyMode.PENALIZED)
        on_dynamics = coasting_trajectory(free_problem)
        assert evaluate_penalty(on_dynamics, free_problem, objective) == pytest.approx(
            evaluate_cost(on_dynamics, free_problem), abs=1e-12
        )
        for _ in range(50):
            y = free_problem.stacked(rng.standard_normal(free_problem.layout.size))
            assert np.any(dynamics_defect(y, free_problem) != 0.0)
            assert evaluate_penalty(y, free_problem, objective) > evaluate_cost(y, free_problem)


class TestConstraintStack:
    def test_row_counts(self, ball_problem):
        rows = ConstraintStack(ball_problem)
        assert rows.size == 1 * ball_problem.horizon + 4 * (ball_problem.horizon - 1)
        y = straight_line(ball_problem)
        assert rows.combined(y).shape == (rows.size,)

    def test_jacobian_matches_finite_differences(self, ball_problem):
        rows = ConstraintStack(ball_problem)
        y = straight_line(ball_problem, lift=-0.7)
        jacobian = rows.jacobian(y)
        step = 1e-6
        numeric = np.empty_like(jacobian)
        for k in range(y.data.size):
            shift = np.zeros(y.data.size)
            shift[k] = step
            forward = rows.combined(StackedVariable.like(y, y.data + shift))
            backward = rows.combined(StackedVariable.like(y, y.data - shift))
            numeric[:, k] = (forward - backward) / (2.0 * step)
        np.testing.assert_allclose(jacobian, numeric, atol=1e-6)

    def test_obstacle_rows_are_convex(self):
        problem = make_planar_problem(
            obstacles=(
                Ball(center=np.array([2.0, 1.5]), radius=1.0),
                Ellipsoid.from_semi_axes([4.0, -1.5], [1.0, 0.6], [[0.8, -0.6], [0.6, 0.8]]),
                Polytope.box([2.5, 2.5], [3.5, 3.5]),
            )
        )
        rows = ConstraintStack(problem)
        rng = np.random.default_rng(9)
        for _ in range(200):
            y1, y2 = (problem.stacked(3.0 * rng.standard_normal(problem.layout.size)) for _ in range(2))
            theta = rng.uniform()
            mixed = StackedVariable.like(y1, theta * y1.data + (1.0 - theta) * y2.data)
            chord = theta * rows.obstacle_rows(y1) + (1.0 - theta) * rows.obstacle_rows(y2)
            assert np.all(rows.obstacle_rows(mixed) <= chord + 1e-9)
