import csv
import dataclasses
import io
import json
import logging
import math
import sys
from unittest.mock import MagicMock

import numpy as np
import pytest

from scvx_toolkit.cli import (
    RunFlags,
    ScenarioError,
    bundled_scenario,
    load_scenario,
    main,
    parse_convex_set,
    read_scenario,
    run,
    save_scenario,
)
from scvx_toolkit.cli.artifacts import (
    HISTORY_COLUMNS,
    atomic_write_text,
    format_float,
    history_csv,
    summary,
    timings_csv,
    total_fuel,
    trajectory_columns,
    trajectory_csv,
)
from scvx_toolkit.core import StackedVariable, ThrustCone
from scvx_toolkit.driver import SolveReport, SolverConfig, TerminationReason
from scvx_toolkit.geometry import Ball, Ellipsoid, Polytope, ProjectionConvergenceError
from scvx_toolkit.subproblem import BackendResult, BackendSettings, ConicProgram, SolveStatus
from scvx_toolkit.subproblem.program import TEXT_FORMAT_HEADER

from tests.problems import coasting_trajectory


class InfeasibleBackend:
    @property
    def supports_soc(self) -> bool:
        return True

    def solve(self, program: ConicProgram, settings: BackendSettings) -> BackendResult:
        return BackendResult(status=SolveStatus.INFEASIBLE)


def table1_document():
    return json.loads(bundled_scenario("table1").read_text(encoding="utf-8"))


def write_document(path, document):
    path.write_text(json.dumps(document), encoding="utf-8")
    return path


def read_csv(path):
    with path.open(newline="") as f:
        return list(csv.reader(f))


def assert_scenario_error(document, tmp_path, field):
    with pytest.raises(ScenarioError) as exc_info:
        read_scenario(write_document(tmp_path / "broken.scenario", document))
    assert exc_info.value.field == field


def coasting_report(problem):
    z0 = coasting_trajectory(problem)
    return SolveReport(
        iterates=(z0, z0),
        penalty_history=(2.0, 2.0),
        subproblem_values=(2.0,),
        statuses=(SolveStatus.OPTIMAL,),
        wall_times=(0.0125,),
        displacements=(0.0,),
        penalty_weights=(0.0,),
        termination_reason=TerminationReason.CONVERGED,
        initialization_used=False,
        initial_guess=z0,
    )


@pytest.fixture
def mock_logger():
    return MagicMock(spec=logging.Logger)


@pytest.fixture
def planar_path():
    return bundled_scenario("planar_two_obstacle")


class TestLoadScenario:
    def test_table1_values(self):
        problem, config, z0 = load_scenario(bundled_scenario("table1"))
        assert problem.horizon == 20
        assert (problem.state_dim, problem.control_dim) == (6, 3)
        assert problem.time_step == 15.0 / 19
        assert problem.state_sets[0].bound == 2.0
        assert problem.state_sets[0].indices == (3, 4, 5)
        assert problem.control_sets[0].bound == 13.33
        cone = problem.control_sets[1]
        assert isinstance(cone, ThrustCone)
        assert cone.half_angle == pytest.approx(math.radians(30.0))
        np.testing.assert_array_equal(cone.axis, [0.0, 0.0, 1.0])
        np.testing.assert_array_equal(problem.boundary.initial_state, [-2.0, 6.0, 0.0, 0.0, 0.0, 0.0])
        np.testing.assert_array_equal(problem.boundary.final_state, [6.0, 2.0, 0.5, 0.0, 0.0, 0.0])
        assert [type(o) for o in problem.obstacles] == [Ellipsoid, Ellipsoid, Polytope, Ball]
        assert config.epsilon == 1e-4
        assert config.penalty_weight == 0.0
        assert config.max_iterations == 100
        assert config.seed == 0

    def test_straight_line_guess_hovers(self):
        problem, _, z0 = load_scenario(bundled_scenario("table1"))
        np.testing.assert_array_equal(z0.controls, np.tile([0.0, 0.0, 9.81], (19, 1)))
        np.testing.assert_array_equal(z0.state_at(0), problem.boundary.initial_state)
        np.testing.assert_array_equal(z0.state_at(19), problem.boundary.final_state)
        np.testing.assert_allclose(z0.states[:, 3:], 0.0)

    def test_planar_scenario_has_no_cone(self, planar_path):
        problem, _, _ = load_scenario(planar_path)
        assert len(problem.control_sets) == 1
        assert problem.obstacle_state_indices == (0, 1)

    def test_endpoint_inside_an_obstacle(self, tmp_path):
        document = table1_document()
        document["boundary"]["pf"] = [5.0, 2.2, 0.4]
        assert_scenario_error(document, tmp_path, "boundary")

    def test_nonpositive_final_time(self, tmp_path):
        document = table1_document()
        document["horizon"]["t_f"] = 0.0
        assert_scenario_error(document, tmp_path, "horizon.t_f")

    def test_missing_section(self, tmp_path):
        document = table1_document()
        del document["limits"]
        assert_scenario_error(document, tmp_path, "limits")

    def test_wrong_version(self, tmp_path):
        document = table1_document()
        document["version"] = 2
        assert_scenario_error(document, tmp_path, "version")

    def test_unknown_obstacle_kind(self, tmp_path):
        document = table1_document()
        document["obstacles"][2]["kind"] = "cylinder"
        assert_scenario_error(document, tmp_path, "obstacles[2].kind")

    def test_obstacle_of_the_wrong_dimension(self, tmp_path):
        document = table1_document()
        document["obstacles"][3] = {"kind": "ball", "center": [5.0, 2.2], "radius": 0.5}
        assert_scenario_error(document, tmp_path, "obstacles[3]")

    def test_bad_cone_angle(self, tmp_path):
        document = table1_document()
        document["limits"]["theta_cone_deg"] = 90.0
        assert_scenario_error(document, tmp_path, "limits.theta_cone_deg")

    def test_bad_solver_section(self, tmp_path):
        document = table1_document()
        document["solver"]["epsilon"] = -1.0
        assert_scenario_error(document, tmp_path, "solver")

    def test_syntax_error_reports_the_position(self, tmp_path):
        path = tmp_path / "broken.scenario"
        path.write_text('{\n  "format": "scvx-scenario",\n  "version": 1,,\n}', encoding="utf-8")
        with pytest.raises(ScenarioError) as exc_info:
            read_scenario(path)
        assert exc_info.value.line == 3

    def test_unreadable_path(self, tmp_path):
        with pytest.raises(ScenarioError, match="path"):
            read_scenario(tmp_path / "missing.scenario")

    def test_unknown_bundled_name(self):
        with pytest.raises(ScenarioError):
            bundled_scenario("nowhere")

    def test_explicit_guess_round_trip(self, tmp_path):
        scenario = read_scenario(bundled_scenario("table1"))
        rng = np.random.default_rng(7)
        z0 = scenario.initial_guess
        guess = StackedVariable.like(z0, z0.data + rng.standard_normal(z0.data.size) / 3.0)
        path = tmp_path / "saved.scenario"
        save_scenario(scenario, path, guess=guess)
        _, _, loaded = load_scenario(path)
        np.testing.assert_array_equal(loaded.data, guess.data)
        assert json.loads(path.read_text(encoding="utf-8"))["initial_guess"]["kind"] == "explicit"

    def test_explicit_guess_of_the_wrong_shape(self, tmp_path):
        document = table1_document()
        document["initial_guess"] = {"kind": "explicit", "states": [[0.0] * 6] * 19, "controls": [[0.0] * 3] * 19}
        assert_scenario_error(document, tmp_path, "initial_guess.states")


class TestParseConvexSet:
    def test_from_json_text(self):
        ball = parse_convex_set('{"kind": "ball", "center": [1, 2], "radius": 0.5}')
        assert isinstance(ball, Ball)
        assert ball.radius == 0.5

    def test_shape_matrix_ellipsoid(self):
        ellipsoid = parse_convex_set({"kind": "ellipsoid", "center": [0, 0], "shape": [[0.25, 0], [0, 1]]})
        np.testing.assert_allclose(ellipsoid.semi_axes()[0], [1.0, 2.0])

    def test_polytope(self):
        square = parse_convex_set(
            {"kind": "polytope", "normals": [[1, 0], [-1, 0], [0, 1], [0, -1]], "offsets": [-1, -1, -1, -1]}
        )
        assert isinstance(square, Polytope)

    def test_empty_ellipsoid_is_rejected(self):
        with pytest.raises(ScenarioError):
            parse_convex_set({"kind": "ellipsoid", "center": [0, 0], "semi_axes": [1.0, -1.0]})


class TestArtifacts:
    def test_format_float_keeps_seventeen_digits(self):
        assert format_float(0.1) == "0.10000000000000001"
        assert float(format_float(1 / 3)) == 1 / 3

    def test_trajectory_csv(self, free_problem):
        z = coasting_trajectory(free_problem)
        rows = list(csv.reader(io.StringIO(trajectory_csv(free_problem, z))))
        assert tuple(rows[0]) == trajectory_columns(2)
        assert rows[0] == ["step", "t", "p_x", "p_y", "v_x", "v_y", "u_x", "u_y", "fuel"]
        assert len(rows) == free_problem.horizon + 1
        assert rows[1][:3] == ["0", "0", "0"]
        assert rows[1][-1] == "1"
        assert rows[-1][-3:] == ["", "", ""]
        assert float(rows[-1][2]) == 6.0

    def test_history_csv(self, free_problem):
        rows = list(csv.reader(io.StringIO(history_csv(coasting_report(free_problem)))))
        assert tuple(rows[0]) == HISTORY_COLUMNS
        assert rows[1] == ["0", "2", "", "", "", ""]
        assert rows[2] == ["1", "2", "2", "0", "0", "optimal"]

    def test_timings_csv(self, free_problem):
        assert timings_csv(coasting_report(free_problem)) == "iteration,wall_ms\n1,12.5\n"

    def test_summary(self, free_problem):
        report = coasting_report(free_problem)
        document = summary(free_problem, report, 1e-9)
        assert document["format"] == "scvx-summary"
        assert document["termination_reason"] == "converged"
        assert document["total_cost"] == total_fuel(report.final_iterate) == 2.0
        assert document["min_obstacle_clearance"] is None
        assert document["max_dynamics_defect"] == 0.0
        assert document["fixed_point_residual"] == 1e-9
        assert document["rate_verdict"] is None

    def test_summary_costs_the_guess_as_given(self, free_problem):
        report = coasting_report(free_problem)
        z0 = report.iterates[0]
        guess = StackedVariable.like(z0, 2.0 * z0.data)
        report = dataclasses.replace(report, initial_guess=guess, initialization_used=True)
        document = summary(free_problem, report, None)
        assert document["initial_cost"] == total_fuel(guess) == 4.0
        assert document["initialized_cost"] == total_fuel(z0) == 2.0
        assert document["initialization_used"] is True

    def test_atomic_write_leaves_no_temporary(self, tmp_path):
        path = tmp_path / "out.txt"
        atomic_write_text(path, "first\n")
        atomic_write_text(path, "second\n")
        assert path.read_text() == "second\n"
        assert [p.name for p in tmp_path.iterdir()] == ["out.txt"]


class TestRunFlags:
    def test_only_given_values_override(self):
        config = RunFlags(epsilon=1e-3, seed=4).apply(SolverConfig(max_iterations=7))
        assert config.epsilon == 1e-3
        assert config.seed == 4
        assert config.max_iterations == 7
        assert config.penalty_weight == 0.0


class TestRun:
    def test_dry_run(self, planar_path, tmp_path, capsys, mock_logger):
        out = tmp_path / "out"
        assert run(planar_path, out, RunFlags(dry_run=True), logger=mock_logger) == 0
        printed = capsys.readouterr().out
        assert "horizon T = 20" in printed
        assert "obstacles = 2" in printed
        assert not out.exists()

    def test_invalid_scenario(self, tmp_path, mock_logger):
        path = write_document(tmp_path / "broken.scenario", {"format": "scvx-scenario", "version": 1})
        assert run(path, tmp_path / "out", RunFlags(), logger=mock_logger) == 3
        mock_logger.error.assert_called_once()

    def test_invalid_override(self, planar_path, tmp_path, mock_logger):
        assert run(planar_path, tmp_path / "out", RunFlags(epsilon=-1.0), logger=mock_logger) == 3

    def test_backend_failure(self, planar_path, tmp_path, mock_logger):
        code = run(planar_path, tmp_path / "out", RunFlags(), logger=mock_logger, backend=InfeasibleBackend())
        assert code == 3

    @pytest.mark.scenario
    def test_converged_run_writes_every_artifact(self, planar_path, tmp_path, mock_logger):
        out = tmp_path / "out"
        assert run(planar_path, out, RunFlags(), logger=mock_logger) == 0
        for name in ("trajectory.csv", "history.csv", "timings.csv", "summary.json"):
            assert (out / name).is_file()
        assert (out / "plotdata" / "trajectory.dat").is_file()
        assert (out / "plotdata" / "convergence.dat").is_file()
        assert not list(out.rglob("*.tmp"))

        document = json.loads((out / "summary.json").read_text())
        assert document["converged"] is True
        assert document["initialization_used"] is True
        assert document["fixed_point_residual"] <= 1e-3
        assert document["min_obstacle_clearance"] >= -1e-6
        assert document["total_cost"] < document["initial_cost"]

        rows = read_csv(out / "trajectory.csv")
        assert rows[0] == ["step", "t", "p_x", "p_y", "v_x", "v_y", "u_x", "u_y", "fuel"]
        fuel = sum(float(row[-1]) for row in rows[1:-1])
        assert abs(fuel - document["total_cost"]) <= 1e-9

        history = read_csv(out / "history.csv")
        assert tuple(history[0]) == HISTORY_COLUMNS
        assert len(history) == document["iterations"] + 2

    @pytest.mark.scenario
    def test_reruns_are_byte_identical(self, planar_path, tmp_path, mock_logger):
        first, second = tmp_path / "first", tmp_path / "second"
        assert run(planar_path, first, RunFlags(seed=3), logger=mock_logger) == 0
        assert run(planar_path, second, RunFlags(seed=3), logger=mock_logger) == 0
        for name in ("trajectory.csv", "history.csv", "summary.json"):
            assert (first / name).read_bytes() == (second / name).read_bytes()

    @pytest.mark.scenario
    def test_iteration_cap_and_conic_dump(self, planar_path, tmp_path, mock_logger):
        out = tmp_path / "out"
        assert run(planar_path, out, RunFlags(max_iterations=1, dump_conic=True), logger=mock_logger) == 2
        dumped = sorted(p.name for p in (out / "conic").iterdir())
        assert dumped == ["iteration_000.txt"]
        assert (out / "conic" / "iteration_000.txt").read_text().startswith(TEXT_FORMAT_HEADER + "\n")
        assert json.loads((out / "summary.json").read_text())["fixed_point_residual"] is None


class TestMain:
    def test_project_outside(self, capsys):
        assert main(["project", '{"kind": "ball", "center": [0, 0], "radius": 1}', "3,0"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["projection"] == [1.0, 0.0]
        assert payload["distance"] == 2.0
        assert payload["inside"] is False

    def test_project_inside(self, capsys):
        assert main(["project", '{"kind": "ball", "center": [0, 0], "radius": 1}', "0.5,0"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["projection"] == [1.0, 0.0]
        assert payload["distance"] == 0.5
        assert payload["inside"] is True

    def test_project_bad_point(self):
        assert main(["project", '{"kind": "ball", "center": [0, 0], "radius": 1}', "1,2,3"]) == 3

    def test_cover(self, capsys):
        assert main(["cover", str(bundled_scenario("table1"))]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload[0]["members"] == [0, 1]
        assert payload[0]["cover"] is True
        assert payload[0]["kind"] == "ellipsoid"
        assert sorted(m for item in payload for m in item["members"]) == [0, 1, 2, 3]

    def test_cover_reports_a_stalled_projection(self, monkeypatch):
        def stalled(sets):
            raise ProjectionConvergenceError("secular equation did not converge", {"residual": 1e-3})

        monkeypatch.setattr(sys.modules["scvx_toolkit.cli.main"], "merge_intersecting", stalled)
        assert main(["cover", str(bundled_scenario("table1"))]) == 3

    def test_solve_dry_run(self, planar_path, tmp_path, capsys):
        assert main(["solve", str(planar_path), "--out", str(tmp_path), "--dry-run", "--lambda", "2"]) == 0
        assert "lambda = 2" in capsys.readouterr().out

    def test_unknown_command(self):
        with pytest.raises(SystemExit):
            main(["plot"])
