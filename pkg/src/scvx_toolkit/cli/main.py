"""Command-line entry point: ``solve``, ``project`` and ``cover``."""

import argparse
import dataclasses
import json
import logging
import sys
from collections.abc import Sequence
from dataclasses import dataclass
from logging import Logger
from pathlib import Path
from typing import Any

import numpy as np

from scvx_toolkit.cli.artifacts import atomic_write_text, write_artifacts
from scvx_toolkit.cli.scenario import ScenarioError, parse_convex_set, read_scenario
from scvx_toolkit.convexify import InfeasibleIterateError, ObstructedCorridorError
from scvx_toolkit.core import ProblemDefinition
from scvx_toolkit.driver import ScvxFastSolver, SolverConfig, TerminationReason, default_backend
from scvx_toolkit.geometry import (
    Ball,
    ConvexSet,
    DegenerateCoverError,
    Ellipsoid,
    Halfspace,
    Polytope,
    ProjectionConvergenceError,
    membership_value,
    merge_intersecting,
    nearest_boundary,
    project,
)
from scvx_toolkit.subproblem import ConicProgram, SolverBackend, SubproblemError, UnsupportedCostError

EXIT_CONVERGED = 0
EXIT_ITERATION_CAP = 2
EXIT_ERROR = 3
EXIT_CODES = {
    TerminationReason.CONVERGED: EXIT_CONVERGED,
    TerminationReason.ITERATION_CAP: EXIT_ITERATION_CAP,
    TerminationReason.BACKEND_FAILURE: EXIT_ERROR,
}

SOLVE_ERRORS = (
    ObstructedCorridorError,
    InfeasibleIterateError,
    SubproblemError,
    UnsupportedCostError,
    ProjectionConvergenceError,
    DegenerateCoverError,
)


@dataclass(slots=True, frozen=True)
class RunFlags:
    """Overrides and switches of ``solve``; ``None`` keeps the scenario's value."""

    epsilon: float | None = None
    penalty_weight: float | None = None
    max_iterations: int | None = None
    seed: int | None = None
    dry_run: bool = False
    dump_conic: bool = False

    def apply(self, config: SolverConfig) -> SolverConfig:
        overrides = {
            name: value
            for name, value in (
                ("epsilon", self.epsilon),
                ("penalty_weight", self.penalty_weight),
                ("max_iterations", self.max_iterations),
                ("seed", self.seed),
            )
            if value is not None
        }
        return dataclasses.replace(config, **overrides)


def run(
    scenario_path: str | Path,
    output_dir: str | Path,
    flags: RunFlags,
    *,
    logger: Logger,
    backend: SolverBackend | None = None,
) -> int:
    """Solve a scenario and write its artifacts.

    Returns:
        0 when the run converged, 2 when it hit the iteration cap, 3 on any error.
    """
    try:
        scenario = read_scenario(scenario_path)
        config = flags.apply(scenario.config)
    except (ScenarioError, ValueError) as e:
        logger.error("invalid scenario %s: %s", scenario_path, e)
        return EXIT_ERROR

    problem = scenario.problem
    if flags.dry_run:
        print(describe_problem(problem, config))
        return EXIT_CONVERGED

    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    solver = ScvxFastSolver(config, backend or default_backend(config), logger)

    def dump(k: int, program: ConicProgram) -> None:
        conic_dir = out / "conic"
        conic_dir.mkdir(exist_ok=True)
        atomic_write_text(conic_dir / f"iteration_{k:03d}.txt", program.to_text())

    try:
        report = solver.solve(problem, scenario.initial_guess, dump if flags.dump_conic else None)
    except SOLVE_ERRORS as e:
        logger.error("solve failed: %s", e)
        return EXIT_ERROR

    residual: float | None = None
    if report.converged:
        try:
            residual = solver.fixed_point_residual(report, problem)
        except SubproblemError as e:
            logger.warning("fixed-point residual unavailable: %s", e)

    for path in write_artifacts(out, problem, report, residual):
        logger.debug("wrote %s", path)

    return EXIT_CODES[report.termination_reason]


def describe_problem(problem: ProblemDefinition, config: SolverConfig) -> str:
    lines = [
        f"horizon T = {problem.horizon}",
        f"time step = {problem.time_step:.17g}",
        f"state dim n = {problem.state_dim}",
        f"control dim m = {problem.control_dim}",
        f"variables = {problem.layout.size}",
        f"obstacles = {len(problem.obstacles)}",
        f"obstacle rows = {len(problem.free_steps) * problem.obstacle_rows_per_step}",
        f"state sets = {len(problem.state_sets)}",
        f"control sets = {len(problem.control_sets)}",
        f"epsilon = {config.epsilon:.17g}",
        f"lambda = {config.penalty_weight:.17g}",
        f"max iterations = {config.max_iterations}",
        f"seed = {config.seed}",
    ]
    return "\n".join(lines)


def describe_set(convex_set: ConvexSet) -> dict[str, Any]:
    match convex_set:
        case Ellipsoid():
            return {
                "kind": "ellipsoid",
                "center": convex_set.center.tolist(),
                "shape": (convex_set.A / convex_set.radius_sq).tolist(),
            }
        case Ball(center=center, radius=radius):
            return {"kind": "ball", "center": center.tolist(), "radius": radius}
        case Polytope(normals=normals, offsets=offsets):
            return {"kind": "polytope", "normals": normals.tolist(), "offsets": offsets.tolist()}
        case Halfspace(normal=normal, offset=offset):
            return {"kind": "halfspace", "normal": normal.tolist(), "offset": offset}


def project_command(set_spec: str, point: str, *, logger: Logger) -> int:
    try:
        convex_set = parse_convex_set(set_spec)
        z = np.array([float(x) for x in point.split(",")], dtype=np.float64)
        inside = membership_value(convex_set, z) < 0.0
        result = nearest_boundary(convex_set, z) if inside else project(convex_set, z)
    except (ScenarioError, ValueError, ProjectionConvergenceError) as e:
        logger.error("projection failed: %s", e)
        return EXIT_ERROR
    payload = {
        "projection": result.projection.tolist(),
        "distance": result.distance,
        "normal": result.normal.tolist(),
        "on_boundary": result.on_boundary,
        "inside": result.inside,
    }
    print(json.dumps(payload, indent=2))
    return EXIT_CONVERGED


def cover_command(scenario_path: str, *, logger: Logger) -> int:
    try:
        problem = read_scenario(scenario_path).problem
        merged = merge_intersecting(problem.obstacles)
    except (ScenarioError, DegenerateCoverError, ProjectionConvergenceError) as e:
        logger.error("cover failed: %s", e)
        return EXIT_ERROR
    payload = [{"members": list(item.members), "cover": item.is_cover, **describe_set(item.region)} for item in merged]
    print(json.dumps(payload, indent=2))
    return EXIT_CONVERGED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scvx-toolkit", description="Successive convexification trajectory solver.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log at DEBUG level")
    commands = parser.add_subparsers(dest="command", required=True)

    solve = commands.add_parser("solve", help="solve a scenario and write its artifacts")
    solve.add_argument("scenario", help="scenario file")
    solve.add_argument("--out", required=True, help="output directory")
    solve.add_argument("--epsilon", type=float, help="convergence threshold on subproblem-cost improvement")
    solve.add_argument("--lambda", dest="penalty_weight", type=float, help="penalty weight")
    solve.add_argument("--max-iter", dest="max_iterations", type=int, help="iteration cap")
    solve.add_argument("--seed", type=int, help="seed for projection tie-breaks")
    solve.add_argument("--dry-run", action="store_true", help="validate and print problem dimensions only")
    solve.add_argument("--dump-conic", action="store_true", help="write every subproblem under OUT/conic/")

    project_parser = commands.add_parser("project", help="project a point onto a convex set")
    project_parser.add_argument("set_spec", help='obstacle record as JSON, e.g. \'{"kind": "ball", ...}\'')
    project_parser.add_argument("point", help="comma-separated coordinates")

    cover = commands.add_parser("cover", help="print the ellipsoidal covers of intersecting obstacles")
    cover.add_argument("scenario", help="scenario file")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    logger = logging.getLogger("scvx_toolkit")
    match args.command:
        case "solve":
            flags = RunFlags(
                epsilon=args.epsilon,
                penalty_weight=args.penalty_weight,
                max_iterations=args.max_iterations,
                seed=args.seed,
                dry_run=args.dry_run,
                dump_conic=args.dump_conic,
            )
            return run(args.scenario, args.out, flags, logger=logger)
        case "project":
            return project_command(args.set_spec, args.point, logger=logger)
        case "cover":
            return cover_command(args.scenario, logger=logger)
    return EXIT_ERROR
