"""Scenario files: versioned JSON documents describing a multirotor transfer with keep-out zones.

Layout::

    {
      "format": "scvx-scenario", "version": 1,
      "horizon": {"T": 20, "t_f": 15.0},
      "limits": {"V_max": 2.0, "u_max": 13.33, "theta_cone_deg": 30.0, "n_hat": [0, 0, 1]},
      "gravity": [0, 0, -9.81],
      "boundary": {"p0": [...], "v0": [...], "pf": [...], "vf": [...]},
      "obstacles": [{"kind": "ellipsoid", "center": [...], "semi_axes": [...]}, ...],
      "solver": {"epsilon": 1e-4, "lambda": 0.0, "max_iterations": 100, "seed": 0},
      "initial_guess": {"kind": "straight_line"}
    }

Obstacle records are ``ellipsoid`` (``center`` with ``semi_axes`` and an optional ``rotation``, or with a
``shape`` matrix), ``ball`` (``center``, ``radius``), ``box`` (``lower``, ``upper``) and ``polytope``
(``normals``, ``offsets`` describing ``{x | normals x + offsets <= 0}``). An explicit guess is
``{"kind": "explicit", "states": [[...], ...], "controls": [[...], ...]}``.
"""

import copy
import json
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from scvx_toolkit.core import (
    BoundaryConditions,
    DimensionMismatchError,
    EndpointInsideObstacleError,
    NormBound,
    PenaltyMode,
    ProblemDefinition,
    StackedVariable,
    ThrustCone,
    discretize_double_integrator,
    stack,
)
from scvx_toolkit.driver import SolverConfig
from scvx_toolkit.geometry import Ball, ConvexSet, Ellipsoid, Polytope

FORMAT = "scvx-scenario"
VERSION = 1
BUNDLED_PACKAGE = "scvx_toolkit.scenarios"
REQUIRED_SECTIONS = ("horizon", "limits", "gravity", "boundary", "obstacles")


class ScenarioError(ValueError):
    """Raised when a scenario document is malformed or describes an invalid problem."""

    def __init__(self, message: str, *, field: str, line: int | None = None, column: int | None = None) -> None:
        location = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{field}: {message}{location}")
        self.field = field
        self.line = line
        self.column = column


@dataclass(slots=True, frozen=True, eq=False)
class Scenario:
    """A loaded scenario; ``document`` is the parsed JSON it came from."""

    problem: ProblemDefinition
    config: SolverConfig
    initial_guess: StackedVariable
    document: Mapping[str, Any]


def load_scenario(path: str | Path) -> tuple[ProblemDefinition, SolverConfig, StackedVariable]:
    scenario = read_scenario(path)
    return scenario.problem, scenario.config, scenario.initial_guess


def read_scenario(path: str | Path) -> Scenario:
    """
    Raises:
        ScenarioError: The file is unreadable, malformed, or describes an invalid problem.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ScenarioError(f"cannot read scenario: {e.strerror}", field="path") from e
    return parse_scenario(text)


def bundled_scenario(name: str) -> Path:
    """Path of a scenario shipped with the package, e.g. ``"table1"``."""
    resource = resources.files(BUNDLED_PACKAGE).joinpath(f"{name}.scenario")
    if not resource.is_file():
        raise ScenarioError(f"no bundled scenario named {name!r}", field="path")
    return Path(str(resource))


def parse_scenario(text: str) -> Scenario:
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(e.msg, field="document", line=e.lineno, column=e.colno) from e
    if not isinstance(document, dict):
        raise ScenarioError("top level must be an object", field="document")
    if document.get("format") != FORMAT:
        raise ScenarioError(f"expected {FORMAT!r}", field="format")
    if document.get("version") != VERSION:
        raise ScenarioError(f"unsupported version {document.get('version')!r}, expected {VERSION}", field="version")
    for name in REQUIRED_SECTIONS:
        if name not in document:
            raise ScenarioError("missing required section", field=name)

    horizon = _section(document, "horizon")
    T = _integer(horizon, "T", "horizon")
    t_f = _number(horizon, "t_f", "horizon")
    if T < 2:
        raise ScenarioError("need at least 2 temporal points", field="horizon.T")
    if not t_f > 0.0:
        raise ScenarioError("final time must be positive so that dt > 0", field="horizon.t_f")
    dt = t_f / (T - 1)

    gravity = _vector(document, "gravity", "")
    d = gravity.size
    boundary = _section(document, "boundary")
    p0, v0, pf, vf = (_vector(boundary, key, "boundary", length=d) for key in ("p0", "v0", "pf", "vf"))

    limits = _section(document, "limits")
    velocity = tuple(range(d, 2 * d))
    state_sets = (NormBound(indices=velocity, bound=_positive(limits, "V_max", "limits")),)
    control_sets: list[NormBound | ThrustCone] = [
        NormBound(indices=tuple(range(d)), bound=_positive(limits, "u_max", "limits"))
    ]
    theta = limits.get("theta_cone_deg")
    if theta is not None:
        if not isinstance(theta, int | float) or not 0.0 < theta < 90.0:
            raise ScenarioError("must lie strictly between 0 and 90 degrees", field="limits.theta_cone_deg")
        axis = _vector(limits, "n_hat", "limits", length=d)
        try:
            control_sets.append(ThrustCone(axis=axis, half_angle=math.radians(theta)))
        except ValueError as e:
            raise ScenarioError(str(e), field="limits.n_hat") from e

    obstacles = document["obstacles"]
    if not isinstance(obstacles, list):
        raise ScenarioError("must be a list of obstacle records", field="obstacles")
    sets = tuple(_obstacle(record, f"obstacles[{index}]") for index, record in enumerate(obstacles))

    try:
        problem = ProblemDefinition(
            horizon=T,
            state_dim=2 * d,
            control_dim=d,
            dynamics=discretize_double_integrator(dt, d, gravity),
            boundary=BoundaryConditions(initial_state=np.concatenate([p0, v0]), final_state=np.concatenate([pf, vf])),
            obstacles=sets,
            obstacle_state_indices=tuple(range(d)),
            state_sets=state_sets,
            control_sets=tuple(control_sets),
            time_step=dt,
        )
    except EndpointInsideObstacleError as e:
        raise ScenarioError(str(e), field="boundary") from e
    except DimensionMismatchError as e:
        raise ScenarioError(str(e), field=f"obstacles[{e.index}]" if e.field == "obstacles" else "document") from e
    except ValueError as e:
        raise ScenarioError(str(e), field="document") from e

    config = _solver_config(document.get("solver", {}))
    guess = _initial_guess(document.get("initial_guess", {"kind": "straight_line"}), problem, gravity)
    return Scenario(problem=problem, config=config, initial_guess=guess, document=document)


def save_scenario(scenario: Scenario, path: str | Path, *, guess: StackedVariable | None = None) -> None:
    """Write the scenario back with its initial guess stored as an explicit trajectory table."""
    trajectory = guess if guess is not None else scenario.initial_guess
    scenario.problem.check_shape(trajectory)
    document = copy.deepcopy(dict(scenario.document))
    document["initial_guess"] = {
        "kind": "explicit",
        "states": trajectory.states.tolist(),
        "controls": trajectory.controls.tolist(),
    }
    Path(path).write_text(json.dumps(document, indent=2) + "\n", encoding="utf-8")


def parse_convex_set(record: Any, field: str = "set") -> ConvexSet:
    """Build a keep-out set from an obstacle record (a mapping, or its JSON text)."""
    if isinstance(record, str):
        try:
            record = json.loads(record)
        except json.JSONDecodeError as e:
            raise ScenarioError(e.msg, field=field, line=e.lineno, column=e.colno) from e
    return _obstacle(record, field)


def _obstacle(record: Any, field: str) -> ConvexSet:
    if not isinstance(record, dict):
        raise ScenarioError("obstacle record must be an object", field=field)
    try:
        match record.get("kind"):
            case "ellipsoid" if "shape" in record:
                return Ellipsoid.from_center(_vector(record, "center", field), _matrix(record, "shape", field))
            case "ellipsoid":
                rotation = _matrix(record, "rotation", field) if "rotation" in record else None
                return Ellipsoid.from_semi_axes(
                    _vector(record, "center", field), _vector(record, "semi_axes", field), rotation
                )
            case "ball":
                return Ball(center=_vector(record, "center", field), radius=_positive(record, "radius", field))
            case "box":
                return Polytope.box(_vector(record, "lower", field), _vector(record, "upper", field))
            case "polytope":
                return Polytope(normals=_matrix(record, "normals", field), offsets=_vector(record, "offsets", field))
            case other:
                raise ScenarioError(f"unknown obstacle kind {other!r}", field=f"{field}.kind")
    except ScenarioError:
        raise
    except (ValueError, np.linalg.LinAlgError) as e:
        raise ScenarioError(str(e), field=field) from e


def _solver_config(solver: Any) -> SolverConfig:
    if not isinstance(solver, dict):
        raise ScenarioError("must be an object", field="solver")
    options: dict[str, Any] = {}
    if "epsilon" in solver:
        options["epsilon"] = _number(solver, "epsilon", "solver")
    if "lambda" in solver:
        options["penalty_weight"] = _number(solver, "lambda", "solver")
    if "max_iterations" in solver:
        options["max_iterations"] = _integer(solver, "max_iterations", "solver")
    if "seed" in solver:
        options["seed"] = _integer(solver, "seed", "solver")
    if "mode" in solver:
        try:
            options["mode"] = PenaltyMode(solver["mode"])
        except ValueError as e:
            raise ScenarioError("must be 'hard_equality' or 'penalized'", field="solver.mode") from e
    if "backend" in solver:
        options["backend"] = solver["backend"]
    try:
        return SolverConfig(**options)
    except ValueError as e:
        raise ScenarioError(str(e), field="solver") from e


def _initial_guess(record: Any, problem: ProblemDefinition, gravity: np.ndarray) -> StackedVariable:
    if not isinstance(record, dict):
        raise ScenarioError("must be an object", field="initial_guess")
    match record.get("kind"):
        case "straight_line":
            return straight_line_guess(problem, gravity)
        case "explicit":
            states = _matrix(record, "states", "initial_guess")
            controls = _matrix(record, "controls", "initial_guess")
            if states.shape != (problem.horizon, problem.state_dim):
                raise ScenarioError(
                    f"expected {problem.horizon} states of length {problem.state_dim}", field="initial_guess.states"
                )
            if controls.shape != (problem.horizon - 1, problem.control_dim):
                raise ScenarioError(
                    f"expected {problem.horizon - 1} controls of length {problem.control_dim}",
                    field="initial_guess.controls",
                )
            return stack(list(states), list(controls))
        case other:
            raise ScenarioError(f"unknown guess kind {other!r}", field="initial_guess.kind")


def straight_line_guess(problem: ProblemDefinition, gravity: np.ndarray) -> StackedVariable:
    """Positions interpolate ``p0 → pf`` with zero velocity between the pinned ends; controls hover at ``-g``."""
    pins = problem.boundary.pins(problem.horizon)
    first, last = pins[0], pins[problem.horizon - 1]
    d = problem.control_dim
    fractions = np.linspace(0.0, 1.0, problem.horizon)
    states = [np.concatenate([first[:d] + s * (last[:d] - first[:d]), np.zeros(d)]) for s in fractions]
    states[0], states[-1] = first.copy(), last.copy()
    return stack(states, [-gravity] * (problem.horizon - 1))


def _section(document: Mapping[str, Any], name: str) -> Mapping[str, Any]:
    section = document.get(name)
    if not isinstance(section, dict):
        raise ScenarioError("must be an object", field=name)
    return section


def _path(parent: str, key: str) -> str:
    return f"{parent}.{key}" if parent else key


def _number(section: Mapping[str, Any], key: str, parent: str) -> float:
    value = section.get(key)
    if isinstance(value, bool) or not isinstance(value, int | float) or not math.isfinite(value):
        raise ScenarioError("must be a finite number", field=_path(parent, key))
    return float(value)


def _positive(section: Mapping[str, Any], key: str, parent: str) -> float:
    value = _number(section, key, parent)
    if not value > 0.0:
        raise ScenarioError("must be positive", field=_path(parent, key))
    return value


def _integer(section: Mapping[str, Any], key: str, parent: str) -> int:
    value = section.get(key)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError("must be an integer", field=_path(parent, key))
    return value


def _vector(section: Mapping[str, Any], key: str, parent: str, *, length: int | None = None) -> np.ndarray:
    value = section.get(key)
    if not _is_number_list(value):
        raise ScenarioError("must be a list of numbers", field=_path(parent, key))
    if length is not None and len(value) != length:
        raise ScenarioError(f"must have length {length}", field=_path(parent, key))
    return np.array(value, dtype=np.float64)


def _matrix(section: Mapping[str, Any], key: str, parent: str) -> np.ndarray:
    value = section.get(key)
    if not isinstance(value, list) or not value or not all(_is_number_list(row) for row in value):
        raise ScenarioError("must be a list of number lists", field=_path(parent, key))
    if len({len(row) for row in value}) != 1:
        raise ScenarioError("rows must have one length", field=_path(parent, key))
    return np.array(value, dtype=np.float64)


def _is_number_list(value: Any) -> bool:
    return (
        isinstance(value, Sequence)
        and not isinstance(value, str)
        and len(value) > 0
        and all(isinstance(x, int | float) and not isinstance(x, bool) and math.isfinite(x) for x in value)
    )
