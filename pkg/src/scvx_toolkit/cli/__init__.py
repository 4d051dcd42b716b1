"""Scenario files, run artifacts and the ``scvx-toolkit`` command."""

from scvx_toolkit.cli.artifacts import write_artifacts
from scvx_toolkit.cli.main import RunFlags, main, run
from scvx_toolkit.cli.scenario import (
    Scenario,
    ScenarioError,
    bundled_scenario,
    load_scenario,
    parse_convex_set,
    read_scenario,
    save_scenario,
    straight_line_guess,
)

__all__: tuple[str, ...] = (
    "Scenario",
    "ScenarioError",
    "load_scenario",
    "read_scenario",
    "save_scenario",
    "bundled_scenario",
    "parse_convex_set",
    "straight_line_guess",
    "RunFlags",
    "run",
    "main",
    "write_artifacts",
)
