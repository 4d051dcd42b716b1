"""Conic subproblems over convexified regions and the pluggable solver backends."""

from scvx_toolkit.subproblem.backends import CvxpyBackend
from scvx_toolkit.subproblem.program import (
    ConicProgram,
    SocBlock,
    UnsupportedCostError,
    VariableLayout,
    build,
    build_least_distance,
)
from scvx_toolkit.subproblem.protocols import BackendResult, BackendSettings, SolverBackend, SolveStatus
from scvx_toolkit.subproblem.solve import SubproblemError, SubproblemSolution, solve

__all__: tuple[str, ...] = (
    "ConicProgram",
    "SocBlock",
    "VariableLayout",
    "build",
    "build_least_distance",
    "UnsupportedCostError",
    "SolverBackend",
    "BackendSettings",
    "BackendResult",
    "SolveStatus",
    "CvxpyBackend",
    "solve",
    "SubproblemSolution",
    "SubproblemError",
)
