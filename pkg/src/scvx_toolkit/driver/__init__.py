"""The outer loop, its configuration, and the diagnostics computed from its report."""

from scvx_toolkit.driver.config import SolverConfig
from scvx_toolkit.driver.diagnostics import (
    InsufficientIterationsError,
    RateTable,
    convergence_rate_diagnostics,
    rate_table,
)
from scvx_toolkit.driver.report import SolveReport, TerminationReason
from scvx_toolkit.driver.scvx import ScvxFastSolver, default_backend, fixed_point_residual, scvx_fast

__all__: tuple[str, ...] = (
    "SolverConfig",
    "SolveReport",
    "TerminationReason",
    "ScvxFastSolver",
    "scvx_fast",
    "fixed_point_residual",
    "default_backend",
    "RateTable",
    "rate_table",
    "convergence_rate_diagnostics",
    "InsufficientIterationsError",
)
