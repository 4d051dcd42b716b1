"""Output files of a ``solve`` run.

``trajectory.csv``
    ``step, t, p_*, v_*, u_*, fuel`` per temporal point; the last point carries no control so its
    ``u_*`` and ``fuel`` cells are empty.
``history.csv``
    ``iteration, penalty, subproblem_value, displacement, penalty_weight, status``; row 0 is the starting
    iterate and has only its penalty.
``timings.csv``
    ``iteration, wall_ms``. Wall-clock values appear nowhere else, so every other file is reproducible.
``summary.json``
    Termination reason, fuel of the guess as given, after initialization and at the end, feasibility
    margins, the fixed-point residual and the error-ratio rate verdict when the run is long enough to
    have one.
``plotdata/*.dat``
    Whitespace-separated columns for trajectory and convergence plots.

Floats are written with 17 significant digits.
"""

import csv
import io
import json
import os
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any

import numpy as np

from scvx_toolkit.convexify import obstacle_clearance
from scvx_toolkit.core import ProblemDefinition, StackedVariable, dynamics_defect
from scvx_toolkit.driver import InsufficientIterationsError, RateTable, SolveReport, convergence_rate_diagnostics

AXES = "xyz"
HISTORY_COLUMNS = ("iteration", "penalty", "subproblem_value", "displacement", "penalty_weight", "status")
TIMING_COLUMNS = ("iteration", "wall_ms")
SUMMARY_FORMAT = "scvx-summary"


def format_float(value: float) -> str:
    return f"{value:.17g}"


def axis_names(dim: int) -> tuple[str, ...]:
    return tuple(AXES[k] if dim <= len(AXES) else str(k) for k in range(dim))


def trajectory_columns(dim: int) -> tuple[str, ...]:
    names = axis_names(dim)
    return (
        "step",
        "t",
        *(f"p_{a}" for a in names),
        *(f"v_{a}" for a in names),
        *(f"u_{a}" for a in names),
        "fuel",
    )


def atomic_write_text(path: Path, text: str) -> None:
    """Write to a sibling temporary file, then rename it over ``path``."""
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("w", encoding="utf-8", newline="\n") as f:
        f.write(text)
        f.flush()
        os.fsync(f.fileno())
    os.replace(tmp, path)


def render_csv(header: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def trajectory_csv(problem: ProblemDefinition, y: StackedVariable) -> str:
    d = problem.control_dim
    times = problem.time_grid()
    rows: list[list[str]] = []
    for step in range(problem.horizon):
        state = y.state_at(step)
        row = [str(step), format_float(float(times[step]))]
        row += [format_float(float(x)) for x in state[: 2 * d]]
        if step < problem.horizon - 1:
            u = y.control_at(step)
            row += [format_float(float(x)) for x in u]
            row.append(format_float(float(np.linalg.norm(u))))
        else:
            row += [""] * (d + 1)
        rows.append(row)
    return render_csv(trajectory_columns(d), rows)


def history_csv(report: SolveReport) -> str:
    rows = [["0", format_float(report.penalty_history[0]), "", "", "", ""]]
    for k in range(report.iterations):
        rows.append(
            [
                str(k + 1),
                format_float(report.penalty_history[k + 1]),
                format_float(report.subproblem_values[k]),
                format_float(report.displacements[k]),
                format_float(report.penalty_weights[k]),
                report.statuses[k].value,
            ]
        )
    return render_csv(HISTORY_COLUMNS, rows)


def timings_csv(report: SolveReport) -> str:
    rows = ([str(k + 1), format_float(1e3 * seconds)] for k, seconds in enumerate(report.wall_times))
    return render_csv(TIMING_COLUMNS, rows)


def total_fuel(y: StackedVariable) -> float:
    """``Σ_i ‖u_i‖₂``, summed in step order like ``trajectory.csv``."""
    total = 0.0
    for u in y.controls:
        total += float(np.linalg.norm(u))
    return total


def summary(problem: ProblemDefinition, report: SolveReport, residual: float | None) -> dict[str, Any]:
    final = report.final_iterate
    table: RateTable | None
    try:
        table = convergence_rate_diagnostics(report)
    except InsufficientIterationsError:
        table = None
    return {
        "format": SUMMARY_FORMAT,
        "version": 1,
        "termination_reason": report.termination_reason.value,
        "converged": report.converged,
        "iterations": report.iterations,
        "initialization_used": report.initialization_used,
        "initial_cost": total_fuel(report.initial_guess),
        "initialized_cost": total_fuel(report.iterates[0]),
        "total_cost": total_fuel(final),
        "final_penalty": report.penalty_history[-1],
        "penalty_weight": report.penalty_weights[-1] if report.penalty_weights else None,
        "max_dynamics_defect": float(np.max(np.abs(dynamics_defect(final, problem)), initial=0.0)),
        "min_obstacle_clearance": _finite_or_none(obstacle_clearance(final, problem)),
        "fixed_point_residual": residual,
        "rate_verdict": table.verdict if table is not None else None,
        "rate_ratios": list(table.ratios) if table is not None else None,
    }


def plot_trajectory(problem: ProblemDefinition, report: SolveReport) -> str:
    d = problem.control_dim
    lines = ["# t " + " ".join(f"p_{a}" for a in axis_names(d)) + " iterate"]
    times = problem.time_grid()
    for index, y in ((0, report.iterates[0]), (report.iterations, report.final_iterate)):
        for step in range(problem.horizon):
            position = y.state_at(step)[:d]
            lines.append(" ".join([format_float(float(times[step])), *map(format_float, position), str(index)]))
        lines.append("")
    return "\n".join(lines)


def plot_convergence(report: SolveReport) -> str:
    lines = ["# iteration penalty subproblem_value"]
    for k, value in enumerate(report.subproblem_values):
        lines.append(f"{k + 1} {format_float(report.penalty_history[k + 1])} {format_float(value)}")
    return "\n".join(lines) + "\n"


def write_artifacts(
    output_dir: Path, problem: ProblemDefinition, report: SolveReport, residual: float | None
) -> tuple[Path, ...]:
    plot_dir = output_dir / "plotdata"
    plot_dir.mkdir(parents=True, exist_ok=True)
    files = {
        output_dir / "trajectory.csv": trajectory_csv(problem, report.final_iterate),
        output_dir / "history.csv": history_csv(report),
        output_dir / "timings.csv": timings_csv(report),
        output_dir / "summary.json": json.dumps(summary(problem, report, residual), indent=2) + "\n",
        plot_dir / "trajectory.dat": plot_trajectory(problem, report),
        plot_dir / "convergence.dat": plot_convergence(report),
    }
    for path, text in files.items():
        atomic_write_text(path, text)
    return tuple(files)


def _finite_or_none(value: float) -> float | None:
    return value if np.isfinite(value) else None
