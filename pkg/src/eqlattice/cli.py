"""Command-line interface.

Commands: ``solve`` (price a scenario), ``verify`` (run the check suite),
``figure`` (emit one figure's CSV, provenance sidecar and PNG) and ``sweep``
(the full figure batch).  The output directory comes from ``--out``, the
``EQLATTICE_OUT`` environment variable, or ``./out`` in that order.

Exit status contract: 0 success (and, for ``verify``, all tolerances met);
1 check failure; 2 configuration or resource error; 3 numerical-range error.
"""

from __future__ import annotations

import functools
import sys
from dataclasses import replace
from pathlib import Path

import click

from . import config as cfgmod
from . import experiments, output
from .errors import (
    CheckFailure,
    ConfigError,
    EqLatticeError,
    NumericalRangeError,
)
from .pricing import SolutionMode, solve_equilibrium
from .plots import render_figure
from .tree import Tree
from .verify import VerificationReport, verify_scenario

ENV_OUT = "EQLATTICE_OUT"

EXIT_CHECK_FAILURE = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _exit_code(exc: EqLatticeError) -> int:
    if isinstance(exc, CheckFailure):
        return EXIT_CHECK_FAILURE
    if isinstance(exc, NumericalRangeError):
        return EXIT_NUMERICAL
    return EXIT_CONFIG


def _handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except EqLatticeError as exc:
            code = _exit_code(exc)
            click.echo(f"error: {exc}", err=True)
            click.echo(f"error_code: {type(exc).__name__}", err=True)
            sys.exit(code)

    return wrapper


def _out_dir(out) -> Path:
    import os

    if out is not None:
        return Path(out)
    env = os.environ.get(ENV_OUT)
    if env:
        return Path(env)
    return Path("out")


def _load_scenario(scenario: str, path_cap=None) -> cfgmod.ScenarioConfig:
    """A built-in scenario id, or a path to a TOML scenario file."""
    if scenario in experiments.SCENARIO_IDS:
        cfg = experiments.scenario(scenario)
    else:
        p = Path(scenario)
        if not p.exists():
            raise ConfigError(
                f"{scenario!r} is neither a built-in scenario id "
                f"{list(experiments.SCENARIO_IDS)} nor an existing file"
            )
        cfg = cfgmod.load(p)
    if path_cap is not None:
        cfg = replace(cfg, path_cap=path_cap)
    return cfg


@click.group()
def main() -> None:
    """Equilibrium lattice pricing toolkit."""


@main.command()
@click.option("--scenario", required=True, help="Built-in id or TOML path.")
@click.option(
    "--mode",
    type=click.Choice(["consistent", "inconsistent", "both"]),
    default="both",
    show_default=True,
)
@click.option("--out", default=None, help="Output directory.")
@click.option("--path-cap", type=int, default=None, help="Override the path cap.")
@_handle_errors
def solve(scenario, mode, out, path_cap) -> None:
    """Solve a scenario and write per-node solution CSVs."""
    cfg = _load_scenario(scenario, path_cap)
    tree = Tree.from_config(cfg)
    out_dir = _out_dir(out)
    modes = {
        "consistent": [SolutionMode.CONSISTENT],
        "inconsistent": [SolutionMode.INCONSISTENT],
        "both": [SolutionMode.CONSISTENT, SolutionMode.INCONSISTENT],
    }[mode]
    name = cfg.label or "scenario"
    for m in modes:
        solution = solve_equilibrium(tree, m)
        path = output.write_solution(solution, out_dir, f"{name}_{m.value}")
        root_prices = ", ".join(
            output.fmt(solution.price[r]) for r in tree.roots
        )
        click.echo(f"{m.value}: root price {root_prices} -> {path}")


@main.command()
@click.option("--scenario", required=True, help="Built-in id or TOML path.")
@click.option("--out", default=None, help="Output directory.")
@_handle_errors
def verify(scenario, out) -> None:
    """Run the full verification suite on a scenario."""
    cfg = _load_scenario(scenario)
    report = verify_scenario(cfg)
    click.echo(report.lines())
    out_dir = _out_dir(out)
    output.write_csv(
        out_dir / f"verify_{report.label}.csv",
        VerificationReport.CSV_HEADER,
        [report.csv_row()],
    )
    if not report.passed:
        sys.exit(EXIT_CHECK_FAILURE)


@main.command()
@click.option("--figure", required=True, help="Figure id, fig1 .. fig9.")
@click.option("--out", default=None, help="Output directory.")
@click.option("--seed", type=int, default=None, help="Path-simulation seed.")
@click.option(
    "--gamma-shift",
    type=float,
    default=None,
    help="Relative risk-aversion increase of the second regime (fig9).",
)
@click.option(
    "--no-verify",
    is_flag=True,
    help="Skip the pre-emission verification suite.",
)
@_handle_errors
def figure(figure, out, seed, gamma_shift, no_verify) -> None:
    """Generate one figure: CSV, provenance sidecar and rendered PNG."""
    table = experiments.run_figure(
        figure, seed=seed, gamma_shift=gamma_shift, verify=not no_verify
    )
    out_dir = _out_dir(out)
    csv_path = output.write_figure(table, out_dir)
    png_path = render_figure(table, out_dir)
    click.echo(f"{figure}: {csv_path} {png_path}")


@main.command()
@click.option("--out", default=None, help="Output directory.")
@click.option("--seed", type=int, default=None, help="Path-simulation seed.")
@click.option("--gamma-shift", type=float, default=None)
@_handle_errors
def sweep(out, seed, gamma_shift) -> None:
    """Run every figure and a verification pass over the scenario corpus."""
    out_dir = _out_dir(out)
    reports = []
    for fig in sorted(experiments.FIGURE_SCENARIO):
        table = experiments.run_figure(
            fig, seed=seed, gamma_shift=gamma_shift, verify=False
        )
        output.write_figure(table, out_dir)
        render_figure(table, out_dir)
        click.echo(f"{fig}: done")
    for cfg in experiments.single_period_corpus():
        reports.append(verify_scenario(cfg))
    for sid in experiments.SCENARIO_IDS:
        if sid == "fig1_2_paths":
            continue
        reports.append(verify_scenario(experiments.scenario(sid)))
    output.write_csv(
        out_dir / "verify_summary.csv",
        VerificationReport.CSV_HEADER,
        [r.csv_row() for r in reports],
    )
    failed = [r.label for r in reports if not r.passed]
    click.echo(
        f"verification: {len(reports) - len(failed)}/{len(reports)} scenarios passed"
    )
    if failed:
        click.echo(f"failed: {', '.join(failed)}", err=True)
        sys.exit(EXIT_CHECK_FAILURE)


if __name__ == "__main__":
    main()
