"""Command line: ``emwf run|validate|list|describe``.

Exit codes: 0 ok, 1 an analysis failed or errored, 2 the scenario is invalid.
"""
from __future__ import annotations

import sys
from pathlib import Path

import click

from . import runner
from .errors import ScenarioError
from .scenario import describe as describe_analysis, list_scenarios, parse_scenario, shipped_scenario


def _resolve(path: str) -> Path:
    """A scenario path, or the name of a shipped scenario."""
    p = Path(path)
    if p.is_file():
        return p
    try:
        return shipped_scenario(path)
    except ScenarioError:
        return p


def _load(path: str):
    try:
        return parse_scenario(_resolve(path))
    except ScenarioError as exc:
        click.echo(f"invalid scenario {path}:", err=True)
        for e in exc.errors:
            click.echo(f"  - {e}", err=True)
        sys.exit(runner.EXIT_INVALID)


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Wave-packet dynamics: Ehrenfest classification, effective trajectories, Wigner and Bohm analyses."""


@main.command()
@click.argument("scenario_file")
@click.option("--out", "out", type=click.Path(file_okay=False), default=None, help="Output directory.")
@click.option("--threads", type=click.IntRange(min=1), default=None, help="FFT worker threads.")
@click.option("--seed", type=click.IntRange(min=0, max=2**64 - 1), default=None, help="Override the scenario seed.")
@click.option("--tol-scale", type=float, default=1.0, show_default=True, help="Multiply every tolerance.")
@click.option("--force", is_flag=True, help="Replace an existing output directory.")
def run(scenario_file, out, threads, seed, tol_scale, force):
    """Run SCENARIO_FILE (a path or a shipped scenario name)."""
    sc = _load(scenario_file)
    if not tol_scale > 0:
        click.echo("--tol-scale must be positive", err=True)
        sys.exit(runner.EXIT_INVALID)
    try:
        result = runner.run_scenario(sc, out=out, threads=threads, seed=seed, tol_scale=tol_scale, force=force)
    except FileExistsError as exc:
        click.echo(str(exc), err=True)
        sys.exit(runner.EXIT_INVALID)
    click.echo(result.report, nl=False)
    click.echo(f"outputs: {result.directory}")
    sys.exit(result.exit_code)


@main.command()
@click.argument("scenario_file")
def validate(scenario_file):
    """Check SCENARIO_FILE and print it with defaults filled in."""
    import json

    sc = _load(scenario_file)
    click.echo(json.dumps(sc.to_dict(), indent=2, sort_keys=True))
    click.echo("valid")


@main.command("list")
def list_cmd():
    """List the shipped scenarios."""
    for name, desc in list_scenarios():
        click.echo(f"{name:24s} {desc}")


@main.command()
@click.argument("analysis")
def describe(analysis):
    """Document one analysis (moments, classify, effective, wigner, bohm, mixture, relativistic)."""
    try:
        click.echo(describe_analysis(analysis))
    except KeyError as exc:
        click.echo(exc.args[0], err=True)
        sys.exit(runner.EXIT_INVALID)


if __name__ == "__main__":  # pragma: no cover
    main()
