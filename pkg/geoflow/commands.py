from pathlib import Path

import click

from geoflow.app import init_error_reporting
from geoflow.errors import GeoflowError
from geoflow.runner import run_scenario, sweep
from geoflow.scenarios import load_scenario, validate_scenario
from geoflow.selfsimilar import SolitonKind, SolitonSpec, refinement_order, soliton_residuals

scenario_path = click.Path(exists=True, dir_okay=False, path_type=Path)


@click.group()
def cli():
    """Curve shortening flow on the sphere, the plane and the hyperbolic plane"""
    init_error_reporting()


def _fail(error):
    raise click.ClickException(str(error))


@cli.command()
@click.argument("path", type=scenario_path)
def validate(path):
    """Check a scenario against the hypotheses of the convergence theorem"""
    try:
        report = validate_scenario(load_scenario(path))
    except GeoflowError as e:
        _fail(e)
    for check in report.checks:
        click.echo(f"{'pass' if check.passed else 'FAIL'}  {check.name}: {check.detail}")
    if not report.passed:
        raise SystemExit(1)


@cli.command()
@click.argument("path", type=scenario_path)
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), default=None)
@click.option("--force", is_flag=True, help="Run even if the scenario fails validation")
def run(path, out, force):
    """Run a scenario and write diagnostics, snapshots and a summary"""
    try:
        output = run_scenario(path, out, force)
    except GeoflowError as e:
        _fail(e)
    if output.status is None:
        for check in output.validation.failures:
            click.echo(f"FAIL  {check.name}: {check.detail}", err=True)
        click.echo("Scenario failed validation, use --force to run anyway", err=True)
    else:
        click.echo(f"{output.status.value}: output written to {output.directory}")
        for violation in output.violations:
            click.echo(f"violated {violation.check} at t={violation.t:g}: {violation.detail}")
    raise SystemExit(output.exit_code)


@cli.command("soliton-check")
@click.option("--grim-reaper", is_flag=True, help="Translator residual of the grim reaper")
@click.option("--circle", is_flag=True, help="Homothetic residual of the unit circle")
@click.option("--geodesic", is_flag=True, help="Both residuals of a straight segment")
@click.option("--n", "n", type=click.IntRange(min=8), default=256, show_default=True)
def soliton_check(grim_reaper, circle, geodesic, n):
    """Print soliton residuals at n and 2n intervals and the observed order"""
    selected = [
        kind
        for kind, flag in (
            (SolitonKind.GRIM_REAPER, grim_reaper),
            (SolitonKind.SHRINKING_CIRCLE, circle),
            (SolitonKind.GEODESIC, geodesic),
        )
        if flag
    ] or list(SolitonKind)
    for kind in selected:
        spec = SolitonSpec(kind=kind)
        coarse = soliton_residuals(spec, n)
        fine = soliton_residuals(spec, 2 * n)
        for name, value in coarse.items():
            order = refinement_order(value, fine[name])
            order = "-" if order is None else f"{order:.2f}"
            click.echo(
                f"{kind.value:<17} {name:<11} n={n:<6} {value:.3e}  "
                f"n={2 * n:<6} {fine[name]:.3e}  order {order}"
            )


@cli.command("sweep")
@click.argument("directory", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), default=None)
@click.option("--force", is_flag=True, help="Run scenarios that fail validation")
@click.option("--workers", type=click.IntRange(min=1), default=None)
def sweep_command(directory, out, force, workers):
    """Run every scenario in a directory in parallel"""
    try:
        results = sweep(directory, out, force, workers)
    except GeoflowError as e:
        _fail(e)
    for path, code in results:
        click.echo(f"{code}  {path.name}")
    if any(code != 0 for _, code in results):
        raise SystemExit(max(code for _, code in results))
