"""
Running scenarios end to end and writing their output directory:
diagnostics.csv, snapshots.jsonl and summary.json.
"""
import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, replace
from pathlib import Path
from typing import List, NamedTuple, Optional, Sequence

import simplejson

from geoflow.app import json_kwargs, logger, output_root
from geoflow.diagnostics import (
    CSV_COLUMNS,
    DiagnosticsRecorder,
    InvariantMonitor,
    MonotonicityProbe,
    blowup_rate,
    decay_fit,
    energy_report,
    estimate_blowup_time,
)
from geoflow.errors import DecayFitError, OutputError
from geoflow.flow import FlowStatus, run
from geoflow.scenarios import (
    Scenario,
    ValidationReport,
    build_curve,
    load_scenario,
    region_for,
    validate_scenario,
)

EXIT_VALIDATION_FAILED = 1
EXIT_INVARIANT_VIOLATED = 4
STATUS_EXIT_CODES = {
    FlowStatus.CONVERGED: 0,
    FlowStatus.BLOWUP: 2,
    FlowStatus.TIMEOUT: 3,
}


class SnapshotCollector:
    """Keeps the curve at every k-th observation and at the final state."""

    def __init__(self, every: int):
        self.every = every
        self.snapshots = []
        self._calls = 0

    def __call__(self, state):
        if self._calls % self.every == 0 or state.status is not FlowStatus.RUNNING:
            self.snapshots.append({"t": state.t, "points": state.curve.points.copy()})
        self._calls += 1


class Simulation(NamedTuple):
    final: object
    records: list
    violations: list
    snapshots: list
    blowup: Optional[object]
    decay: Optional[object]
    gradient_decay: Optional[object]
    energy: Optional[object]


def simulate(scenario: Scenario) -> Simulation:
    curve = build_curve(scenario)
    settings = scenario.diagnostics
    probe = None
    if settings.probe is not None:
        probe = MonotonicityProbe(settings.probe.p_star, settings.probe.t_star)
    recorder = DiagnosticsRecorder(settings.alpha_eps, settings.alpha_fraction, probe)
    monitor = InvariantMonitor(
        recorder,
        in_hypothesis=scenario.in_hypothesis,
        region=region_for(scenario, curve) if scenario.in_hypothesis else None,
    )
    snapshots = SnapshotCollector(settings.snapshot_every)

    final, records = run(curve, scenario.flow, [recorder, monitor, snapshots])

    blowup = None
    t_star = settings.t_star_estimate
    if t_star is None and final.status is FlowStatus.BLOWUP:
        try:
            t_star = estimate_blowup_time(records)
        except ValueError as e:
            logger.warning("No blowup time estimate for %s: %s", scenario.name, e)
    if t_star is not None:
        blowup = blowup_rate(records, t_star)
        records = [
            replace(record, blowup_rate=rate) for record, rate in zip(records, blowup.rates)
        ]

    gauss = curve.surface.gauss_curvature
    decay = gradient_decay = None
    if final.status is FlowStatus.CONVERGED:
        try:
            decay = decay_fit(records, gauss)
            gradient_decay = decay_fit(records, gauss, quantity="dkappa_sq_integral")
        except DecayFitError as e:
            logger.info("No decay fit for %s: %s", scenario.name, e)

    energy = energy_report(records, gauss) if curve.has_fixed_ends else None

    return Simulation(
        final,
        records,
        monitor.violations,
        snapshots.snapshots,
        blowup,
        decay,
        gradient_decay,
        energy,
    )


def exit_code(status: FlowStatus, violations: Sequence) -> int:
    if status is not FlowStatus.BLOWUP and violations:
        return EXIT_INVARIANT_VIOLATED
    return STATUS_EXIT_CODES[status]


def write_diagnostics(path: Path, records):
    with path.open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(CSV_COLUMNS)
        for record in records:
            writer.writerow(record.csv_row())


def write_snapshots(path: Path, snapshots):
    with path.open("w") as f:
        for snapshot in snapshots:
            f.write(simplejson.dumps(snapshot, **json_kwargs()) + "\n")


def write_summary(path: Path, summary: dict):
    with path.open("w") as f:
        simplejson.dump(summary, f, indent=2, **json_kwargs())


def _summary(scenario: Scenario, validation: ValidationReport, simulation: Simulation, code):
    final = simulation.final
    summary = {
        "scenario": scenario.name,
        "surface": scenario.surface,
        "in_hypothesis": scenario.in_hypothesis,
        "status": final.status,
        "message": final.message,
        "exit_code": code,
        "t": final.t,
        "steps": final.step,
        "regrid_count": final.regrid_count,
        "kappa_sup": final.kappa_sup,
        "length": final.geom.total_length,
        "records": len(simulation.records),
        "validation": [check._asdict() for check in validation.checks],
        "violations": [asdict(violation) for violation in simulation.violations],
        "blowup": None,
        "decay": None,
        "gradient_decay": None,
        "energy": None,
    }
    if simulation.blowup is not None:
        blowup = simulation.blowup._asdict()
        del blowup["rates"]
        summary["blowup"] = blowup
    if simulation.decay is not None:
        summary["decay"] = simulation.decay._asdict()
    if simulation.gradient_decay is not None:
        summary["gradient_decay"] = simulation.gradient_decay._asdict()
    if simulation.energy is not None:
        summary["energy"] = simulation.energy._asdict()
    return summary


class RunOutput(NamedTuple):
    directory: Optional[Path]
    status: Optional[FlowStatus]
    exit_code: int
    validation: ValidationReport
    violations: list


def run_scenario(path, out=None, force: bool = False) -> RunOutput:
    """Run the scenario file at path and write its output directory."""
    scenario = load_scenario(path)
    validation = validate_scenario(scenario)
    if not validation.passed and not force:
        return RunOutput(None, None, EXIT_VALIDATION_FAILED, validation, [])

    directory = Path(out) if out is not None else output_root() / scenario.name
    simulation = simulate(scenario)
    code = exit_code(simulation.final.status, simulation.violations)

    try:
        directory.mkdir(parents=True, exist_ok=True)
        write_diagnostics(directory / "diagnostics.csv", simulation.records)
        write_snapshots(directory / "snapshots.jsonl", simulation.snapshots)
        write_summary(
            directory / "summary.json", _summary(scenario, validation, simulation, code)
        )
    except OSError as e:
        raise OutputError(f"cannot write output to {e.filename or directory}: {e.strerror}")
    logger.info("Wrote %s output to %s", scenario.name, directory)

    return RunOutput(directory, simulation.final.status, code, validation, simulation.violations)


def _run_in_worker(path: Path, out: Path, force: bool):
    output = run_scenario(path, out, force)
    return path, output.exit_code


def sweep(directory, out_root=None, force: bool = False, workers: Optional[int] = None):
    """Run every scenario file in directory in parallel worker processes."""
    paths = sorted(Path(directory).glob("*.json"))
    out_root = Path(out_root) if out_root is not None else output_root()
    results: List[tuple] = []
    with ProcessPoolExecutor(max_workers=workers) as executor:
        futures = [
            executor.submit(_run_in_worker, path, out_root / path.stem, force) for path in paths
        ]
        for future in futures:
            results.append(future.result())
    return results
