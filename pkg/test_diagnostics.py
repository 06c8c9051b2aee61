import numpy as np
import pytest

from geoflow.curve import reparametrize
from geoflow.diagnostics import (
    CSV_COLUMNS,
    DiagnosticsRecorder,
    InvariantMonitor,
    MonotonicityProbe,
    blowup_rate,
    chord_arc_variational_check,
    decay_fit,
    energy_report,
    estimate_blowup_time,
    homothetic_defect,
    kappa_sq_decay_residual,
    monotonicity_residual,
    monotonicity_terms,
    q_functional,
    wirtinger_decay_rate,
)
from geoflow.errors import DecayFitError, ProbeExpiredError, ResidualUndefinedError
from geoflow.flow import FlowConfig, FlowStatus, initial_state, run
from geoflow.scenarios import build_curve, region_for
from geoflow.selfsimilar import SolitonKind, SolitonSpec, soliton_curve
from test_factories import (
    DiagnosticRecordFactory,
    DoubleBumpScenarioFactory,
    HyperbolicScenarioFactory,
    LoopScenarioFactory,
    ScenarioFactory,
    SphereScenarioFactory,
)
from test_helpers import GeometryTest, plane_graph, plane_segment, steps


def sine_graph(n, amplitude=0.01):
    return plane_graph(lambda x: amplitude * np.sin(np.pi * x), n)


def unit_circle(n=256):
    return soliton_curve(SolitonSpec(kind=SolitonKind.SHRINKING_CIRCLE), n, prescribed=True)


class DiagnosticRecordTest(GeometryTest):
    def test_csv_row(self):
        record = DiagnosticRecordFactory(t=0.5, step=20, q_value=0.9)
        row = record.csv_row()

        assert len(row) == len(CSV_COLUMNS)
        assert row[CSV_COLUMNS.index("t")] == 0.5
        assert row[CSV_COLUMNS.index("q_value")] == 0.9
        assert row[CSV_COLUMNS.index("blowup_rate")] == ""
        assert row[CSV_COLUMNS.index("step")] == 20


class QFunctionalTest(GeometryTest):
    def test_line_through_center(self):
        state = initial_state(plane_segment((-10, 0), (10, 0), 400))
        probe = MonotonicityProbe([0.0, 0.0, 0.0], 0.25)
        assert abs(q_functional(state, probe) - 1.0) < 1e-6

    def test_expired_probe(self):
        state = initial_state(sine_graph(16))
        with pytest.raises(ProbeExpiredError, match="probe expired"):
            q_functional(state, MonotonicityProbe([0.5, 0.0, 0.0], 0.0))

    def test_positive_on_sphere(self):
        state = initial_state(build_curve(SphereScenarioFactory()))
        assert q_functional(state, MonotonicityProbe([1.0, 0.0, 0.0], 2.0)) > 0.0

    def test_reparametrization(self):
        curve = sine_graph(512, 0.1)
        again = reparametrize(curve, initial_state(curve).geom)
        probe = MonotonicityProbe([0.5, 0.0, 0.0], 0.5)
        difference = q_functional(initial_state(curve), probe) - q_functional(
            initial_state(again), probe
        )
        assert abs(difference) < 1e-5


class MonotonicityTest(GeometryTest):
    def test_shrinking_circle_is_homothetic(self):
        probe = MonotonicityProbe([0.0, 0.0, 0.0], 0.5)
        assert homothetic_defect(initial_state(unit_circle()), probe) < 1e-6

    def test_line_through_center_is_homothetic(self):
        state = initial_state(plane_segment((-1, 0), (1, 0), 32))
        assert homothetic_defect(state, MonotonicityProbe([0.0, 0.0, 0.0], 1.0)) == 0.0

    def test_generic_curve_has_defect(self):
        state = initial_state(sine_graph(32, 0.1))
        assert homothetic_defect(state, MonotonicityProbe([0.5, 0.0, 0.0], 1.0)) > 0.0

    def test_no_correction_on_the_plane(self):
        state = initial_state(sine_graph(32, 0.1))
        terms = monotonicity_terms(state, MonotonicityProbe([0.5, 0.05, 0.0], 0.3))
        assert terms.correction == 0.0
        assert terms.rhs == -terms.defect + terms.boundary

    def test_plane_residual_refinement(self):
        probe = MonotonicityProbe([0.5, 0.05, 0.0], 0.3)
        coarse = monotonicity_residual(steps(sine_graph(32, 0.1), 2), probe)
        fine = monotonicity_residual(steps(sine_graph(64, 0.1), 2), probe)
        assert fine < coarse

    def test_sphere_residual_refinement(self):
        probe = MonotonicityProbe([1.0, 0.0, 0.0], 2.0)
        coarse = monotonicity_residual(steps(build_curve(SphereScenarioFactory(n=32)), 2), probe)
        fine = monotonicity_residual(steps(build_curve(SphereScenarioFactory(n=64)), 2), probe)
        terms = monotonicity_terms(initial_state(build_curve(SphereScenarioFactory())), probe)

        assert np.isfinite(coarse)
        assert fine < coarse
        assert all(np.isfinite(value) for value in terms)

    def test_hyperbolic_residual_refinement(self):
        kernel = MonotonicityProbe([1.0, 0.0, 0.0], 2.0)
        coarse = monotonicity_residual(
            steps(build_curve(HyperbolicScenarioFactory(n=32)), 2), kernel
        )
        fine = monotonicity_residual(
            steps(build_curve(HyperbolicScenarioFactory(n=64)), 2), kernel
        )
        terms = monotonicity_terms(initial_state(build_curve(HyperbolicScenarioFactory())), kernel)

        assert np.isfinite(coarse)
        assert fine < coarse
        assert terms.correction != 0.0


class BlowupTest(GeometryTest):
    def test_shrinking_circle_rate(self):
        cfg = FlowConfig(kappa_blowup=10.0)
        final, records = run(unit_circle(64), cfg, [DiagnosticsRecorder()])
        report = blowup_rate(records, 0.5)
        rates = np.array([rate for rate in report.rates if rate is not None])

        assert final.status is FlowStatus.BLOWUP
        assert len(rates) == len(records)
        assert np.max(np.abs(rates - 2**-0.5)) < 0.02 * 2**-0.5
        assert report.classification == "type-1-like"
        assert abs(estimate_blowup_time(records) - 0.5) < 5e-3

    def test_type_two_like(self):
        times = np.linspace(0.0, 0.99, 50)
        records = [DiagnosticRecordFactory(t=t, kappa_sup=(1.0 - t) ** -0.75) for t in times]
        report = blowup_rate(records, 1.0)

        assert abs(report.exponent + 0.25) < 1e-9
        assert report.classification == "type-2-like"

    def test_no_singularity(self):
        records = [DiagnosticRecordFactory(t=0.1 * i, kappa_sup=0.0) for i in range(10)]
        report = blowup_rate(records, 2.0)
        assert report.classification == "no singularity at t*_est"
        assert report.rates == [0.0] * 10

    def test_estimate_in_the_past(self):
        records = [DiagnosticRecordFactory(t=0.1 * i, kappa_sup=1.0) for i in range(10)]
        report = blowup_rate(records, 0.0)
        assert report.rates == [None] * 10
        assert report.lower_bound_fraction == 0.0

    def test_estimate_blowup_time(self):
        with pytest.raises(ValueError):
            estimate_blowup_time([DiagnosticRecordFactory(), DiagnosticRecordFactory()])
        decaying = [DiagnosticRecordFactory(t=0.1 * i, kappa_sup=np.exp(-i)) for i in range(10)]
        assert estimate_blowup_time(decaying) is None


class DecayFitTest(GeometryTest):
    def test_exponential(self):
        records = [
            DiagnosticRecordFactory(t=0.01 * i, kappa_sq_integral=3.0 * np.exp(-0.02 * i))
            for i in range(40)
        ]
        fit = decay_fit(records)

        assert abs(fit.delta - 2.0) < 1e-9
        assert abs(fit.c - 3.0) < 1e-9
        assert fit.r_squared > 1.0 - 1e-12
        assert abs(fit.wirtinger_rate - 2.0 * np.pi**2) < 1e-12

    def test_too_few_records(self):
        records = [DiagnosticRecordFactory(t=0.01 * i) for i in range(19)]
        with pytest.raises(DecayFitError, match="at least 20 records"):
            decay_fit(records)

    def test_converged_to_geodesic(self):
        records = [DiagnosticRecordFactory(t=0.01 * i, kappa_sq_integral=0.0) for i in range(40)]
        with pytest.raises(DecayFitError, match="decay fit undefined"):
            decay_fit(records)

    def test_wirtinger_rate(self):
        assert wirtinger_decay_rate(np.pi, 1) == 0.0
        assert wirtinger_decay_rate(np.pi, -1) == 2.0

    def test_sine_mode_decay_rate(self):
        final, records = run(sine_graph(32), FlowConfig(), [DiagnosticsRecorder()])
        fit = decay_fit(records)

        assert final.status is FlowStatus.CONVERGED
        assert abs(fit.delta - 2.0 * np.pi**2) < 0.1 * 2.0 * np.pi**2
        assert fit.r_squared > 0.99


    def test_curved_surfaces_decay(self):
        for scenario in (SphereScenarioFactory(), HyperbolicScenarioFactory()):
            curve = build_curve(scenario)
            final, records = run(curve, FlowConfig(), [DiagnosticsRecorder()])
            gauss = curve.surface.gauss_curvature

            assert final.status is FlowStatus.CONVERGED, scenario.name
            for quantity in ("kappa_sq_integral", "dkappa_sq_integral"):
                fit = decay_fit(records, gauss, quantity)
                assert fit.delta > 0.0, (scenario.name, quantity)
                assert fit.r_squared > 0.99, (scenario.name, quantity)

    def test_sine_mode_gradient_decay_rate(self):
        _, records = run(sine_graph(32), FlowConfig(), [DiagnosticsRecorder()])
        fit = decay_fit(records, quantity="dkappa_sq_integral")

        assert abs(fit.delta - 2.0 * np.pi**2) < 0.1 * 2.0 * np.pi**2
        assert fit.r_squared > 0.99


class VariationalCheckTest(GeometryTest):
    def test_interior_minimum(self):
        state = initial_state(build_curve(DoubleBumpScenarioFactory()))
        report = chord_arc_variational_check(state)

        assert report.applicable
        assert report.identity_holds
        assert report.identity_error < 1e-4
        assert report.curvature_coefficient == report.distance / 4.0
        assert report.curvature_term_holds
        assert report.variation_error < 0.1 * max(1.0, abs(report.finite_difference))

    def test_boundary_minimum(self):
        report = chord_arc_variational_check(initial_state(sine_graph(32, 0.1)))
        assert not report.applicable
        assert report.message == "not applicable (boundary minimum)"
        assert report.variation_error is None


class RecorderTest(GeometryTest):
    def test_record(self):
        state = initial_state(sine_graph(32, 0.1))
        recorder = DiagnosticsRecorder()
        record = recorder(state)

        assert recorder.alpha_eps == 0.1 * state.geom.total_length
        assert record.length == state.geom.total_length
        assert record.q_value is None
        assert record.theta_min < 1.0
        assert record.kappa_sup == state.kappa_sup
        assert recorder.last_record is record

    def test_probe_values(self):
        recorder = DiagnosticsRecorder(probe=MonotonicityProbe([0.5, 0.0, 0.0], 0.02))
        _, records = run(sine_graph(32, 0.1), FlowConfig(t_max=0.03), [recorder])
        live = [record for record in records if record.t < 0.02]
        expired = [record for record in records if record.t >= 0.02]

        assert live and expired
        assert all(record.q_value > 0.0 for record in live)
        assert all(record.q_value is None for record in expired)
        integrals = [record.defect_integral for record in live]
        assert integrals[0] == 0.0
        assert all(b >= a for a, b in zip(integrals, integrals[1:]))


class InvariantMonitorTest(GeometryTest):
    def monitored_run(self, scenario, t_max):
        curve = build_curve(scenario)
        recorder = DiagnosticsRecorder()
        monitor = InvariantMonitor(
            recorder,
            in_hypothesis=scenario.in_hypothesis,
            region=region_for(scenario, curve),
        )
        run(curve, FlowConfig(t_max=t_max), [recorder, monitor])
        return monitor

    def test_plane_sine_holds(self):
        monitor = self.monitored_run(ScenarioFactory(curve={"kind": "sine", "amplitude": 0.1}), 0.1)
        assert monitor.violations == []

    def test_sphere_holds(self):
        monitor = self.monitored_run(SphereScenarioFactory(n=32), 0.1)
        assert monitor.violations == []

    def test_barrier_crossing(self):
        scenario = ScenarioFactory(
            curve={"kind": "sine", "amplitude": 0.3},
            barriers=(
                {"point": (0.0, 0.0, 0.0), "tangent": (1.0, 0.5, 0.0)},
                {"point": (1.0, 0.0, 0.0), "tangent": (0.0, 1.0, 0.0)},
            ),
        )
        curve = build_curve(scenario)
        recorder = DiagnosticsRecorder()
        monitor = InvariantMonitor(recorder, region=region_for(scenario, curve))
        state = initial_state(curve)
        recorder(state)
        monitor(state)

        assert [violation.check for violation in monitor.violations] == ["barrier"]

    def test_self_intersection(self):
        scenario = LoopScenarioFactory()
        state = initial_state(build_curve(scenario))
        recorder = DiagnosticsRecorder()
        monitor = InvariantMonitor(recorder, check_variational=False)
        recorder(state)
        monitor(state)

        assert "embedded" in [violation.check for violation in monitor.violations]

    def test_recorder_must_observe_first(self):
        monitor = InvariantMonitor(DiagnosticsRecorder())
        with pytest.raises(ValueError):
            monitor(initial_state(sine_graph(16)))


class EnergyTest(GeometryTest):
    def test_kappa_sq_decay_residual(self):
        first = DiagnosticRecordFactory(t=0.0, kappa_sq_integral=1.0, dkappa_sq_integral=1.0)
        second = DiagnosticRecordFactory(t=0.1, kappa_sq_integral=0.8, dkappa_sq_integral=1.0)

        assert kappa_sq_decay_residual(first, second, 0) < 1e-12
        assert abs(kappa_sq_decay_residual(first, second, 1) - 1.8) < 1e-12

    def test_kappa_sq_decay_residual_undefined(self):
        record = DiagnosticRecordFactory(t=0.5)
        with pytest.raises(ResidualUndefinedError, match="records share a time"):
            kappa_sq_decay_residual(record, record, 0)
        later = DiagnosticRecordFactory(t=0.6, regrid_count=1)
        with pytest.raises(ResidualUndefinedError, match="across regrid"):
            kappa_sq_decay_residual(record, later, 0)

    def test_plane_sine(self):
        def report(n):
            _, records = run(sine_graph(n), FlowConfig(t_max=0.01), [DiagnosticsRecorder()])
            return records, energy_report(records, 0)

        records, fine = report(64)
        _, coarse = report(32)
        t = records[-1].t
        expected = 0.01 * (1.0 - np.exp(-(np.pi**2) * t))

        assert fine.kappa_sq_relative < 0.05
        assert fine.kappa_sq_residual < coarse.kappa_sq_residual
        assert fine.balance_residual < 1e-2 * fine.dissipation
        assert abs(fine.length_loss - fine.dissipation) == fine.balance_residual
        assert abs(fine.kappa_sup_integral - expected) < 0.02 * expected

    def test_sphere(self):
        curve = build_curve(SphereScenarioFactory(n=64))
        cfg = FlowConfig(t_max=0.01, record_every=1)
        _, records = run(curve, cfg, [DiagnosticsRecorder()])
        report = energy_report(records, 1)

        assert report.kappa_sq_relative < 0.05
        assert report.balance_residual < 1e-2 * report.dissipation
        assert report.kappa_sup_integral > 0.0
        integrals = [record.dissipation_integral for record in records]
        assert all(b >= a for a, b in zip(integrals, integrals[1:]))

    def test_single_record(self):
        report = energy_report([DiagnosticRecordFactory(length=2.0)], 0)
        assert report.length_loss == 0.0
        assert report.dissipation == 0.0
        assert report.kappa_sq_residual is None
        assert report.kappa_sq_relative is None
