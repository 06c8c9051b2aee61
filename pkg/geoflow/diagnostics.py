"""
Functionals monitored along a flow: length and curvature integrals, the
chord-arc ratio, the backwards heat kernel functional Q and its monotonicity
identity, blowup-rate classification and exponential decay fits.
"""
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import trapezoid
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize

from geoflow.app import logger
from geoflow.curve import (
    alpha_epsilon,
    chord_arc_scan,
    dkappa_sq_integral,
    kappa_quartic_integral,
    kappa_sq_integral,
    self_intersection_count,
    total_turning,
)
from geoflow.errors import (
    DecayFitError,
    GeometryError,
    ProbeExpiredError,
    ResidualUndefinedError,
)
from geoflow.flow import FlowState, check_residual_window, time_derivative

CSV_COLUMNS = (
    "t",
    "length",
    "kappa_sq_integral",
    "dkappa_sq_integral",
    "turning",
    "kappa_sup",
    "theta_min",
    "alpha",
    "q_value",
    "blowup_rate",
    "homothetic_defect",
    "defect_integral",
    "step",
)

TYPE_ONE_BAND = 0.1
MIN_DECAY_RECORDS = 20
DECAY_FLOOR = 1e-24
VARIATIONAL_TOLERANCE = 1e-4
GAUSS_NODES, GAUSS_WEIGHTS = leggauss(8)


@dataclass(frozen=True)
class DiagnosticRecord:
    t: float
    length: float
    kappa_sq_integral: float
    dkappa_sq_integral: float
    turning: float
    kappa_sup: float
    theta_min: float
    alpha: float
    q_value: Optional[float] = None
    blowup_rate: Optional[float] = None
    homothetic_defect: Optional[float] = None
    defect_integral: Optional[float] = None
    step: int = 0
    regrid_count: int = 0
    kappa_quartic_integral: float = 0.0
    dissipation_integral: float = 0.0
    kappa_sup_integral: float = 0.0

    def csv_row(self):
        values = (getattr(self, column) for column in CSV_COLUMNS)
        return ["" if value is None else value for value in values]


@dataclass(frozen=True)
class MonotonicityProbe:
    p_star: np.ndarray
    t_star: float

    def __post_init__(self):
        object.__setattr__(self, "p_star", np.array(self.p_star, dtype=float))

    def remaining_time(self, t: float) -> float:
        tau = self.t_star - t
        if tau <= 0.0:
            raise ProbeExpiredError("probe expired")
        return tau


def heat_kernel(rho, tau):
    return np.exp(-(rho**2) / (4.0 * tau)) / np.sqrt(4.0 * np.pi * tau)


def q_functional(state: FlowState, probe: MonotonicityProbe) -> float:
    tau = probe.remaining_time(state.t)
    rho = state.curve.surface.geodesic_distance(probe.p_star, state.curve.points)
    return float(trapezoid(heat_kernel(rho, tau), state.geom.s))


class MonotonicityTerms(NamedTuple):
    defect: float
    boundary: float
    correction: float

    @property
    def rhs(self) -> float:
        """dQ/dt as predicted by the three terms."""
        return -self.defect + self.boundary - self.correction


def monotonicity_terms(state: FlowState, probe: MonotonicityProbe) -> MonotonicityTerms:
    tau = probe.remaining_time(state.t)
    curve, geom = state.curve, state.geom
    surface = curve.surface

    # rho * W, with W the unit tangent at F(u) of the geodesic leaving p_star
    radial = -surface.log(curve.points, probe.p_star)
    rho = surface.norm(radial)
    kernel = heat_kernel(rho, tau)
    normal_part = surface.dot(radial, geom.N)
    tangent_part = surface.dot(radial, geom.T)

    defect = kernel * (state.kappa + normal_part / (2.0 * tau)) ** 2
    flux = kernel * tangent_part / (2.0 * tau)

    far = rho > 1e-12
    profile, slope = surface.scale_profile(rho[far])
    excess = np.zeros_like(rho)
    excess[far] = rho[far] * slope / profile - 1.0
    cos_sq = np.zeros_like(rho)
    cos_sq[far] = (tangent_part[far] / rho[far]) ** 2
    correction = kernel / (2.0 * tau) * (1.0 - cos_sq) * excess

    return MonotonicityTerms(
        defect=float(trapezoid(defect, geom.s)),
        boundary=float(flux[-1] - flux[0]),
        correction=float(trapezoid(correction, geom.s)),
    )


def monotonicity_residual(history: Sequence[FlowState], probe: MonotonicityProbe) -> float:
    check_residual_window(history)
    values = [q_functional(state, probe) for state in history]
    rate = time_derivative(history, values)
    return float(abs(rate - monotonicity_terms(history[1], probe).rhs))


def homothetic_defect(state: FlowState, probe: MonotonicityProbe) -> float:
    return monotonicity_terms(state, probe).defect


class BlowupReport(NamedTuple):
    t_star: float
    rates: List[Optional[float]]
    exponent: float
    classification: str
    lower_bound_fraction: float


def blowup_rate(records: Sequence, t_star_estimate: float) -> BlowupReport:
    """
    sqrt(t* - t) * sup|kappa| per record, and a classification from the
    exponent of that series against t* - t over the tail.
    """
    times = np.array([record.t for record in records], dtype=float)
    sup = np.array([record.kappa_sup for record in records], dtype=float)
    remaining = t_star_estimate - times
    valid = remaining > 0.0
    rates = np.full(len(records), np.nan)
    rates[valid] = np.sqrt(remaining[valid]) * sup[valid]

    indices = np.flatnonzero(valid)
    tail = indices[len(indices) // 2 :]
    tail = tail[rates[tail] > 0.0]
    exponent = float("nan")
    classification = "no singularity at t*_est"
    if len(tail) >= 3:
        exponent = float(np.polyfit(np.log(remaining[tail]), np.log(rates[tail]), 1)[0])
        if abs(exponent) <= TYPE_ONE_BAND:
            classification = "type-1-like"
        elif exponent < -TYPE_ONE_BAND:
            classification = "type-2-like"

    threshold = 2.0**-0.5 * (1.0 - 1e-6)
    fraction = float(np.mean(rates[valid] >= threshold)) if np.any(valid) else 0.0
    return BlowupReport(
        t_star=float(t_star_estimate),
        rates=[float(rate) if np.isfinite(rate) else None for rate in rates],
        exponent=exponent,
        classification=classification,
        lower_bound_fraction=fraction,
    )


def estimate_blowup_time(records: Sequence, tail_fraction: float = 0.25) -> Optional[float]:
    """
    Extrapolate sup|kappa|^-2 linearly in t to zero. Returns None when the
    tail does not forecast a finite blowup time.
    """
    usable = [record for record in records if record.kappa_sup > 0.0]
    if len(usable) < 3:
        raise ValueError("blowup time estimate needs at least three records")
    tail = usable[-max(3, int(len(usable) * tail_fraction)) :]
    times = np.array([record.t for record in tail])
    inverse = np.array([record.kappa_sup for record in tail]) ** -2
    slope = np.polyfit(times, inverse, 1)[0]
    if slope >= 0.0:
        return None
    return float(times[-1] - inverse[-1] / slope)


class DecayFit(NamedTuple):
    delta: float
    c: float
    r_squared: float
    wirtinger_rate: float


def wirtinger_decay_rate(length: float, gauss_curvature: int) -> float:
    """Exponential rate of decay of the integral of kappa^2 allowed by Wirtinger's inequality."""
    return 2.0 * (np.pi / length) ** 2 - 2.0 * max(0, gauss_curvature)


def decay_fit(
    records: Sequence, gauss_curvature: int = 0, quantity: str = "kappa_sq_integral"
) -> DecayFit:
    """Least-squares fit of log(quantity) = log(c) - delta t over the later half of records."""
    if len(records) < MIN_DECAY_RECORDS:
        raise DecayFitError(f"decay fit needs at least {MIN_DECAY_RECORDS} records")
    tail = records[len(records) // 2 :]
    values = np.array([getattr(record, quantity) for record in tail], dtype=float)
    if not np.all(np.isfinite(values)) or np.any(values <= DECAY_FLOOR):
        raise DecayFitError("decay fit undefined")
    times = np.array([record.t for record in tail], dtype=float)
    logs = np.log(values)
    slope, intercept = np.polyfit(times, logs, 1)
    residual = np.sum((logs - (slope * times + intercept)) ** 2)
    total = np.sum((logs - logs.mean()) ** 2)
    r_squared = 1.0 - residual / total if total > 0.0 else 1.0
    return DecayFit(
        delta=float(-slope),
        c=float(np.exp(intercept)),
        r_squared=float(r_squared),
        wirtinger_rate=float(wirtinger_decay_rate(tail[-1].length, gauss_curvature)),
    )


def kappa_sq_rate(record, gauss_curvature: int) -> float:
    """d/dt of the integral of kappa^2 ds predicted from one record's integrals."""
    return (
        -2.0 * record.dkappa_sq_integral
        + record.kappa_quartic_integral
        + 2.0 * gauss_curvature * record.kappa_sq_integral
    )


def kappa_sq_decay_residual(first, second, gauss_curvature: int) -> float:
    """|d/dt of the integral of kappa^2 ds minus its predicted rate| between two records."""
    if second.t == first.t:
        raise ResidualUndefinedError("records share a time")
    if first.regrid_count != second.regrid_count:
        raise ResidualUndefinedError("residual undefined across regrid")
    rate = (second.kappa_sq_integral - first.kappa_sq_integral) / (second.t - first.t)
    predicted = 0.5 * (
        kappa_sq_rate(first, gauss_curvature) + kappa_sq_rate(second, gauss_curvature)
    )
    return abs(rate - predicted)


class EnergyReport(NamedTuple):
    length_loss: float
    dissipation: float
    balance_residual: float
    kappa_sup_integral: float
    kappa_sq_residual: Optional[float]
    kappa_sq_relative: Optional[float]


def energy_report(records: Sequence, gauss_curvature: int) -> EnergyReport:
    """
    Length lost against the time integral of the integral of kappa^2 ds, the
    time integral of sup |kappa| and the worst kappa^2 decay residual over
    consecutive records with no regrid between them. Only meaningful when both
    endpoints are fixed.
    """
    if not records:
        raise ValueError("an energy report needs at least one record")
    first, last = records[0], records[-1]
    length_loss = first.length - last.length
    dissipation = last.dissipation_integral

    worst = None
    relative = None
    for before, after in zip(records, records[1:]):
        if before.regrid_count != after.regrid_count or before.t == after.t:
            continue
        residual = kappa_sq_decay_residual(before, after, gauss_curvature)
        scale = 0.5 * sum(
            2.0 * record.dkappa_sq_integral
            + record.kappa_quartic_integral
            + 2.0 * abs(gauss_curvature) * record.kappa_sq_integral
            for record in (before, after)
        )
        worst = residual if worst is None else max(worst, residual)
        if scale > 0.0:
            ratio = residual / scale
            relative = ratio if relative is None else max(relative, ratio)
    return EnergyReport(
        length_loss=float(length_loss),
        dissipation=float(dissipation),
        balance_residual=float(abs(length_loss - dissipation)),
        kappa_sup_integral=float(last.kappa_sup_integral),
        kappa_sq_residual=worst,
        kappa_sq_relative=relative,
    )


class _SmoothCurve:
    """Cubic spline through the nodes of a state, parametrized by node arclength."""

    def __init__(self, state: FlowState):
        self.surface = state.curve.surface
        self.knots = state.geom.s
        self.spline = CubicSpline(self.knots, state.curve.points, axis=0)
        segments = self._segment_lengths(self.knots[:-1], self.knots[1:])
        self._arc = np.concatenate([[0.0], np.cumsum(segments)])

    @property
    def end(self) -> float:
        return float(self.knots[-1])

    def point(self, sigma):
        return self.surface.project(self.spline(sigma))

    def _velocity(self, sigma):
        raw = self.spline(sigma)
        point = self.surface.project(raw)
        scale = np.asarray(self.surface.projection_scale(raw))
        velocity = self.surface.project_tangent(point, self.spline(sigma, 1))
        return point, velocity / scale[..., None]

    def _segment_lengths(self, lower, upper):
        half = (upper - lower) / 2.0
        sigma = ((upper + lower) / 2.0)[:, None] + half[:, None] * GAUSS_NODES[None, :]
        speed = self.surface.norm(self._velocity(sigma)[1])
        return half * (speed @ GAUSS_WEIGHTS)

    def arclength(self, sigma: float) -> float:
        k = np.searchsorted(self.knots, sigma, side="right") - 1
        k = int(np.clip(k, 0, len(self.knots) - 2))
        partial = self._segment_lengths(np.array([self.knots[k]]), np.array([sigma]))[0]
        return float(self._arc[k] + partial)

    def tangent(self, sigma: float):
        _, velocity = self._velocity(np.asarray(sigma, dtype=float))
        return velocity / self.surface.norm(velocity)

    def curvature_vector(self, sigma: float, delta: float = 1e-4):
        point, velocity = self._velocity(np.asarray(sigma, dtype=float))
        speed = self.surface.norm(velocity)
        normal = self.surface.rotate(point, velocity / speed)
        normal = normal / self.surface.norm(normal)
        second = (self.point(sigma + delta) - 2.0 * point + self.point(sigma - delta)) / delta**2
        return float(self.surface.dot(second, normal) / speed**2) * normal


def _refine_minimum(smooth: _SmoothCurve, start: Tuple[float, float], h: float):
    """Continuous minimum of D/L near a node pair."""
    surface = smooth.surface

    def ratio(x):
        first, second = x
        if not 0.0 <= first < second <= smooth.end:
            return 2.0
        arc = smooth.arclength(second) - smooth.arclength(first)
        if arc <= 0.0:
            return 2.0
        return float(surface.geodesic_distance(smooth.point(first), smooth.point(second)) / arc)

    start = np.asarray(start, dtype=float)
    simplex = np.array([start, start + [h, 0.0], start + [0.0, h]])
    result = minimize(
        ratio,
        start,
        method="Nelder-Mead",
        options={"initial_simplex": simplex, "xatol": 1e-10, "fatol": 1e-15, "maxiter": 4000},
    )
    if not result.success:
        logger.debug("Chord-arc refinement stopped early: %s", result.message)
    if result.fun <= ratio(start):
        return float(result.x[0]), float(result.x[1])
    return float(start[0]), float(start[1])


@dataclass(frozen=True)
class VariationalReport:
    applicable: bool
    message: str
    argmin: Optional[Tuple[int, int]] = None
    sigma: Optional[Tuple[float, float]] = None
    distance: Optional[float] = None
    theta: Optional[float] = None
    t_dot_w: Optional[Tuple[float, float]] = None
    identity_error: Optional[float] = None
    epsilon: int = 1
    a: Optional[float] = None
    b: Optional[float] = None
    curvature_term: Optional[float] = None
    curvature_coefficient: Optional[float] = None
    second_variation: Optional[float] = None
    finite_difference: Optional[float] = None
    h: Optional[float] = None
    tolerance: float = VARIATIONAL_TOLERANCE

    @property
    def identity_holds(self) -> bool:
        return self.applicable and self.identity_error <= self.tolerance

    @property
    def curvature_term_holds(self) -> bool:
        return self.applicable and self.curvature_term >= -self.tolerance

    @property
    def variation_error(self) -> Optional[float]:
        if not self.applicable:
            return None
        return abs(self.second_variation - self.finite_difference)


def chord_arc_variational_check(
    state: FlowState, tolerance: float = VARIATIONAL_TOLERANCE
) -> VariationalReport:
    """
    First and second variation of the geodesic distance D at an interior
    minimum of D/L, refined off the grid on a cubic spline through the nodes.
    """
    curve, geom = state.curve, state.geom
    scan = chord_arc_scan(curve, geom)
    if not scan.interior:
        return VariationalReport(False, "not applicable (boundary minimum)", tolerance=tolerance)

    surface = curve.surface
    smooth = _SmoothCurve(state)
    h = geom.total_length / curve.n
    i, j = scan.argmin
    first, second = _refine_minimum(smooth, (geom.s[i], geom.s[j]), h)

    p, q = smooth.point(first), smooth.point(second)
    distance = float(surface.geodesic_distance(p, q))
    theta = distance / (smooth.arclength(second) - smooth.arclength(first))
    w_p = surface.log(p, q) / distance
    w_q = -surface.log(q, p) / distance
    t_p, t_q = smooth.tangent(first), smooth.tangent(second)
    t_dot_w = (float(surface.dot(w_p, t_p)), float(surface.dot(w_q, t_q)))

    across_p = float(surface.dot(t_p, surface.rotate(p, w_p)))
    across_q = float(surface.dot(t_q, surface.rotate(q, w_q)))
    epsilon = 1 if across_p * across_q >= 0.0 else -1
    a, b = across_p, epsilon * across_q

    curvature_term = float(
        surface.dot(smooth.curvature_vector(second), w_q)
        - surface.dot(smooth.curvature_vector(first), w_p)
    )
    profile, slope = (float(value) for value in surface.scale_profile(distance / 2.0))
    second_variation = (
        curvature_term
        + 0.5 * (a - b) ** 2 * slope / profile
        - 0.5 * surface.gauss_curvature * (a + b) ** 2 * profile / slope
    )

    room = min(first, smooth.end - second)
    if epsilon < 0:
        room = min(room, (second - first) / 2.0)
    step = min(h, 0.5 * room)

    def distance_at(shift):
        return float(
            surface.geodesic_distance(
                smooth.point(first + shift), smooth.point(second + epsilon * shift)
            )
        )

    finite_difference = (distance_at(step) - 2.0 * distance + distance_at(-step)) / step**2

    return VariationalReport(
        applicable=True,
        message="interior minimum",
        argmin=(i, j),
        sigma=(first, second),
        distance=distance,
        theta=theta,
        t_dot_w=t_dot_w,
        identity_error=max(abs(value - theta) for value in t_dot_w),
        epsilon=epsilon,
        a=a,
        b=b,
        curvature_term=curvature_term,
        curvature_coefficient=profile / (2.0 * slope),
        second_variation=float(second_variation),
        finite_difference=float(finite_difference),
        h=step,
        tolerance=tolerance,
    )


class DiagnosticsRecorder:
    """
    Flow observer producing one DiagnosticRecord per call. The alpha window
    defaults to a fraction of the first observed length.
    """

    def __init__(self, alpha_eps=None, alpha_fraction=0.1, probe=None):
        self.alpha_eps = alpha_eps
        self.alpha_fraction = alpha_fraction
        self.probe = probe
        self.last_record = None
        self.last_scan = None
        self._defect_integral = 0.0
        self._previous_defect = None
        self._dissipation = 0.0
        self._sup_integral = 0.0
        self._previous_integrands = None

    def _probe_values(self, state):
        if self.probe is None or state.t >= self.probe.t_star:
            return None, None, None
        q_value = q_functional(state, self.probe)
        defect = monotonicity_terms(state, self.probe).defect
        if self._previous_defect is not None:
            t0, d0 = self._previous_defect
            self._defect_integral += 0.5 * (d0 + defect) * (state.t - t0)
        self._previous_defect = (state.t, defect)
        return q_value, defect, self._defect_integral

    def __call__(self, state: FlowState) -> DiagnosticRecord:
        geom = state.geom
        kappa = state.kappa
        if self.alpha_eps is None:
            self.alpha_eps = self.alpha_fraction * geom.total_length
        scan = chord_arc_scan(state.curve, geom)
        q_value, defect, integral = self._probe_values(state)
        kappa_sq = kappa_sq_integral(kappa, geom.s)
        kappa_sup = float(np.max(np.abs(kappa)))
        if self._previous_integrands is not None:
            t0, sq0, sup0 = self._previous_integrands
            self._dissipation += 0.5 * (sq0 + kappa_sq) * (state.t - t0)
            self._sup_integral += 0.5 * (sup0 + kappa_sup) * (state.t - t0)
        self._previous_integrands = (state.t, kappa_sq, kappa_sup)

        record = DiagnosticRecord(
            t=float(state.t),
            length=float(geom.total_length),
            kappa_sq_integral=kappa_sq,
            dkappa_sq_integral=dkappa_sq_integral(kappa, geom.s),
            turning=total_turning(geom, kappa),
            kappa_sup=kappa_sup,
            theta_min=float(scan.theta_min),
            alpha=alpha_epsilon(geom, self.alpha_eps, kappa),
            q_value=q_value,
            homothetic_defect=defect,
            defect_integral=integral,
            step=state.step,
            regrid_count=state.regrid_count,
            kappa_quartic_integral=kappa_quartic_integral(kappa, geom.s),
            dissipation_integral=self._dissipation,
            kappa_sup_integral=self._sup_integral,
        )
        self.last_record = record
        self.last_scan = scan
        return record


@dataclass(frozen=True)
class InvariantViolation:
    check: str
    t: float
    step: int
    detail: str


@dataclass
class InvariantMonitor:
    """
    Flow observer checking the monotone quantities and inequalities of the
    flow against the records of ``recorder``, which must observe first.
    """

    recorder: DiagnosticsRecorder
    in_hypothesis: bool = True
    region: Optional[object] = None
    check_variational: bool = True
    violations: List[InvariantViolation] = field(default_factory=list)
    _previous: Optional[DiagnosticRecord] = None
    _theta_floor: Optional[float] = None

    def _violate(self, check, record, detail):
        logger.warning("Invariant %s violated at t=%g: %s", check, record.t, detail)
        self.violations.append(InvariantViolation(check, record.t, record.step, detail))

    def __call__(self, state: FlowState):
        record = self.recorder.last_record
        if record is None or record.step != state.step:
            raise ValueError("invariant monitor must observe after its recorder")
        curve = state.curve
        surface = curve.surface
        chord = float(surface.geodesic_distance(curve.points[0], curve.points[-1]))

        if self._theta_floor is None:
            self._theta_floor = min(record.theta_min, chord / record.length)

        previous = self._previous
        if previous is not None and curve.has_fixed_ends:
            if record.length >= previous.length + 1e-12:
                self._violate(
                    "length_decreasing", record, f"{record.length!r} after {previous.length!r}"
                )
            drift = 1e-8 * (record.step - previous.step)
            if (
                record.regrid_count == previous.regrid_count
                and record.turning > previous.turning + drift
            ):
                self._violate(
                    "turning_non_increasing",
                    record,
                    f"{record.turning!r} after {previous.turning!r}",
                )

        if record.length < chord - 1e-9:
            self._violate("length_lower_bound", record, f"L={record.length!r} below D={chord!r}")
        if record.theta_min < self._theta_floor - 1e-3:
            self._violate(
                "chord_arc_floor",
                record,
                f"theta_min={record.theta_min!r} below floor {self._theta_floor!r}",
            )

        if self.in_hypothesis:
            try:
                crossings = self_intersection_count(curve)
            except GeometryError as e:
                self._violate("embedded", record, str(e))
            else:
                if crossings:
                    self._violate("embedded", record, f"{crossings} self-intersections")
            if self.region is not None:
                outside = int(np.count_nonzero(~self.region(curve.points)))
                if outside:
                    self._violate("barrier", record, f"{outside} nodes outside the region")

        if curve.has_fixed_ends:
            gauss = surface.gauss_curvature
            if record.length < np.pi or gauss <= 0:
                bound = (record.length / np.pi) ** 2 * record.dkappa_sq_integral
                if record.kappa_sq_integral > bound + 1e-8:
                    self._violate(
                        "wirtinger", record, f"{record.kappa_sq_integral!r} > {bound!r}"
                    )
            bound = record.length * record.dkappa_sq_integral
            if record.kappa_sup**2 > bound + 1e-8:
                self._violate("sobolev", record, f"{record.kappa_sup ** 2!r} > {bound!r}")

        if (
            self.check_variational
            and surface.gauss_curvature >= 0
            and self.recorder.last_scan.interior
            and record.theta_min < 1.0 - 1e-9
        ):
            report = chord_arc_variational_check(state)
            if report.applicable and not report.curvature_term_holds:
                self._violate(
                    "chord_arc_minimum",
                    record,
                    f"<K_q,W_q> - <K_p,W_p> = {report.curvature_term!r}",
                )

        self._previous = record
