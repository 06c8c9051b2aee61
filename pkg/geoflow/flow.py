"""
Explicit time integration of curve shortening flow, dF/dt = kappa N.

Interior nodes move along exp(dt * kappa * N) with dt = cfl * min(ds)^2; fixed
endpoints never move, prescribed endpoints follow their trajectory.
"""
import enum
from dataclasses import dataclass, replace
from typing import Callable, Iterable, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from geoflow.app import logger
from geoflow.curve import (
    CurveGeometry,
    DiscreteCurve,
    Fixed,
    compute_geometry,
    d2_ds2,
    reparametrize,
)
from geoflow.errors import GeometryError, ResidualUndefinedError


class FlowConfig(BaseModel, extra="forbid"):
    cfl: float = 0.25
    t_max: float = Field(10.0, ge=0.0)
    kappa_converged: float = Field(1e-5, ge=0.0)
    kappa_blowup: float = Field(1e4, gt=0.0)
    regrid_every: int = Field(50, ge=0)
    record_every: int = Field(10, ge=1)

    @field_validator("cfl")
    @classmethod
    def cfl_is_stable(cls, value):
        if not 0.0 < value <= 0.5:
            raise ValueError("cfl must lie in (0, 0.5]")
        return value

    @model_validator(mode="after")
    def thresholds_are_ordered(self):
        if self.kappa_converged >= self.kappa_blowup:
            raise ValueError("kappa_converged must be below kappa_blowup")
        return self


class FlowStatus(str, enum.Enum):
    RUNNING = "Running"
    CONVERGED = "Converged"
    BLOWUP = "Blowup"
    TIMEOUT = "Timeout"


@dataclass(frozen=True)
class FlowState:
    curve: DiscreteCurve
    geom: CurveGeometry
    t: float = 0.0
    step: int = 0
    status: FlowStatus = FlowStatus.RUNNING
    message: Optional[str] = None
    regrid_count: int = 0

    @property
    def kappa(self):
        return effective_kappa(self.curve, self.geom)

    @property
    def kappa_sup(self) -> float:
        return float(np.max(np.abs(self.kappa)))


Observer = Callable[[FlowState], object]


def effective_kappa(curve: DiscreteCurve, geom: CurveGeometry):
    """Curvature with the analytic value 0 at fixed endpoints."""
    kappa = geom.kappa.copy()
    if isinstance(curve.start, Fixed):
        kappa[0] = 0.0
    if isinstance(curve.end, Fixed):
        kappa[-1] = 0.0
    return kappa


def initial_state(curve: DiscreteCurve) -> FlowState:
    return FlowState(curve=curve, geom=compute_geometry(curve))


def _boundary_point(curve, boundary, current, t):
    if isinstance(boundary, Fixed):
        return current
    return curve.surface.project(boundary.at(t))


def step(state: FlowState, cfg: FlowConfig, max_dt: Optional[float] = None) -> FlowState:
    if state.status is not FlowStatus.RUNNING:
        raise ValueError(f"cannot step a flow with status {state.status.value}")
    curve, geom = state.curve, state.geom
    surface = curve.surface

    dt = cfg.cfl * float(np.min(geom.spacing)) ** 2
    if max_dt is not None:
        dt = min(dt, max_dt)
    t = state.t + dt

    points = np.empty_like(curve.points)
    points[1:-1] = surface.exp(
        curve.points[1:-1], dt * geom.kappa[1:-1, None] * geom.N[1:-1]
    )
    points[0] = _boundary_point(curve, curve.start, curve.points[0], t)
    points[-1] = _boundary_point(curve, curve.end, curve.points[-1], t)

    try:
        next_curve = curve.with_points(points)
        next_geom = compute_geometry(next_curve)
    except GeometryError as e:
        logger.warning("Flow stopped at t=%g, step %i: %s", t, state.step + 1, e)
        return replace(state, t=t, step=state.step + 1, status=FlowStatus.BLOWUP, message=str(e))

    return replace(state, curve=next_curve, geom=next_geom, t=t, step=state.step + 1)


def regrid(state: FlowState) -> FlowState:
    curve = reparametrize(state.curve, state.geom)
    logger.debug("Regrid at t=%g, step %i", state.t, state.step)
    return replace(
        state,
        curve=curve,
        geom=compute_geometry(curve),
        regrid_count=state.regrid_count + 1,
    )


def classify(state: FlowState, cfg: FlowConfig) -> FlowState:
    if state.status is not FlowStatus.RUNNING:
        return state
    kappa_sup = state.kappa_sup
    if not np.isfinite(kappa_sup) or kappa_sup > cfg.kappa_blowup:
        return replace(
            state,
            status=FlowStatus.BLOWUP,
            message=f"curvature {kappa_sup:.6g} exceeded {cfg.kappa_blowup:g}",
        )
    if kappa_sup < cfg.kappa_converged:
        return replace(state, status=FlowStatus.CONVERGED)
    if state.t >= cfg.t_max * (1.0 - 1e-14):
        return replace(state, status=FlowStatus.TIMEOUT)
    return state


def run(initial, cfg: FlowConfig, observers: Iterable[Observer] = ()):
    """
    Evolve a curve until it converges, blows up or reaches t_max.

    Observers are called with the state at step 0, every ``record_every`` steps
    and at the final step; whatever they return (other than None) is collected
    into the returned record list.
    """
    observers = list(observers)
    state = initial if isinstance(initial, FlowState) else initial_state(initial)
    records: List[object] = []

    def notify(current):
        for observer in observers:
            record = observer(current)
            if record is not None:
                records.append(record)

    logger.info("Starting flow on %s with %i intervals", state.curve.surface, state.curve.n)
    state = classify(state, cfg)
    notify(state)
    while state.status is FlowStatus.RUNNING:
        state = step(state, cfg, max_dt=cfg.t_max - state.t)
        if (
            state.status is FlowStatus.RUNNING
            and cfg.regrid_every
            and state.step % cfg.regrid_every == 0
        ):
            state = regrid(state)
        state = classify(state, cfg)
        if state.step % cfg.record_every == 0 or state.status is not FlowStatus.RUNNING:
            notify(state)

    logger.info(
        "Flow finished with status %s at t=%g after %i steps",
        state.status.value,
        state.t,
        state.step,
    )
    return state, records


def check_residual_window(history: Sequence[FlowState]):
    if len(history) != 3:
        raise ValueError("a residual window needs three consecutive states")
    if len({state.regrid_count for state in history}) != 1 or len(
        {state.curve.n for state in history}
    ) != 1:
        raise ResidualUndefinedError("residual undefined across regrid")
    times = [state.t for state in history]
    if not times[0] < times[1] < times[2]:
        raise ResidualUndefinedError("residual window needs strictly increasing times")


def time_derivative(history: Sequence[FlowState], values: Sequence):
    """Three-point derivative at the middle state for possibly unequal time steps."""
    t0, t1, t2 = (state.t for state in history)
    before, after = t1 - t0, t2 - t1
    return (
        -after / (before * (before + after)) * values[0]
        + (after - before) / (before * after) * values[1]
        + before / (after * (before + after)) * values[2]
    )


def kappa_pde_residual(history: Sequence[FlowState]) -> float:
    """Max interior defect of d(kappa)/dt = kappa_ss + kappa^3 + S kappa at fixed u."""
    check_residual_window(history)
    middle = history[1]
    rate = time_derivative(history, [state.geom.kappa for state in history])
    kappa = middle.kappa
    gauss = middle.curve.surface.gauss_curvature
    rhs = d2_ds2(middle.geom, kappa) + kappa**3 + gauss * kappa
    return float(np.max(np.abs(rate - rhs)[1:-1]))


def speed_decay_residual(history: Sequence[FlowState]) -> float:
    """Max interior defect of dv/dt = -kappa^2 v at fixed u."""
    check_residual_window(history)
    middle = history[1]
    rate = time_derivative(history, [state.geom.v for state in history])
    rhs = -middle.geom.kappa**2 * middle.geom.v
    return float(np.max(np.abs(rate - rhs)[1:-1]))


def length_decay_residual(first, second) -> float:
    """|dL/dt + integral of kappa^2 ds| between two diagnostic records."""
    if second.t == first.t:
        raise ResidualUndefinedError("records share a time")
    if first.regrid_count != second.regrid_count:
        raise ResidualUndefinedError("residual undefined across regrid")
    rate = (second.length - first.length) / (second.t - first.t)
    return abs(rate + 0.5 * (first.kappa_sq_integral + second.kappa_sq_integral))
