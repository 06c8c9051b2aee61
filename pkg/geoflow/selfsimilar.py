"""
Parabolic rescaling and the planar solitons: shrinking circles (homothetic)
and the grim reaper (translating).
"""
import enum
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, model_validator

from geoflow.curve import (
    CurveGeometry,
    DiscreteCurve,
    Fixed,
    Prescribed,
    chord_arc_scan,
    compute_geometry,
)
from geoflow.errors import FlowBlowupError, GeometryError
from geoflow.flow import FlowConfig, FlowStatus, run
from geoflow.surface import PLANE


@dataclass(frozen=True)
class RescaleFactor:
    r: float

    def __post_init__(self):
        if not self.r > 0.0:
            raise ValueError("rescale factor must be positive")


@dataclass(frozen=True)
class RescaleReport:
    factor: RescaleFactor
    kappa: np.ndarray
    s: np.ndarray
    length: float
    theta_min: float
    kappa_error: float


def rescale(curve: DiscreteCurve, geom: CurveGeometry, factor: RescaleFactor) -> RescaleReport:
    """
    Quantities of the curve in the metric R^2 g: lengths scale by R,
    curvature by 1/R, and the chord-arc ratio is unchanged.
    """
    r = factor.r
    kappa = geom.kappa / r
    return RescaleReport(
        factor=factor,
        kappa=kappa,
        s=geom.s * r,
        length=geom.total_length * r,
        # D_R / L_R = (R D) / (R L) is taken from the unscaled ratio.
        theta_min=chord_arc_scan(curve, geom).theta_min,
        kappa_error=float(np.max(np.abs(kappa * r - geom.kappa))),
    )


def type1_factor(t: float, t_star: float) -> RescaleFactor:
    if t >= t_star:
        raise ValueError("type-1 rescaling needs t < t_star")
    return RescaleFactor((2.0 * (t_star - t)) ** -0.5)


def rescaled_time(t: float, t_star: float) -> float:
    """Time of the type-1 rescaled flow, d(tau) = R(t)^2 dt with tau(t_star - 1/2) = 0."""
    if t >= t_star:
        raise ValueError("type-1 rescaling needs t < t_star")
    return -0.5 * np.log(2.0 * (t_star - t))


class SolitonKind(str, enum.Enum):
    GRIM_REAPER = "grim_reaper"
    SHRINKING_CIRCLE = "shrinking_circle"
    GEODESIC = "geodesic"


class SolitonSpec(BaseModel, extra="forbid"):
    kind: SolitonKind
    half_width: float = 1.0
    radius: float = 1.0
    arc: float = np.pi

    @model_validator(mode="after")
    def check_shape(self):
        if self.kind is SolitonKind.GRIM_REAPER and not 0.0 < self.half_width < np.pi / 2:
            raise ValueError("grim reaper half_width must lie in (0, pi/2)")
        if self.kind is SolitonKind.SHRINKING_CIRCLE:
            if self.radius <= 0.0:
                raise ValueError("circle radius must be positive")
            if not 0.0 < self.arc < 2.0 * np.pi:
                raise ValueError("circle arc must lie in (0, 2 pi)")
        return self


def _planar(x, y):
    return np.column_stack([x, y, np.zeros_like(x)])


def _circle_angles(spec: SolitonSpec, n: int):
    # counterclockwise along the lower arc, so the normal points to the centre
    return -np.pi / 2 + np.linspace(-spec.arc / 2, spec.arc / 2, n + 1)


def soliton_boundaries(spec: SolitonSpec) -> Tuple[object, object]:
    """Endpoint trajectories under which the soliton is an exact solution."""
    if spec.kind is SolitonKind.GRIM_REAPER:
        w = spec.half_width

        def at(x):
            return lambda t: np.array([x, t - np.log(np.cos(x)), 0.0])

        return Prescribed(at(-w), "grim reaper left"), Prescribed(at(w), "grim reaper right")
    if spec.kind is SolitonKind.SHRINKING_CIRCLE:
        first, last = _circle_angles(spec, 1)

        def at(angle):
            def trajectory(t):
                radius = np.sqrt(max(spec.radius**2 - 2.0 * t, 0.0))
                return np.array([radius * np.cos(angle), radius * np.sin(angle), 0.0])

            return trajectory

        return Prescribed(at(first), "circle start"), Prescribed(at(last), "circle end")
    return Fixed([-1.0, 0.0, 0.0]), Fixed([1.0, 0.0, 0.0])


def soliton_curve(spec: SolitonSpec, n: int, prescribed: bool = False) -> DiscreteCurve:
    if spec.kind is SolitonKind.GRIM_REAPER:
        x = np.linspace(-spec.half_width, spec.half_width, n + 1)
        points = _planar(x, -np.log(np.cos(x)))
    elif spec.kind is SolitonKind.SHRINKING_CIRCLE:
        angles = _circle_angles(spec, n)
        points = _planar(spec.radius * np.cos(angles), spec.radius * np.sin(angles))
    else:
        points = _planar(np.linspace(-1.0, 1.0, n + 1), np.zeros(n + 1))
    start, end = soliton_boundaries(spec) if prescribed else (None, None)
    return DiscreteCurve(PLANE, points, start, end)


def _require_planar(curve: DiscreteCurve, what: str):
    if not curve.surface.is_planar:
        raise GeometryError(f"{what} residual is planar-only")


def homothetic_residual(curve: DiscreteCurve, geom: CurveGeometry, center) -> float:
    """max |K + <F, N> N| with F the position relative to center."""
    _require_planar(curve, "homothetic")
    offset = curve.points - np.asarray(center, dtype=float)
    return float(np.max(np.abs(geom.kappa + np.sum(offset * geom.N, axis=-1))))


def translator_residual(curve: DiscreteCurve, geom: CurveGeometry, direction) -> float:
    """max |kappa - <e, N>| for the translation direction e."""
    _require_planar(curve, "translator")
    direction = np.asarray(direction, dtype=float)
    if abs(np.linalg.norm(direction) - 1.0) > 1e-9:
        raise ValueError("translation direction must be a unit vector")
    e = np.array([direction[0], direction[1], 0.0])
    return float(np.max(np.abs(geom.kappa - geom.N @ e)))


def grim_reaper_tracking_error(
    cfg: FlowConfig, half_width: float, t_end: float, n: int = 256
) -> float:
    """
    Largest vertical deviation from y = t - log cos x over all observed steps
    of the flow started at the t = 0 grim reaper.
    """
    if not 0.0 < half_width < np.pi / 2 - 0.1:
        raise ValueError("grim reaper tracking needs half_width < pi/2 - 0.1")
    spec = SolitonSpec(kind=SolitonKind.GRIM_REAPER, half_width=half_width)
    curve = soliton_curve(spec, n, prescribed=True)
    worst = {"error": 0.0}

    def track(state):
        x, y = state.curve.points[:, 0], state.curve.points[:, 1]
        exact = state.t - np.log(np.cos(x))
        worst["error"] = max(worst["error"], float(np.max(np.abs(y - exact))))

    tracking = cfg.model_copy(update={"t_max": t_end, "kappa_converged": 0.0, "record_every": 1})
    final, _ = run(curve, tracking, [track])
    if final.status is FlowStatus.BLOWUP:
        raise FlowBlowupError(final.message or "grim reaper flow blew up", final)
    return worst["error"]


def soliton_residuals(spec: SolitonSpec, n: int) -> dict:
    """The residuals soliton-check prints for one resolution."""
    curve = soliton_curve(spec, n)
    geom = compute_geometry(curve)
    residuals = {}
    if spec.kind in (SolitonKind.GRIM_REAPER, SolitonKind.GEODESIC):
        residuals["translator"] = translator_residual(curve, geom, _translation_direction(spec))
    if spec.kind in (SolitonKind.SHRINKING_CIRCLE, SolitonKind.GEODESIC):
        residuals["homothetic"] = homothetic_residual(curve, geom, np.zeros(3))
    return residuals


def _translation_direction(spec: SolitonSpec) -> Tuple[float, float]:
    # a segment on the x-axis translates trivially along itself
    return (0.0, 1.0) if spec.kind is SolitonKind.GRIM_REAPER else (1.0, 0.0)


def refinement_order(coarse: float, fine: float) -> Optional[float]:
    """Observed order log2(coarse / fine) when the resolution doubles."""
    if coarse <= 0.0 or fine <= 0.0:
        return None
    return float(np.log2(coarse / fine))
