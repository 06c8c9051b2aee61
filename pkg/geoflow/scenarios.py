"""
Scenario files: the surface, the initial curve, the barrier geodesics that
bound the region the flow must stay in, and the flow and diagnostics settings.
"""
from pathlib import Path
from typing import Annotated, List, Literal, NamedTuple, Optional, Tuple, Union

import numpy as np
import simplejson
from pydantic import BaseModel, Field, ValidationError

from geoflow.app import logger
from geoflow.curve import DiscreteCurve, self_intersection_count
from geoflow.errors import GeometryError, ScenarioError
from geoflow.flow import FlowConfig
from geoflow.selfsimilar import SolitonKind, SolitonSpec, soliton_curve
from geoflow.surface import Surface, SurfaceKind, get_surface

Vector = Tuple[float, float, float]
BARRIER_TOLERANCE = 1e-9


class SineCurve(BaseModel, extra="forbid"):
    kind: Literal["sine"]
    amplitude: float
    mode: int = Field(1, ge=1)

    def profile(self, u):
        return self.amplitude * np.sin(self.mode * np.pi * u)


class BumpCurve(BaseModel, extra="forbid"):
    kind: Literal["bump"]
    amplitude: float
    centers: List[float] = [0.5]
    width: float = Field(0.1, gt=0.0)

    def profile(self, u):
        bumps = sum(np.exp(-(((u - center) / self.width) ** 2)) for center in self.centers)
        # pin the ends so the curve starts and ends on the geodesic
        ends = (1.0 - u) * bumps[0] + u * bumps[-1]
        return self.amplitude * (bumps - ends)


class PointsCurve(BaseModel, extra="forbid"):
    kind: Literal["points"]
    points: List[Vector]


class GrimReaperCurve(BaseModel, extra="forbid"):
    kind: Literal["grim_reaper"]
    half_width: float = 1.0


class LoopCurve(BaseModel, extra="forbid"):
    kind: Literal["loop"]
    radius: float = Field(0.15, gt=0.0)
    width: float = Field(0.1, gt=0.0)
    center: float = 0.5


CurveSpec = Annotated[
    Union[SineCurve, BumpCurve, PointsCurve, GrimReaperCurve, LoopCurve],
    Field(discriminator="kind"),
]


class BarrierSpec(BaseModel, extra="forbid"):
    point: Vector
    tangent: Vector


class ProbeSpec(BaseModel, extra="forbid"):
    p_star: Vector
    t_star: float


class DiagnosticsSpec(BaseModel, extra="forbid"):
    alpha_eps: Optional[float] = Field(None, gt=0.0)
    alpha_fraction: float = Field(0.1, gt=0.0)
    probe: Optional[ProbeSpec] = None
    snapshot_every: int = Field(10, ge=1)
    t_star_estimate: Optional[float] = None


class Scenario(BaseModel, extra="forbid"):
    name: str
    surface: SurfaceKind
    curve: CurveSpec
    start: Optional[Vector] = None
    end: Optional[Vector] = None
    barriers: Optional[Tuple[BarrierSpec, BarrierSpec]] = None
    n: int = Field(64, ge=8)
    in_hypothesis: bool = True
    flow: FlowConfig = FlowConfig()
    diagnostics: DiagnosticsSpec = DiagnosticsSpec()

    @property
    def model(self) -> Surface:
        return get_surface(self.surface)


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        data = simplejson.loads(path.read_text())
    except OSError as e:
        raise ScenarioError(f"cannot read {path}: {e.strerror}")
    except simplejson.JSONDecodeError as e:
        raise ScenarioError(f"{path} is not valid JSON: {e}")
    try:
        return Scenario.model_validate(data)
    except ValidationError as e:
        error = e.errors()[0]
        field = ".".join(str(part) for part in error["loc"])
        raise ScenarioError(f"{error['msg']} in {path}", field=field)


def _endpoint(scenario: Scenario, name: str) -> np.ndarray:
    value = getattr(scenario, name)
    if value is None:
        raise ScenarioError("endpoint is required for this curve kind", field=name)
    surface = scenario.model
    point = np.array(value, dtype=float)
    if not surface.contains(point, BARRIER_TOLERANCE):
        raise ScenarioError(f"point is not on the {surface}", field=name)
    return surface.project(point)


def _perturbed_geodesic(surface: Surface, start, end, profile, n: int):
    u = np.linspace(0.0, 1.0, n + 1)
    base = surface.geodesic_points(start, end, u)
    # log towards the end minus log towards the start is D times the unit tangent
    forward = surface.log(base, end) - surface.log(base, start)
    tangent = forward / surface.norm(forward)[:, None]
    normal = surface.rotate(base, tangent)
    normal = normal / surface.norm(normal)[:, None]
    points = surface.exp(base, profile(u)[:, None] * normal)
    points[0], points[-1] = start, end
    return points


def _loop(spec: LoopCurve, start, end, n: int):
    u = np.linspace(0.0, 1.0, n + 1)
    g = 0.5 * (1.0 - np.cos(np.pi * np.clip((u - spec.center) / spec.width + 0.5, 0.0, 1.0)))
    along = u + spec.radius * np.sin(2.0 * np.pi * g)
    across = spec.radius * (1.0 - np.cos(2.0 * np.pi * g))
    chord = end - start
    normal = np.array([-chord[1], chord[0], 0.0])
    return start + along[:, None] * chord + across[:, None] * normal


def build_curve(scenario: Scenario) -> DiscreteCurve:
    spec = scenario.curve
    surface = scenario.model
    if isinstance(spec, GrimReaperCurve):
        if not surface.is_planar:
            raise ScenarioError("grim reaper curves are planar-only", field="curve.kind")
        try:
            soliton = SolitonSpec(kind=SolitonKind.GRIM_REAPER, half_width=spec.half_width)
        except ValidationError as e:
            raise ScenarioError(e.errors()[0]["msg"], field="curve.half_width")
        return soliton_curve(soliton, scenario.n, prescribed=True)

    if isinstance(spec, PointsCurve):
        points = np.array(spec.points, dtype=float)
        if not np.all(surface.contains(points, BARRIER_TOLERANCE)):
            raise ScenarioError(f"points are not on the {surface}", field="curve.points")
        points = surface.project(points)
    else:
        start, end = _endpoint(scenario, "start"), _endpoint(scenario, "end")
        if surface.geodesic_distance(start, end) <= 0.0:
            raise ScenarioError("endpoints coincide", field="end")
        if isinstance(spec, LoopCurve):
            if not surface.is_planar:
                raise ScenarioError("loop curves are planar-only", field="curve.kind")
            points = _loop(spec, start, end, scenario.n)
        else:
            try:
                points = _perturbed_geodesic(surface, start, end, spec.profile, scenario.n)
            except GeometryError as e:
                raise ScenarioError(str(e), field="end")
    try:
        return DiscreteCurve(surface, points)
    except GeometryError as e:
        raise ScenarioError(str(e), field="curve")


class Region:
    """
    The closed region between two barrier geodesics, each oriented so that the
    other endpoint of the curve lies on its positive side.
    """

    def __init__(self, surface: Surface, barriers, start, end, midpoint):
        self.surface = surface
        self.barriers = []
        for index, (barrier, other) in enumerate(zip(barriers, (end, start))):
            field = f"barriers.{index}"
            point = np.array(barrier.point, dtype=float)
            if not surface.contains(point, BARRIER_TOLERANCE):
                raise ScenarioError(f"barrier point is not on the {surface}", field=field)
            point = surface.project(point)
            tangent = surface.project_tangent(point, barrier.tangent)
            if surface.norm(tangent) < 1e-12:
                raise ScenarioError("barrier tangent vanishes", field=field)
            sign = np.sign(surface.normal_side(point, tangent, other))
            if sign == 0.0:
                sign = np.sign(surface.normal_side(point, tangent, midpoint))
            if sign == 0.0:
                raise ScenarioError("curve lies on the barrier", field=field)
            self.barriers.append((point, sign * tangent))

    def sides(self, points) -> np.ndarray:
        """Signed side values, one column per barrier, positive inside."""
        points = np.asarray(points, dtype=float)
        return np.stack(
            [self.surface.normal_side(point, tangent, points) for point, tangent in self.barriers],
            axis=-1,
        )

    def __call__(self, points, tolerance=BARRIER_TOLERANCE):
        return np.all(self.sides(points) >= -tolerance, axis=-1)


def region_for(scenario: Scenario, curve: DiscreteCurve) -> Optional[Region]:
    if scenario.barriers is None:
        return None
    return Region(
        curve.surface,
        scenario.barriers,
        curve.points[0],
        curve.points[-1],
        curve.points[curve.n // 2],
    )


class ValidationCheck(NamedTuple):
    name: str
    passed: bool
    detail: str


class ValidationReport(NamedTuple):
    checks: List[ValidationCheck]

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failures(self) -> List[ValidationCheck]:
        return [check for check in self.checks if not check.passed]


def _barrier_checks(curve: DiscreteCurve, region: Optional[Region]):
    if region is None:
        yield ValidationCheck("endpoints_on_barriers", True, "no barriers configured")
        yield ValidationCheck("inside_region", True, "no barriers configured")
        return
    sides = region.sides(curve.points)
    offsets = (abs(sides[0, 0]), abs(sides[-1, 1]))
    yield ValidationCheck(
        "endpoints_on_barriers",
        max(offsets) <= BARRIER_TOLERANCE,
        "start off its barrier by %.3g, end off its barrier by %.3g" % offsets,
    )
    interior = sides[1:-1]
    outside = int(np.count_nonzero(np.any(interior <= 0.0, axis=-1)))
    yield ValidationCheck(
        "inside_region",
        outside == 0,
        f"{outside} interior nodes not strictly inside the region",
    )


def _hemisphere_check(curve: DiscreteCurve, region: Optional[Region]):
    points = curve.points
    centre = points.mean(axis=0)
    if np.linalg.norm(centre) < 1e-12:
        return ValidationCheck("convex_region", False, "curve has no hemisphere centre")
    centre = centre / np.linalg.norm(centre)
    lowest = float(np.min(points @ centre))
    separation = float(curve.surface.geodesic_distance(points[0], points[-1]))
    passed = lowest > 0.0 and separation < np.pi - 1e-9
    detail = f"lowest height over the centre {lowest:.3g}, endpoint separation {separation:.6g}"
    if region is None:
        return ValidationCheck("convex_region", passed, detail)

    # Each barrier bounds the region along a half great circle of length pi
    # unless the two barriers lie on one great circle.
    normals = [curve.surface.rotate(point, tangent) for point, tangent in region.barriers]
    normals = [normal / np.linalg.norm(normal) for normal in normals]
    opening = float(np.pi - np.arccos(np.clip(normals[0] @ normals[1], -1.0, 1.0)))
    arc = np.pi if 1e-9 < opening < np.pi - 1e-9 else 2.0 * np.pi
    return ValidationCheck(
        "convex_region",
        passed and arc <= np.pi,
        detail + f", barrier opening {opening:.6g}, barrier arcs {arc:.6g}",
    )


def validate_scenario(scenario: Scenario) -> ValidationReport:
    """
    Check the geometric setup the convergence theorem assumes: endpoints on the
    barriers, interior inside the region, an embedded curve and, on the
    sphere, a convex region inside an open hemisphere.
    """
    curve = build_curve(scenario)
    region = region_for(scenario, curve)
    checks = list(_barrier_checks(curve, region))

    try:
        crossings = self_intersection_count(curve)
    except GeometryError as e:
        checks.append(ValidationCheck("embedded", False, str(e)))
    else:
        checks.append(
            ValidationCheck("embedded", crossings == 0, f"{crossings} self-intersections")
        )

    if curve.surface.kind is SurfaceKind.SPHERE:
        checks.append(_hemisphere_check(curve, region))

    report = ValidationReport(checks)
    for check in report.failures:
        logger.warning("Scenario %s fails %s: %s", scenario.name, check.name, check.detail)
    return report
