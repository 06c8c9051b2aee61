"""
Discrete open curves on a model surface and their derived geometry.
"""
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Tuple, Union

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.interpolate import CubicSpline, PchipInterpolator

from geoflow.errors import DegenerateCurveError, GeometryError
from geoflow.surface import Surface, SurfaceKind

MIN_INTERVALS = 8
DEGENERATE_SPEED = 1e-12
ENDPOINT_TOLERANCE = 1e-9
UNIFORM_SPACING = 1e-12
SPACING_TOLERANCE = 1e-12
MAX_SWEEPS = 8


@dataclass(frozen=True)
class Fixed:
    point: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "point", np.array(self.point, dtype=float))

    def at(self, t):
        return self.point


@dataclass(frozen=True)
class Prescribed:
    trajectory: Callable[[float], np.ndarray]
    name: str = field(default="prescribed")

    def at(self, t):
        return np.asarray(self.trajectory(t), dtype=float)


Boundary = Union[Fixed, Prescribed]


class DiscreteCurve:
    def __init__(
        self,
        surface: Surface,
        points,
        start: Optional[Boundary] = None,
        end: Optional[Boundary] = None,
        interval: Tuple[float, float] = (0.0, 1.0),
    ):
        points = np.array(points, dtype=float)
        if points.ndim != 2 or len(points) < MIN_INTERVALS + 1:
            raise GeometryError(f"a curve needs at least {MIN_INTERVALS} intervals")
        surface.check_points(points, what="curve node")
        for index, boundary in ((0, start), (-1, end)):
            if isinstance(boundary, Fixed):
                if surface.geodesic_distance(points[index], boundary.point) > ENDPOINT_TOLERANCE:
                    raise GeometryError("curve endpoint does not match its fixed point")
                points[index] = boundary.point
        gaps = surface.geodesic_distance(points[:-1], points[1:])
        if np.any(gaps <= 0.0):
            raise DegenerateCurveError("consecutive nodes coincide")

        self.surface = surface
        self.points = points
        self.start = start if start is not None else Fixed(points[0])
        self.end = end if end is not None else Fixed(points[-1])
        self.interval = (float(interval[0]), float(interval[1]))
        self.params = np.linspace(self.interval[0], self.interval[1], len(points))

    def __repr__(self):
        return "<DiscreteCurve %s n=%i>" % (self.surface, self.n)

    @property
    def n(self) -> int:
        return len(self.points) - 1

    @property
    def du(self) -> float:
        return self.params[1] - self.params[0]

    @property
    def has_fixed_ends(self) -> bool:
        return isinstance(self.start, Fixed) and isinstance(self.end, Fixed)

    def with_points(self, points) -> "DiscreteCurve":
        return DiscreteCurve(self.surface, points, self.start, self.end, self.interval)

    @classmethod
    def from_function(cls, surface: Surface, function, n: int, **kwargs) -> "DiscreteCurve":
        """Sample function(u) on n + 1 uniform parameters u in [0, 1]."""
        u = np.linspace(0.0, 1.0, n + 1)
        return cls(surface, surface.project(function(u)), **kwargs)


@dataclass
class CurveGeometry:
    v: np.ndarray
    T: np.ndarray
    N: np.ndarray
    kappa: np.ndarray
    s: np.ndarray
    total_length: float
    du: float

    @property
    def spacing(self):
        return np.diff(self.s)


def _second_difference(points, du):
    second = np.empty_like(points)
    second[1:-1] = points[2:] - 2.0 * points[1:-1] + points[:-2]
    second[0] = 2.0 * points[0] - 5.0 * points[1] + 4.0 * points[2] - points[3]
    second[-1] = 2.0 * points[-1] - 5.0 * points[-2] + 4.0 * points[-3] - points[-4]
    return second / du**2


def compute_geometry(curve: DiscreteCurve) -> CurveGeometry:
    surface = curve.surface
    points = curve.points
    du = curve.du

    velocity = surface.project_tangent(points, np.gradient(points, du, axis=0, edge_order=2))
    v = surface.norm(velocity)
    if not np.all(np.isfinite(v)) or np.any(v < DEGENERATE_SPEED):
        raise DegenerateCurveError("degenerate parametrization")
    tangent = velocity / v[:, None]
    normal = surface.rotate(points, tangent)
    normal = normal / surface.norm(normal)[:, None]
    # N is tangent to the surface, so the ambient second derivative can be
    # paired with it directly: its normal component drops out.
    kappa = surface.dot(_second_difference(points, du), normal) / v**2

    s = np.concatenate([[0.0], np.cumsum(surface.geodesic_distance(points[:-1], points[1:]))])
    return CurveGeometry(
        v=v, T=tangent, N=normal, kappa=kappa, s=s, total_length=float(s[-1]), du=du
    )


def d2_ds2(geom: CurveGeometry, values):
    """Second arclength derivative, central stencils at interior nodes."""
    first = np.gradient(values, geom.du, edge_order=2)
    speed = np.gradient(geom.v, geom.du, edge_order=2)
    second = _second_difference(values, geom.du)
    return (second - speed / geom.v * first) / geom.v**2


def intrinsic_length(geom: CurveGeometry, i: int, j: int) -> float:
    if i > j:
        raise ValueError("intrinsic length needs i <= j")
    return float(geom.s[j] - geom.s[i])


def total_turning(geom: CurveGeometry, kappa=None) -> float:
    kappa = geom.kappa if kappa is None else kappa
    return float(trapezoid(np.abs(kappa), geom.s))


def kappa_sq_integral(kappa, s) -> float:
    """Exact integral of the square of the piecewise-linear interpolant of kappa."""
    a, b = kappa[:-1], kappa[1:]
    return float(np.sum(np.diff(s) * (a * a + a * b + b * b) / 3.0))


def dkappa_sq_integral(kappa, s) -> float:
    """Exact integral of (d kappa / ds)^2 for the piecewise-linear interpolant."""
    return float(np.sum(np.diff(kappa) ** 2 / np.diff(s)))


def kappa_quartic_integral(kappa, s) -> float:
    """Exact integral of the fourth power of the piecewise-linear interpolant of kappa."""
    a, b = kappa[:-1], kappa[1:]
    terms = a**4 + a**3 * b + a**2 * b**2 + a * b**3 + b**4
    return float(np.sum(np.diff(s) * terms / 5.0))


def alpha_epsilon(geom: CurveGeometry, eps: float, kappa=None) -> float:
    """Largest |integral of kappa ds| over subintervals of arclength at most eps."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    kappa = geom.kappa if kappa is None else kappa
    s = geom.s
    turning = cumulative_trapezoid(kappa, s, initial=0.0)

    span = s[None, :] - s[:, None]
    admissible = (span >= 0.0) & (span <= eps)
    best = np.max(np.abs(turning[None, :] - turning[:, None])[admissible])

    ahead = s + eps
    inside = ahead <= s[-1]
    if np.any(inside):
        shifted = np.interp(ahead[inside], s, turning)
        best = max(best, np.max(np.abs(shifted - turning[inside])))
    behind = s - eps
    inside = behind >= 0.0
    if np.any(inside):
        shifted = np.interp(behind[inside], s, turning)
        best = max(best, np.max(np.abs(turning[inside] - shifted)))
    return float(best)


class ChordArcMinimum(NamedTuple):
    theta_min: float
    argmin: Tuple[int, int]
    interior: bool


def chord_arc_ratios(curve: DiscreteCurve, geom: CurveGeometry) -> np.ndarray:
    """D/L over all node pairs, with 1 on and below the diagonal."""
    points = curve.points
    distance = curve.surface.geodesic_distance(points[:, None, :], points[None, :, :])
    arc = geom.s[None, :] - geom.s[:, None]
    ratios = np.ones_like(distance)
    upper = np.triu(np.ones_like(distance, dtype=bool), k=1)
    ratios[upper] = distance[upper] / arc[upper]
    return ratios


def chord_arc_scan(curve: DiscreteCurve, geom: CurveGeometry) -> ChordArcMinimum:
    ratios = chord_arc_ratios(curve, geom)
    flat = int(np.argmin(ratios))
    i, j = np.unravel_index(flat, ratios.shape)
    theta = float(ratios[i, j])
    n = curve.n

    interior = False
    if 0 < i and j < n:
        neighbours = ratios[i - 1 : i + 2, j - 1 : j + 2].copy()
        neighbours[1, 1] = np.inf
        interior = bool(np.all(neighbours > theta))
    return ChordArcMinimum(theta, (int(i), int(j)), interior)


def _geodesic_chart(curve: DiscreteCurve) -> np.ndarray:
    """Planar coordinates in which geodesics of the surface are straight lines."""
    points = curve.points
    kind = curve.surface.kind
    if kind is SurfaceKind.PLANE:
        return points[:, :2]
    if kind is SurfaceKind.HYPERBOLIC:
        return points[:, 1:] / points[:, :1]
    centre = points.mean(axis=0)
    centre = centre / np.linalg.norm(centre)
    height = points @ centre
    if np.any(height <= 1e-9):
        raise GeometryError("curve is not contained in an open hemisphere")
    helper = np.eye(3)[np.argmin(np.abs(centre))]
    first = np.cross(centre, helper)
    first /= np.linalg.norm(first)
    second = np.cross(centre, first)
    return np.column_stack([points @ first, points @ second]) / height[:, None]


def _orientation(origin, head, other):
    a = head - origin
    b = other - origin
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def self_intersection_count(curve: DiscreteCurve) -> int:
    chart = _geodesic_chart(curve)
    segments = curve.n
    first, second = np.triu_indices(segments, k=2)
    a0, a1 = chart[first], chart[first + 1]
    b0, b1 = chart[second], chart[second + 1]
    crossing = (_orientation(a0, a1, b0) * _orientation(a0, a1, b1) < 0.0) & (
        _orientation(b0, b1, a0) * _orientation(b0, b1, a1) < 0.0
    )

    scale = 1.0 + np.max(np.abs(chart))
    i, j = np.triu_indices(len(chart), k=2)
    coincident = np.linalg.norm(chart[i] - chart[j], axis=-1) <= 1e-12 * scale
    return int(np.count_nonzero(crossing) + np.count_nonzero(coincident))


def reparametrize(curve: DiscreteCurve, geom: CurveGeometry) -> DiscreteCurve:
    """Redistribute the interior nodes to equal arclength.

    Positions come from a C2 cubic spline of the ambient coordinates against s, so
    curvature is continuous across the old nodes. The spline parameter of each new
    node is found by monotone inversion of the measured chord arclength, repeated
    until the geodesic spacing is uniform.
    """
    s = geom.s
    n = curve.n
    length = geom.total_length
    if np.max(np.abs(np.diff(s) - length / n)) <= UNIFORM_SPACING * length:
        return curve.with_points(curve.points.copy())

    surface = curve.surface
    spline = CubicSpline(s, curve.points, axis=0)
    sigma = np.linspace(s[0], s[-1], n + 1)
    for _ in range(MAX_SWEEPS):
        points = surface.project(spline(sigma))
        points[0] = curve.points[0]
        points[-1] = curve.points[-1]
        chords = surface.geodesic_distance(points[:-1], points[1:])
        arc = np.concatenate([[0.0], np.cumsum(chords)])
        if np.max(np.abs(chords - arc[-1] / n)) <= SPACING_TOLERANCE * arc[-1]:
            break
        sigma = PchipInterpolator(arc, sigma)(np.linspace(0.0, arc[-1], n + 1))
        sigma[0] = s[0]
        sigma[-1] = s[-1]
    return curve.with_points(points)


def _densify(points, factor):
    offsets = np.linspace(0.0, 1.0, factor, endpoint=False)
    steps = np.diff(points, axis=0)
    dense = points[:-1, None, :] + offsets[None, :, None] * steps[:, None, :]
    return np.vstack([dense.reshape(-1, 3), points[-1:]])


def _distance_to_polyline(points, polyline):
    heads = polyline[:-1]
    steps = np.diff(polyline, axis=0)
    relative = points[:, None, :] - heads[None, :, :]
    lengths = np.maximum(np.sum(steps * steps, axis=-1), np.finfo(float).tiny)
    fraction = np.clip(np.sum(relative * steps[None], axis=-1) / lengths, 0.0, 1.0)
    closest = heads[None] + fraction[..., None] * steps[None]
    return np.min(np.linalg.norm(points[:, None, :] - closest, axis=-1), axis=1)


def hausdorff_distance(first, second, densify=4) -> float:
    """Hausdorff distance between two polylines, measured with ambient chords."""
    first = np.asarray(first, dtype=float)
    second = np.asarray(second, dtype=float)
    forward = _distance_to_polyline(_densify(first, densify), second)
    backward = _distance_to_polyline(_densify(second, densify), first)
    return float(max(forward.max(), backward.max()))
