"""
The three constant-curvature model surfaces, realized in ambient coordinates.

* Sphere: the unit sphere in Euclidean 3-space.
* Plane: the x0-x1 plane, third coordinate zero.
* Hyperbolic: the upper sheet of -x0^2 + x1^2 + x2^2 = -1, with the
  Minkowski form diag(-1, +1, +1).

Every method accepts single points of shape (3,) or stacks of shape (..., 3)
and broadcasts over the leading axes.
"""
import enum
from dataclasses import dataclass

import numpy as np

from geoflow.errors import GeometryError

POINT_TOLERANCE = 1e-12
DOMAIN_TOLERANCE = 1e-9
MINKOWSKI = np.array([-1.0, 1.0, 1.0])
E_Z = np.array([0.0, 0.0, 1.0])


class SurfaceKind(str, enum.Enum):
    SPHERE = "sphere"
    PLANE = "plane"
    HYPERBOLIC = "hyperbolic"


GAUSS_CURVATURE = {
    SurfaceKind.SPHERE: 1,
    SurfaceKind.PLANE: 0,
    SurfaceKind.HYPERBOLIC: -1,
}


@dataclass(frozen=True)
class TangentVector:
    base: np.ndarray
    vec: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "base", np.asarray(self.base, dtype=float))
        object.__setattr__(self, "vec", np.asarray(self.vec, dtype=float))


def _safe_scale(vec, numerator, denominator):
    """Return vec * numerator / denominator, zero wherever denominator vanishes."""
    numerator = np.asarray(numerator, dtype=float)
    denominator = np.asarray(denominator, dtype=float)
    factor = np.divide(
        numerator, denominator, out=np.zeros(np.broadcast(numerator, denominator).shape),
        where=denominator > 0,
    )
    return vec * factor[..., None]


@dataclass(frozen=True)
class Surface:
    kind: SurfaceKind

    def __post_init__(self):
        object.__setattr__(self, "kind", SurfaceKind(self.kind))

    def __str__(self):
        return self.kind.value

    @property
    def gauss_curvature(self) -> int:
        return GAUSS_CURVATURE[self.kind]

    @property
    def is_planar(self) -> bool:
        return self.kind is SurfaceKind.PLANE

    # ambient bilinear form

    def dot(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind is SurfaceKind.HYPERBOLIC:
            return np.sum(x * y * MINKOWSKI, axis=-1)
        return np.sum(x * y, axis=-1)

    def norm(self, x):
        return np.sqrt(np.maximum(self.dot(x, x), 0.0))

    def metric_inner(self, a: TangentVector, b: TangentVector):
        if a.base.shape != b.base.shape or not np.allclose(
            a.base, b.base, rtol=POINT_TOLERANCE, atol=POINT_TOLERANCE
        ):
            raise GeometryError("tangent vectors at different points")
        return self.dot(a.vec, b.vec)

    # points

    def constraint_residual(self, points):
        points = np.asarray(points, dtype=float)
        if self.kind is SurfaceKind.SPHERE:
            return np.abs(np.sum(points * points, axis=-1) - 1.0)
        if self.kind is SurfaceKind.HYPERBOLIC:
            scale = np.maximum(1.0, points[..., 0] ** 2)
            return np.abs(self.dot(points, points) + 1.0) / scale
        return np.abs(points[..., 2])

    def contains(self, points, tolerance=POINT_TOLERANCE):
        points = np.asarray(points, dtype=float)
        inside = self.constraint_residual(points) <= tolerance
        if self.kind is SurfaceKind.HYPERBOLIC:
            inside &= points[..., 0] >= 1.0 - tolerance
        return inside

    def check_points(self, points, tolerance=POINT_TOLERANCE, what="point"):
        points = np.asarray(points, dtype=float)
        if points.shape[-1] != 3:
            raise GeometryError(f"{what} must have 3 ambient coordinates")
        if not np.all(np.isfinite(points)):
            raise GeometryError(f"{what} has non-finite coordinates")
        if not np.all(self.contains(points, tolerance)):
            raise GeometryError(f"{what} is not on the {self.kind.value}")
        return points

    def project(self, raw):
        """Nearest point on the model constraint."""
        raw = np.array(raw, dtype=float)
        if self.kind is SurfaceKind.PLANE:
            raw[..., 2] = 0.0
            return raw
        if self.kind is SurfaceKind.SPHERE:
            length = np.linalg.norm(raw, axis=-1)
            if np.any(length < 1e-6):
                raise GeometryError("projection ill-defined")
            return raw / length[..., None]
        square = self.dot(raw, raw)
        if np.any(square >= 0.0) or np.any(raw[..., 0] <= 0.0):
            raise GeometryError("projection ill-defined")
        point = raw / np.sqrt(-square)[..., None]
        point[..., 0] = np.sqrt(1.0 + point[..., 1] ** 2 + point[..., 2] ** 2)
        return point

    def projection_scale(self, raw):
        """Factor by which project() divides raw; d(project)/dx = project_tangent / scale."""
        raw = np.asarray(raw, dtype=float)
        if self.kind is SurfaceKind.SPHERE:
            return np.linalg.norm(raw, axis=-1)
        if self.kind is SurfaceKind.HYPERBOLIC:
            return np.sqrt(np.maximum(-self.dot(raw, raw), 0.0))
        return np.ones(raw.shape[:-1])

    def project_tangent(self, base, vec):
        base = np.asarray(base, dtype=float)
        vec = np.array(vec, dtype=float)
        if self.kind is SurfaceKind.PLANE:
            vec[..., 2] = 0.0
            return vec
        if self.kind is SurfaceKind.SPHERE:
            return vec - np.sum(vec * base, axis=-1)[..., None] * base
        return vec + self.dot(vec, base)[..., None] * base

    def rotate(self, base, vec):
        """Rotate a tangent vector by +90 degrees in the oriented tangent plane."""
        base = np.asarray(base, dtype=float)
        vec = np.asarray(vec, dtype=float)
        if self.kind is SurfaceKind.PLANE:
            return np.cross(np.broadcast_to(E_Z, vec.shape), vec)
        rotated = np.cross(base, vec)
        if self.kind is SurfaceKind.HYPERBOLIC:
            rotated = rotated * MINKOWSKI
        return rotated

    # geodesics

    def geodesic_distance(self, p, q):
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        if self.kind is SurfaceKind.PLANE:
            return np.linalg.norm(q - p, axis=-1)
        if self.kind is SurfaceKind.SPHERE:
            cosine = np.sum(p * q, axis=-1)
            if np.any(np.abs(cosine) > 1.0 + DOMAIN_TOLERANCE):
                raise GeometryError("invalid point pair")
            sine = np.linalg.norm(np.cross(p, q), axis=-1)
            return np.arctan2(sine, cosine)
        cosh = -self.dot(p, q)
        if np.any(cosh < 1.0 - DOMAIN_TOLERANCE):
            raise GeometryError("invalid point pair")
        # |p - q|_M = 2 sinh(D / 2) stays accurate for nearby points.
        chord = self.norm(p - q)
        return 2.0 * np.arcsinh(chord / 2.0)

    def exp(self, base, vec):
        base = np.asarray(base, dtype=float)
        vec = np.asarray(vec, dtype=float)
        if self.kind is SurfaceKind.PLANE:
            return self.project(base + vec)
        length = self.norm(vec)
        direction = _safe_scale(vec, 1.0, length)
        if self.kind is SurfaceKind.SPHERE:
            raw = np.cos(length)[..., None] * base + np.sin(length)[..., None] * direction
        else:
            raw = np.cosh(length)[..., None] * base + np.sinh(length)[..., None] * direction
        return self.project(raw)

    def exp_map(self, v: TangentVector):
        return self.exp(v.base, v.vec)

    def log(self, p, q):
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        if self.kind is SurfaceKind.PLANE:
            return self.project_tangent(p, q - p)
        if self.kind is SurfaceKind.SPHERE:
            cosine = np.sum(p * q, axis=-1)
            if np.any(np.abs(cosine) > 1.0 + DOMAIN_TOLERANCE):
                raise GeometryError("invalid point pair")
            w = q - cosine[..., None] * p
            sine = np.linalg.norm(w, axis=-1)
            if np.any((sine < POINT_TOLERANCE) & (cosine < 0.0)):
                raise GeometryError("conjugate pair, log undefined")
            distance = np.arctan2(sine, cosine)
        else:
            cosh = -self.dot(p, q)
            if np.any(cosh < 1.0 - DOMAIN_TOLERANCE):
                raise GeometryError("invalid point pair")
            w = q - cosh[..., None] * p
            sine = self.norm(w)
            distance = np.arcsinh(sine)
        return _safe_scale(w, distance, sine)

    def log_map(self, p, q) -> TangentVector:
        return TangentVector(p, self.log(p, q))

    def geodesic_points(self, p, q, fractions):
        """Points at the given fractions of the way along the geodesic from p to q."""
        fractions = np.asarray(fractions, dtype=float)
        step = self.log(p, q)
        return self.exp(
            np.broadcast_to(p, fractions.shape + (3,)), fractions[..., None] * step
        )

    def scale_profile(self, phi):
        """The polar-coordinate profile (S(phi), S'(phi)): sin, identity or sinh."""
        phi = np.asarray(phi, dtype=float)
        if self.kind is SurfaceKind.SPHERE:
            return np.sin(phi), np.cos(phi)
        if self.kind is SurfaceKind.HYPERBOLIC:
            return np.sinh(phi), np.cosh(phi)
        return phi * 1.0, np.ones_like(phi)

    def normal_side(self, point, tangent, x):
        """
        Signed side of x relative to the geodesic through point with direction
        tangent. Positive on the side the rotated tangent points to; the magnitude
        is not a distance.
        """
        point = np.asarray(point, dtype=float)
        normal = self.rotate(point, self.project_tangent(point, tangent))
        normal = _safe_scale(normal, 1.0, self.norm(normal))
        return self.dot(np.asarray(x, dtype=float) - point, normal)


SPHERE = Surface(SurfaceKind.SPHERE)
PLANE = Surface(SurfaceKind.PLANE)
HYPERBOLIC = Surface(SurfaceKind.HYPERBOLIC)


def get_surface(kind) -> Surface:
    return Surface(SurfaceKind(kind))
