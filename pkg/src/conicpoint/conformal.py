"""Conformal point of a line and measurements made through it.

For a horizon (or any line AB) the conformal point lies on the perpendicular
from the principal point, at distance sqrt(f^2 + d^2) from the line, where d
is the distance from the principal point to the line.  Angles subtended there
by points of the line equal the angles between the corresponding rays.

Square pixels are assumed throughout.  Image coordinates are raster: x to the
right, y down.  Of the two mirror-image conformal points, branch ``"below"``
is the one on the larger-y side of the line (the ground side for an upright
camera) and ``"above"`` is its reflection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .calibration import (
    AngleMeasurement,
    CalibratingConic,
    CalibrationMatrix,
    k_from_calibrating_conic,
    require_square_pixels,
)
from .errors import DegenerateInputError, GeometryError, NotSquarePixelsError
from .projective import (
    EPS,
    Conic,
    HomLine,
    HomPoint,
    conic_line_intersections,
    foot_of_perpendicular,
    join,
    parallel_through,
    perpendicular_through,
)

BRANCHES = ("below", "above")


def below_normal(line: HomLine) -> np.ndarray:
    """Unit normal of a line pointing to its larger-y side (larger-x for vertical lines)."""
    n = line.normal
    if abs(n[1]) > 1e-12:
        return n if n[1] > 0 else -n
    return n if n[0] > 0 else -n


def _branch_sign(branch: str) -> float:
    if branch not in BRANCHES:
        raise ValueError(f"branch must be one of {BRANCHES}, got {branch!r}")
    return 1.0 if branch == "below" else -1.0


@dataclass(frozen=True)
class ConformalPoint:
    point: HomPoint
    horizon: HomLine
    branch: str = "below"

    @property
    def xy(self) -> np.ndarray:
        return self.point.xy

    def mirror(self) -> ConformalPoint:
        p = self.xy
        q = p - 2.0 * self.horizon.signed_distance(self.point) * self.horizon.normal
        other = "above" if self.branch == "below" else "below"
        return ConformalPoint(HomPoint.from_xy(*q), self.horizon, other)

    @property
    def orientation(self) -> float:
        """+1 for the below branch, -1 for its mirror; flips signed angles measured here."""
        return _branch_sign(self.branch)


@dataclass(frozen=True)
class PlaneAngleQuery:
    vp_a: HomPoint
    vp_b: HomPoint


def _square_k(k: CalibrationMatrix) -> float:
    require_square_pixels(k)
    return k.focal


def _point_along(origin: np.ndarray, normal: np.ndarray, t: float) -> HomPoint:
    return HomPoint.from_xy(*(origin + t * normal))


def conformal_point_from_k(horizon: HomLine, k: CalibrationMatrix, branch: str = "below") -> ConformalPoint:
    f = _square_k(k)
    sign = _branch_sign(branch)
    p = k.principal_point
    o = foot_of_perpendicular(p, horizon).xy
    d = float(np.linalg.norm(p.xy - o))
    s = math.hypot(f, d)
    n = below_normal(horizon)
    both = [o + s * n, o - s * n]
    if d > 1e-9 * f:
        inside = [np.linalg.norm(c - p.xy) < f for c in both]
        assert inside.count(True) == 1, "exactly one conformal point lies inside the calibrating conic"
    return ConformalPoint(_point_along(o, n, sign * s), horizon, branch)


def conformal_point_from_conic(horizon: HomLine, c: CalibratingConic, branch: str = "below") -> ConformalPoint:
    """Ruler-and-compass route: E = conic hit on the parallel to the horizon through P,
    then the circle about O through E meets the perpendicular PO at the conformal point."""
    if not c.is_circle():
        raise NotSquarePixelsError("conformal point construction needs a circular calibrating conic")
    sign = _branch_sign(branch)
    p = c.centre
    hits = conic_line_intersections(c.conic, parallel_through(p, horizon))
    if not hits:
        raise GeometryError("parallel through the centre misses the calibrating conic")
    e = hits[0].xy
    o = foot_of_perpendicular(p, horizon)
    r = float(np.linalg.norm(e - o.xy))
    around_o = Conic.circle(*o.xy, r)
    n = below_normal(horizon)
    for q in conic_line_intersections(around_o, perpendicular_through(o, horizon)):
        if sign * float((q.xy - o.xy) @ n) > 0:
            return ConformalPoint(HomPoint.from_xy(*q.xy), horizon, branch)
    raise GeometryError("construction failed to produce a conformal point")


def _direction_from(c: np.ndarray, v: HomPoint) -> np.ndarray:
    if v.is_finite():
        return v.xy - c
    return v.vec[:2].copy()


def angle_at(c: np.ndarray, a: HomPoint, b: HomPoint) -> float:
    """Unsigned angle in [0, pi] subtended at c by a and b."""
    u, v = _direction_from(c, a), _direction_from(c, b)
    return math.atan2(abs(u[0] * v[1] - u[1] * v[0]), float(u @ v))


def _check_on_line(v: HomPoint, line: HomLine, c: np.ndarray, tol: float) -> None:
    if v.is_finite():
        off = abs(line.signed_distance(v)) / max(np.linalg.norm(v.xy - c), 1e-300)
    else:
        u = v.vec[:2] / np.linalg.norm(v.vec[:2])
        off = abs(float(u @ line.normal))
    if off > tol:
        raise GeometryError(f"vanishing point {v!r} is not on the horizon (offset {off:.3g})")


def plane_angle(q: PlaneAngleQuery, cp: ConformalPoint, tol: float = 1e-7) -> AngleMeasurement:
    """World-plane angle between lines vanishing at q.vp_a and q.vp_b."""
    c = cp.xy
    _check_on_line(q.vp_a, cp.horizon, c, tol)
    _check_on_line(q.vp_b, cp.horizon, c, tol)
    th = angle_at(c, q.vp_a, q.vp_b)
    return AngleMeasurement(th, math.cos(th), "conformal")


@dataclass(frozen=True)
class ReflectedPolarFocal:
    f: float
    x: float
    h: float
    reflected: HomPoint
    foot: HomPoint


def focal_reflected_polar_method(vp_a: HomPoint, vp_b: HomPoint, p: HomPoint) -> ReflectedPolarFocal:
    """f^2 = x h, with h = |PA| and x = |PD|, D the foot of B on line AA'."""
    a, b, pp = vp_a.xy, vp_b.xy, p.xy
    h = float(np.linalg.norm(a - pp))
    if h <= EPS * max(1.0, np.linalg.norm(pp)):
        raise DegenerateInputError("vanishing point coincides with the principal point")
    u = (a - pp) / h
    d = pp + float((b - pp) @ u) * u
    x = -float((d - pp) @ u)
    if x * h <= 0:
        raise GeometryError("foot point lies on the wrong side of P; rays are not orthogonal")
    return ReflectedPolarFocal(math.sqrt(x * h), x, h, HomPoint.from_xy(*(2 * pp - a)), HomPoint.from_xy(*d))


@dataclass(frozen=True)
class ConformalFocal:
    f: float
    a: float
    b: float
    d: float
    s: float
    foot: HomPoint
    conformal_point: ConformalPoint


def _segment_split(vp_a: HomPoint, vp_b: HomPoint, p: HomPoint):
    line = join(vp_a, vp_b)
    o = foot_of_perpendicular(p, line).xy
    a_xy, b_xy = vp_a.xy, vp_b.xy
    v = (b_xy - a_xy) / np.linalg.norm(b_xy - a_xy)
    a = float((o - a_xy) @ v)
    b = float((b_xy - o) @ v)
    d = float(np.linalg.norm(p.xy - o))
    return line, o, a, b, d


def focal_conformal_method(
    vp_a: HomPoint, vp_b: HomPoint, p: HomPoint, branch: str = "below"
) -> ConformalFocal:
    """f^2 = ab - d^2 through the Thales circle on AB."""
    sign = _branch_sign(branch)
    line, o, a, b, d = _segment_split(vp_a, vp_b, p)
    if a <= 0 or b <= 0:
        raise GeometryError("foot of the perpendicular from P is outside segment AB")
    f2 = a * b - d * d
    if f2 <= 0:
        raise GeometryError("ab <= d^2: vanishing points inconsistent with orthogonality")
    s = math.sqrt(a * b)
    cp = ConformalPoint(_point_along(o, below_normal(line), sign * s), line, branch)
    return ConformalFocal(math.sqrt(f2), a, b, d, s, HomPoint.from_xy(*o), cp)


@dataclass(frozen=True)
class KnownAngleFocal:
    f: float
    conformal_point: ConformalPoint
    circle_centre: np.ndarray = field(repr=False)
    circle_radius: float = 0.0
    a: float = 0.0
    b: float = 0.0
    d: float = 0.0
    s: float = 0.0


def angle_circle(vp_a: HomPoint, vp_b: HomPoint, theta: float, side: np.ndarray) -> tuple[np.ndarray, float]:
    """Circle through A and B on whose arc toward ``side`` the chord subtends theta."""
    if not 0.0 < theta < math.pi:
        raise ValueError("theta must lie strictly between 0 and pi")
    a, b = vp_a.xy, vp_b.xy
    chord = float(np.linalg.norm(b - a))
    if chord == 0:
        raise DegenerateInputError("vanishing points coincide")
    mid = 0.5 * (a + b)
    return mid + side * chord / (2.0 * math.tan(theta)), chord / (2.0 * math.sin(theta))


def conformal_point_from_known_angle(
    vp_a: HomPoint, vp_b: HomPoint, p: HomPoint, theta: float, branch: str = "below"
) -> list[KnownAngleFocal]:
    """Intersect the theta-angle circle over AB with the perpendicular from P.

    Usually one solution; two when the perpendicular crosses the arc twice, in
    which case the caller has to disambiguate (e.g. with a second angle pair).
    """
    sign = _branch_sign(branch)
    line, o, a, b, d = _segment_split(vp_a, vp_b, p)
    n = sign * below_normal(line)
    centre, radius = angle_circle(vp_a, vp_b, theta, n)
    w = o - centre
    half_b = float(w @ n)
    disc = half_b * half_b - (float(w @ w) - radius * radius)
    if disc < 0:
        raise GeometryError("perpendicular from the principal point misses the angle circle")
    out = []
    for t in sorted({-half_b + math.sqrt(disc), -half_b - math.sqrt(disc)}):
        if t <= 0:
            continue
        c = o + t * n
        if abs(angle_at(c, vp_a, vp_b) - theta) > 1e-7:
            continue
        f2 = t * t - d * d
        if f2 <= 0:
            continue
        cp = ConformalPoint(HomPoint.from_xy(*c), line, branch)
        out.append(KnownAngleFocal(math.sqrt(f2), cp, centre, radius, a, b, d, t))
    if not out:
        raise GeometryError("angle circle gives no valid conformal point for this principal point")
    return out


def circle_intersections(c1: np.ndarray, r1: float, c2: np.ndarray, r2: float, tol: float = EPS) -> list[np.ndarray]:
    dvec = c2 - c1
    dist = float(np.linalg.norm(dvec))
    scale = max(r1, r2)
    if dist <= tol * scale:
        raise DegenerateInputError("circles are concentric or coincident")
    if dist > r1 + r2 + tol * scale or dist < abs(r1 - r2) - tol * scale:
        raise GeometryError("angle circles do not intersect")
    along = (dist * dist + r1 * r1 - r2 * r2) / (2 * dist)
    h = math.sqrt(max(r1 * r1 - along * along, 0.0))
    u = dvec / dist
    base = c1 + along * u
    perp = np.array([-u[1], u[0]])
    return [base + h * perp, base - h * perp]


def conformal_point_from_two_angles(
    vp_a1: HomPoint, vp_b1: HomPoint, theta1: float,
    vp_a2: HomPoint, vp_b2: HomPoint, theta2: float,
    branch: str = "below",
) -> ConformalPoint:
    horizon = join(vp_a1, vp_b1)
    for v in (vp_a2, vp_b2):
        if abs(horizon.signed_distance(v)) > 1e-7 * max(1.0, np.linalg.norm(v.xy)):
            raise GeometryError("both angle pairs must lie on the same horizon")
    n = _branch_sign(branch) * below_normal(horizon)
    c1, r1 = angle_circle(vp_a1, vp_b1, theta1, n)
    c2, r2 = angle_circle(vp_a2, vp_b2, theta2, n)
    if np.linalg.norm(c1 - c2) <= EPS * max(r1, r2) and abs(r1 - r2) <= EPS * max(r1, r2):
        raise DegenerateInputError("the two angle circles coincide")
    best = max(circle_intersections(c1, r1, c2, r2), key=lambda q: float((q - horizon_point(horizon)) @ n))
    height = float((best - horizon_point(horizon)) @ n)
    if height <= EPS * max(r1, r2):
        raise GeometryError("angle circles meet only on the horizon")
    return ConformalPoint(HomPoint.from_xy(*best), horizon, branch)


def horizon_point(line: HomLine) -> np.ndarray:
    """Foot of the perpendicular from the origin onto a line."""
    return foot_of_perpendicular(HomPoint.from_xy(0.0, 0.0), line).xy


def principal_line_constraint(
    vp_a1: HomPoint, vp_b1: HomPoint, theta1: float,
    vp_a2: HomPoint, vp_b2: HomPoint, theta2: float,
    branch: str = "below",
) -> HomLine:
    """Line through the two-circle conformal point, perpendicular to the horizon.

    The principal point must lie on it.
    """
    cp = conformal_point_from_two_angles(vp_a1, vp_b1, theta1, vp_a2, vp_b2, theta2, branch)
    return perpendicular_through(cp.point, cp.horizon)


def camera_tilt(horizon: HomLine, c: CalibratingConic) -> float:
    """Angle between the principal ray and the horizon plane, positive when tilted down.

    Measured as the angle OEP, E being the conic point on the parallel to the
    horizon through P (the conformal point of line OP).
    """
    if not c.is_circle():
        raise NotSquarePixelsError("camera tilt needs a circular calibrating conic")
    p = c.centre
    o = foot_of_perpendicular(p, horizon)
    d = float(np.linalg.norm(p.xy - o.xy))
    if d == 0.0:
        return 0.0
    e = conic_line_intersections(c.conic, parallel_through(p, horizon))[0]
    tilt = angle_at(e.xy, o, p)
    # horizon above P (P on its larger-y side) means looking down
    return tilt if float((p.xy - o.xy) @ below_normal(horizon)) > 0 else -tilt


@dataclass(frozen=True)
class FieldOfView:
    horizontal: float
    vertical: float
    diagonal: float

    def degrees(self) -> dict:
        return {k: math.degrees(getattr(self, k)) for k in ("horizontal", "vertical", "diagonal")}


def _collinear_angle(p: np.ndarray, f: float, a: np.ndarray, b: np.ndarray) -> float:
    """Angle between rays to a and b when P is on line ab: conformal point is on the conic."""
    u = (b - a) / np.linalg.norm(b - a)
    c = p + f * np.array([-u[1], u[0]])
    return angle_at(c, HomPoint.from_xy(*a), HomPoint.from_xy(*b))


def field_of_view(c: CalibratingConic, image_width: float, image_height: float) -> FieldOfView:
    if not c.is_circle():
        raise NotSquarePixelsError("field of view needs a circular calibrating conic")
    f = k_from_calibrating_conic(c).focal
    p = c.centre.xy
    centre = np.array([image_width / 2.0, image_height / 2.0])
    if np.linalg.norm(p - centre) > 1e-6 * math.hypot(image_width, image_height):
        raise GeometryError("field of view construction assumes the principal point at the image centre")
    w2, h2 = image_width / 2.0, image_height / 2.0
    return FieldOfView(
        _collinear_angle(p, f, p - [w2, 0], p + [w2, 0]),
        _collinear_angle(p, f, p - [0, h2], p + [0, h2]),
        _collinear_angle(p, f, p - [w2, h2], p + [w2, h2]),
    )


@dataclass(frozen=True)
class Conformality:
    anisotropy: float
    lam: float
    jacobian: np.ndarray = field(repr=False)


def conformality_check(
    k: CalibrationMatrix,
    horizon: HomLine,
    world_plane_map,
    probe: HomPoint,
    image_size: tuple[float, float] | None = None,
) -> Conformality:
    """Finite-difference Jacobian of the image-to-plane map at ``probe``.

    ``world_plane_map`` maps plane coordinates to image pixels.  Anisotropy is
    (s_max - s_min) / (s_max + s_min) of the Jacobian's singular values; it is
    zero exactly where the map is conformal.
    """
    f = _square_k(k)
    scale = max(f, math.hypot(*image_size)) if image_size else f
    if abs(horizon.signed_distance(probe)) <= 1e-9 * scale:
        raise GeometryError("probe lies on the horizon; image-to-plane map is singular there")
    inv = np.linalg.inv(np.asarray(world_plane_map, dtype=float))

    def to_plane(xy):
        q = inv @ np.array([xy[0], xy[1], 1.0])
        return q[:2] / q[2]

    x0 = probe.xy
    step = 1e-6 * scale
    jac = np.empty((2, 2))
    for i in range(2):
        e = np.zeros(2)
        e[i] = step
        jac[:, i] = (to_plane(x0 + e) - to_plane(x0 - e)) / (2 * step)
    sv = np.linalg.svd(jac, compute_uv=False)
    return Conformality(float((sv[0] - sv[1]) / (sv[0] + sv[1])), float(np.mean(sv**2)), jac)
