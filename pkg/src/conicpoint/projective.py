"""Homogeneous 2D points, lines and conics.

Everything here works on 3-vectors defined up to a nonzero scale.  Values are
immutable; equality up to scale is tested after normalizing to unit norm with
the first nonzero coordinate positive.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateInputError, GeometryError

EPS = 1e-9


def _as_vec3(values) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    if arr.shape != (3,):
        raise ValueError(f"expected 3 homogeneous coordinates, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("homogeneous coordinates must be finite numbers")
    if not np.any(arr):
        raise DegenerateInputError("the zero vector is not a projective element")
    arr.setflags(write=False)
    return arr


def canonical(v: np.ndarray) -> np.ndarray:
    """Unit-norm representative whose first nonzero entry is positive."""
    v = np.asarray(v, dtype=float)
    u = v / np.linalg.norm(v)
    nz = np.flatnonzero(np.abs(u) > 1e-15)
    if len(nz) and u[nz[0]] < 0:
        return -u
    return u


class _Homogeneous:
    __slots__ = ("_v",)

    def __init__(self, coords):
        self._v = _as_vec3(coords)

    @property
    def vec(self) -> np.ndarray:
        return self._v

    def __array__(self, dtype=None, copy=None):
        return np.array(self._v, dtype=dtype)

    def __iter__(self):
        return iter(self._v.tolist())

    def __getitem__(self, i):
        return self._v[i]

    def normalized(self):
        return type(self)(canonical(self._v))

    def same_as(self, other, tol: float = EPS) -> bool:
        a = canonical(self._v)
        b = canonical(np.asarray(other, dtype=float))
        return bool(np.linalg.norm(a - b) <= tol)

    def __repr__(self):
        return f"{type(self).__name__}({', '.join(f'{x:.6g}' for x in self._v)})"


class HomPoint(_Homogeneous):
    """Point of the projective plane; third coordinate 0 means a point at infinity."""

    __slots__ = ()

    @classmethod
    def from_xy(cls, x: float, y: float) -> HomPoint:
        return cls((x, y, 1.0))

    @classmethod
    def at_infinity(cls, dx: float, dy: float) -> HomPoint:
        return cls((dx, dy, 0.0))

    def is_finite(self, tol: float = 1e-12) -> bool:
        return abs(self._v[2]) > tol * np.linalg.norm(self._v)

    @property
    def xy(self) -> np.ndarray:
        if not self.is_finite():
            raise DegenerateInputError(f"{self!r} is at infinity and has no Euclidean position")
        return self._v[:2] / self._v[2]

    def affine(self) -> HomPoint:
        """Representative with third coordinate 1."""
        return HomPoint((*self.xy, 1.0))

    def oriented(self) -> np.ndarray:
        """Representative used for side-of-line tests: w > 0 when finite, canonical otherwise."""
        if self.is_finite():
            return self._v / self._v[2]
        return canonical(self._v)


class HomLine(_Homogeneous):
    """Line a*x + b*y + c*w = 0."""

    __slots__ = ()

    @classmethod
    def at_infinity(cls) -> HomLine:
        return cls((0.0, 0.0, 1.0))

    def is_at_infinity(self, tol: float = 1e-12) -> bool:
        return float(np.hypot(self._v[0], self._v[1])) <= tol * np.linalg.norm(self._v)

    @property
    def normal(self) -> np.ndarray:
        """Unit normal (a, b) in the Euclidean plane."""
        if self.is_at_infinity():
            raise DegenerateInputError("the line at infinity has no Euclidean normal")
        n = self._v[:2]
        return n / np.linalg.norm(n)

    @property
    def direction(self) -> np.ndarray:
        n = self.normal
        return np.array([-n[1], n[0]])

    def contains(self, p: HomPoint, tol: float = EPS) -> bool:
        return abs(canonical(self._v) @ canonical(p.vec)) <= tol

    def signed_distance(self, p: HomPoint) -> float:
        if self.is_at_infinity():
            raise DegenerateInputError("distance to the line at infinity is undefined")
        q = p.xy
        return float((self._v[0] * q[0] + self._v[1] * q[1] + self._v[2]) / np.hypot(self._v[0], self._v[1]))


class Conic:
    """Symmetric 3x3 matrix up to scale, stored as its upper triangle.

    Entries follow ``[[a, b, d], [b, c, e], [d, e, f]]`` so that a point lies
    on the conic when ``a x^2 + 2b xy + c y^2 + 2d x + 2e y + f = 0``.
    """

    __slots__ = ("_u",)

    def __init__(self, a, b, c, d, e, f):
        u = np.array([a, b, c, d, e, f], dtype=float)
        if not np.all(np.isfinite(u)) or not np.any(u):
            raise DegenerateInputError("conic coefficients must be finite and not all zero")
        u.setflags(write=False)
        self._u = u

    @classmethod
    def from_matrix(cls, m, tol: float = EPS) -> Conic:
        m = np.asarray(m, dtype=float)
        if m.shape != (3, 3):
            raise ValueError("conic matrix must be 3x3")
        scale = np.abs(m).max()
        if scale == 0 or np.abs(m - m.T).max() > tol * scale:
            raise GeometryError("conic matrix is not symmetric")
        m = 0.5 * (m + m.T)
        return cls(m[0, 0], m[0, 1], m[1, 1], m[0, 2], m[1, 2], m[2, 2])

    @classmethod
    def circle(cls, cx: float, cy: float, r: float) -> Conic:
        return cls(1.0, 0.0, 1.0, -cx, -cy, cx * cx + cy * cy - r * r)

    @property
    def coefficients(self) -> np.ndarray:
        return self._u

    @property
    def matrix(self) -> np.ndarray:
        a, b, c, d, e, f = self._u
        return np.array([[a, b, d], [b, c, e], [d, e, f]])

    def rank(self, tol: float = EPS) -> int:
        s = np.linalg.svd(self.matrix, compute_uv=False)
        return int(np.sum(s > tol * s[0]))

    def signature(self, tol: float = EPS) -> tuple[int, int]:
        """(number of positive, number of negative) eigenvalues, up to overall sign ordering."""
        w = np.linalg.eigvalsh(self.matrix)
        big = np.abs(w).max()
        pos = int(np.sum(w > tol * big))
        neg = int(np.sum(w < -tol * big))
        return pos, neg

    def is_degenerate(self, tol: float = EPS) -> bool:
        return self.rank(tol) < 3

    def is_real(self, tol: float = EPS) -> bool:
        """True when the conic contains real points (indefinite matrix)."""
        pos, neg = self.signature(tol)
        return pos > 0 and neg > 0

    def evaluate(self, p: HomPoint) -> float:
        """x^T C x with both normalized to unit norm; zero for points on the conic."""
        x = canonical(p.vec)
        m = self.matrix / np.abs(self._u).max()
        return float(x @ m @ x)

    def contains(self, p: HomPoint, tol: float = EPS) -> bool:
        return abs(self.evaluate(p)) <= tol

    def centre(self) -> HomPoint:
        """Pole of the line at infinity."""
        return HomPoint(np.linalg.solve(self.matrix, np.array([0.0, 0.0, 1.0])))

    def scaled(self, s: float) -> Conic:
        return Conic(*(s * self._u))

    def __repr__(self):
        return "Conic(" + ", ".join(f"{x:.6g}" for x in self._u) + ")"


def join(p: HomPoint, q: HomPoint, tol: float = EPS) -> HomLine:
    """Line through two points."""
    v = np.cross(canonical(p.vec), canonical(q.vec))
    if np.linalg.norm(v) <= tol:
        raise DegenerateInputError(f"coincident points {p!r}, {q!r} do not define a line")
    return HomLine(v)


def meet(l: HomLine, m: HomLine, tol: float = EPS) -> HomPoint:
    """Intersection point of two lines (at infinity for parallel lines)."""
    v = np.cross(canonical(l.vec), canonical(m.vec))
    if np.linalg.norm(v) <= tol:
        raise DegenerateInputError(f"coincident lines {l!r}, {m!r} do not define a point")
    return HomPoint(v)


def are_collinear(points: Sequence[HomPoint], tol: float = EPS) -> bool:
    if len(points) < 3:
        return True
    a = np.array([canonical(p.vec) for p in points])
    s = np.linalg.svd(a, compute_uv=False)
    return bool(s[2] <= tol * s[0])


def common_line(points: Sequence[HomPoint], tol: float = EPS) -> HomLine:
    """Line through a set of collinear points; raises if they are not collinear."""
    a = np.array([canonical(p.vec) for p in points])
    _, s, vt = np.linalg.svd(a)
    if s[1] <= tol * s[0]:
        raise DegenerateInputError("points coincide; no unique common line")
    if len(points) > 2 and s[2] > tol * s[0]:
        raise GeometryError(f"points are not collinear (residual {s[2] / s[0]:.3g})")
    return HomLine(vt[2])


def _line_frame(line: HomLine) -> tuple[np.ndarray, np.ndarray]:
    """Base point and unit direction of a finite line."""
    n = line.normal
    c = line.vec[2] / np.hypot(line.vec[0], line.vec[1])
    return -c * n, np.array([-n[1], n[0]])


def line_coordinates(points: Iterable[HomPoint], line: HomLine) -> np.ndarray:
    """1-D homogeneous coordinates (t*w, w) of points on a line.

    t is the signed distance from the foot of the perpendicular from the origin,
    measured along the line's unit direction.  Finite points get w = 1.
    """
    base, u = _line_frame(line)
    out = []
    for p in points:
        x = p.oriented()
        out.append((x[:2] @ u - x[2] * (base @ u), x[2]))
    return np.array(out)


def line_parameters(points: Iterable[HomPoint], line: HomLine) -> np.ndarray:
    """Signed positions along a line's unit direction; +/-inf for points at infinity."""
    coords = line_coordinates(points, line)
    with np.errstate(divide="ignore"):
        return np.where(coords[:, 1] != 0, coords[:, 0] / np.where(coords[:, 1] != 0, coords[:, 1], 1), np.inf)


def signed_cross_ratio(a: HomPoint, b: HomPoint, c: HomPoint, d: HomPoint, tol: float = EPS) -> float:
    """Signed ratio |bc|.|ad| / (|ac|.|bd|) of four collinear points.

    Lengths are signed along the common line.  Points at infinity are allowed.
    """
    pts = [a, b, c, d]
    return cross_ratio_on_line(pts, common_line(pts, tol))


def cross_ratio_on_line(pts: Sequence[HomPoint], line: HomLine) -> float:
    """Signed cross-ratio of four points already known to lie on ``line``."""
    if line.is_at_infinity():
        raise DegenerateInputError("cross-ratio on the line at infinity needs a finite chart")
    u = line_coordinates(pts, line)

    def det(i, j):
        return u[i, 0] * u[j, 1] - u[j, 0] * u[i, 1]

    num = det(1, 2) * det(0, 3)
    den = det(0, 2) * det(1, 3)
    scale = np.prod(np.linalg.norm(u, axis=1))
    if abs(den) <= 1e-15 * scale:
        raise DegenerateInputError("cross-ratio denominator vanishes (coincident points)")
    return float(num / den)


def cross_ratio(a: HomPoint, b: HomPoint, c: HomPoint, d: HomPoint, tol: float = EPS) -> float:
    """Unsigned cross-ratio |bc|.|ad| / (|ac|.|bd|) of four collinear points."""
    return abs(signed_cross_ratio(a, b, c, d, tol))


def polar(x: HomPoint, c: Conic, tol: float = EPS) -> HomLine:
    """Polar line C x of a point with respect to a non-degenerate conic."""
    if c.is_degenerate(tol):
        raise DegenerateInputError("polar requires a rank-3 conic")
    return HomLine(c.matrix @ canonical(x.vec))


def pole(l: HomLine, c: Conic, tol: float = EPS) -> HomPoint:
    """Inverse of polar: the point whose polar is l."""
    if c.is_degenerate(tol):
        raise DegenerateInputError("pole requires a rank-3 conic")
    return HomPoint(np.linalg.solve(c.matrix, canonical(l.vec)))


def _two_points_on(line: HomLine, c: Conic) -> tuple[np.ndarray, np.ndarray]:
    """A finite point near the conic's centre and the point at infinity of the line."""
    if line.is_at_infinity():
        return np.array([0.0, 1.0, 0.0]), np.array([1.0, 0.0, 0.0])
    centre = np.linalg.solve(c.matrix, np.array([0.0, 0.0, 1.0]))
    anchor = HomPoint(centre) if abs(centre[2]) > 1e-12 * np.linalg.norm(centre) else HomPoint((0.0, 0.0, 1.0))
    p0 = anchor.xy - line.signed_distance(anchor) * line.normal
    return np.array([p0[0], p0[1], 1.0]), np.array([*line.direction, 0.0])


def conic_line_intersections(c: Conic, line: HomLine, tol: float = EPS) -> list[HomPoint]:
    """Real intersections of a line with a conic: zero, one (tangent) or two points."""
    if c.is_degenerate(tol):
        raise DegenerateInputError("conic is degenerate")
    m = c.matrix
    p, q = _two_points_on(line, c)
    # points s*p + t*q; quadratic A t^2 + 2B s t + Cc s^2 = 0
    A = q @ m @ q
    B = p @ m @ q
    Cc = p @ m @ p
    disc = B * B - A * Cc
    scale = max(B * B, abs(A * Cc))
    if scale == 0.0:
        if A == 0.0:
            raise DegenerateInputError("line lies on the conic")
        return [HomPoint(p)]
    if disc < -tol * scale:
        return []
    if abs(disc) <= tol * scale:
        if abs(A) >= abs(Cc):
            return [HomPoint(p + (-B / A) * q)]
        return [HomPoint((-B / Cc) * p + q)]
    r = np.sqrt(disc)
    if abs(A) >= abs(Cc):
        return [HomPoint(p + ((-B + sgn * r) / A) * q) for sgn in (1.0, -1.0)]
    return [HomPoint(((-B + sgn * r) / Cc) * p + q) for sgn in (1.0, -1.0)]


def foot_of_perpendicular(p: HomPoint, l: HomLine) -> HomPoint:
    """Closest point of l to the finite point p."""
    if not p.is_finite():
        raise DegenerateInputError("foot of perpendicular needs a finite point")
    if l.is_at_infinity():
        raise DegenerateInputError("no perpendicular to the line at infinity")
    return HomPoint.from_xy(*(p.xy - l.signed_distance(p) * l.normal))


def perpendicular_through(p: HomPoint, l: HomLine) -> HomLine:
    """Line through p orthogonal to l in the pixel metric."""
    if l.is_at_infinity():
        raise DegenerateInputError("no perpendicular to the line at infinity")
    return join(p, HomPoint.at_infinity(*l.normal))


def parallel_through(p: HomPoint, l: HomLine) -> HomLine:
    if l.is_at_infinity():
        raise DegenerateInputError("no parallel to the line at infinity")
    return join(p, HomPoint.at_infinity(*l.direction))


def point_distance(p: HomPoint, q: HomPoint) -> float:
    return float(np.linalg.norm(p.xy - q.xy))
