"""Calibration matrix, image of the absolute conic, and the calibrating conic.

The calibrating conic ``C = K^-T diag(1, 1, -1) K^-1`` is the image of the
cone of rays at 45 degrees to the optical axis.  Its reflected polars give
orthogonal directions, and angles between rays can be read from it either
algebraically through the IAC or through a cross-ratio construction.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConditioningWarning, DegenerateInputError, GeometryError, NotSquarePixelsError
from .projective import (
    EPS,
    Conic,
    HomLine,
    HomPoint,
    are_collinear,
    cross_ratio,
    cross_ratio_on_line,
    join,
    meet,
    perpendicular_through,
    polar,
)

REFLECT = np.diag([1.0, 1.0, -1.0])


@dataclass(frozen=True)
class CalibrationMatrix:
    fx: float
    fy: float
    s: float = 0.0
    px: float = 0.0
    py: float = 0.0

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise GeometryError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")

    @classmethod
    def square(cls, f: float, px: float = 0.0, py: float = 0.0) -> CalibrationMatrix:
        return cls(f, f, 0.0, px, py)

    @classmethod
    def from_matrix(cls, k, tol: float = EPS) -> CalibrationMatrix:
        k = np.asarray(k, dtype=float)
        if k.shape != (3, 3) or k[2, 2] == 0:
            raise GeometryError("calibration matrix must be 3x3 with nonzero K[2,2]")
        k = k / k[2, 2]
        if max(abs(k[1, 0]), abs(k[2, 0]), abs(k[2, 1])) > tol * np.abs(k).max():
            raise GeometryError("calibration matrix must be upper triangular")
        return cls(k[0, 0], k[1, 1], k[0, 1], k[0, 2], k[1, 2])

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, self.s, self.px], [0.0, self.fy, self.py], [0.0, 0.0, 1.0]])

    @property
    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.matrix)

    @property
    def principal_point(self) -> HomPoint:
        return HomPoint.from_xy(self.px, self.py)

    def is_square_pixels(self, tol: float = 1e-6) -> bool:
        return abs(self.fx - self.fy) <= tol * max(self.fx, self.fy) and abs(self.s) <= tol * self.fx

    @property
    def focal(self) -> float:
        """Single focal length; defined only for square pixels."""
        require_square_pixels(self)
        return 0.5 * (self.fx + self.fy)

    def as_dict(self) -> dict:
        return {"fx": self.fx, "fy": self.fy, "skew": self.s, "px": self.px, "py": self.py}


def require_square_pixels(k: CalibrationMatrix, tol: float = 1e-6) -> None:
    if not k.is_square_pixels(tol):
        raise NotSquarePixelsError(f"square pixels and zero skew required, got {k}")


@dataclass(frozen=True)
class IacConic:
    conic: Conic


@dataclass(frozen=True)
class CalibratingConic:
    conic: Conic
    centre: HomPoint

    @classmethod
    def from_conic(cls, conic: Conic) -> CalibratingConic:
        pos, neg = conic.signature()
        if sorted((pos, neg)) != [1, 2]:
            raise GeometryError(f"calibrating conic must have signature (+,+,-), got {(pos, neg)}")
        return cls(conic, conic.centre())

    def is_circle(self, tol: float = 1e-6) -> bool:
        a, b, c = self.conic.coefficients[:3]
        return abs(a - c) <= tol * max(abs(a), abs(c)) and abs(b) <= tol * max(abs(a), abs(c))

    @property
    def radius(self) -> float:
        """Radius of a circular calibrating conic (the focal length)."""
        if not self.is_circle():
            raise NotSquarePixelsError("calibrating conic is not a circle")
        return k_from_calibrating_conic(self).focal


@dataclass(frozen=True)
class AngleMeasurement:
    theta: float
    cos_theta: float
    method: str

    @classmethod
    def from_cos(cls, c: float, method: str) -> AngleMeasurement:
        c = float(min(1.0, max(-1.0, c)))
        return cls(math.acos(c), c, method)

    @property
    def degrees(self) -> float:
        return math.degrees(self.theta)


def iac_from_k(k: CalibrationMatrix) -> IacConic:
    kinv = k.inverse
    return IacConic(Conic.from_matrix(kinv.T @ kinv))


def k_from_iac(w: IacConic) -> CalibrationMatrix:
    """Upper-triangular factor of omega^-1 = K K^T."""
    return _upper_factor(np.linalg.inv(w.conic.matrix))


def _upper_factor(a: np.ndarray) -> CalibrationMatrix:
    """K upper triangular, positive diagonal, with K K^T = a (up to scale)."""
    flip = np.eye(3)[::-1]
    try:
        low = np.linalg.cholesky(flip @ a @ flip)
    except np.linalg.LinAlgError as exc:
        raise GeometryError("matrix is not positive definite; no calibration matrix") from exc
    return CalibrationMatrix.from_matrix(flip @ low @ flip, tol=1e-6)


def calibrating_conic_from_k(k: CalibrationMatrix) -> CalibratingConic:
    kinv = k.inverse
    return CalibratingConic(Conic.from_matrix(kinv.T @ REFLECT @ kinv), k.principal_point)


def k_from_calibrating_conic(c: CalibratingConic) -> CalibrationMatrix:
    """Read K back from the conic.

    The inverse of the conic is ``K D K^T = K K^T - 2 k3 k3^T`` with k3 the
    third column of K, so k3 is read from its last column and K K^T follows.
    """
    pos, neg = c.conic.signature()
    if sorted((pos, neg)) != [1, 2]:
        raise GeometryError(f"calibrating conic must have signature (+,+,-), got {(pos, neg)}")
    m = np.linalg.inv(c.conic.matrix)
    if m[2, 2] == 0:
        raise GeometryError("conic centre is at infinity")
    m = -m / m[2, 2]
    m = 0.5 * (m + m.T)
    k3 = -m[:, 2]
    return _upper_factor(m + 2.0 * np.outer(k3, k3))


def reflection_matrix(k: CalibrationMatrix) -> np.ndarray:
    """S = K D K^-1, point reflection through the principal point."""
    return k.matrix @ REFLECT @ k.inverse


def reflect_through_centre(x: HomPoint, k: CalibrationMatrix) -> HomPoint:
    return HomPoint(reflection_matrix(k) @ x.vec)


def reflected_polar(x: HomPoint, k: CalibrationMatrix) -> HomLine:
    """Polar of the reflected point; every point on it is orthogonal to x."""
    return polar(reflect_through_centre(x, k), calibrating_conic_from_k(k).conic)


def angle_algebraic(x1: HomPoint, x2: HomPoint, k: CalibrationMatrix) -> AngleMeasurement:
    w = iac_from_k(k).conic.matrix
    a, b = x1.oriented(), x2.oriented()
    c = (a @ w @ b) / math.sqrt((a @ w @ a) * (b @ w @ b))
    return AngleMeasurement.from_cos(c, "algebraic")


def angle_cross_ratio(x1: HomPoint, x2: HomPoint, k: CalibrationMatrix, tol: float = EPS) -> AngleMeasurement:
    """Ray angle from the cross-ratio of x1, x2 and their line's hits on the reflected polars.

    cos^2 is the cross-ratio; cos is positive when x1 and x2 lie on the same
    side of x1's reflected polar.
    """
    conic = calibrating_conic_from_k(k).conic
    refl = reflection_matrix(k)
    l1 = polar(HomPoint(refl @ x1.vec), conic)
    l2 = polar(HomPoint(refl @ x2.vec), conic)
    base = join(x1, x2, tol)
    x1p = meet(base, l1, tol)
    x2p = meet(base, l2, tol)
    if x1p.same_as(x1, 1e-14) or x2p.same_as(x2, 1e-14):
        raise GeometryError("point lies on its own reflected polar; conic is not a calibrating conic")
    cos2 = abs(cross_ratio_on_line([x1, x2, x1p, x2p], base))
    side = (l1.vec @ x1.oriented()) * (l1.vec @ x2.oriented())
    c = math.sqrt(min(cos2, 1.0))
    return AngleMeasurement.from_cos(c if side >= 0 else -c, "cross_ratio")


def angle_cross_ratio_batch(x1: np.ndarray, x2: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Vectorised cross-ratio cosines for many (x1, x2, K) triples.

    x1, x2 are (n, 3) homogeneous points and k is (n, 3, 3) or a single 3x3.
    Same construction as ``angle_cross_ratio``; degenerate rows come back NaN.
    """
    x1 = np.asarray(x1, float)
    x2 = np.asarray(x2, float)
    k = np.broadcast_to(np.asarray(k, float), (len(x1), 3, 3))
    kinv = np.linalg.inv(k)
    conic = np.swapaxes(kinv, 1, 2) @ REFLECT @ kinv
    refl = k @ REFLECT @ kinv
    x1 = x1 * np.sign(x1[:, 2:3] + (x1[:, 2:3] == 0))
    x2 = x2 * np.sign(x2[:, 2:3] + (x2[:, 2:3] == 0))
    l1 = np.einsum("nij,nj->ni", conic, np.einsum("nij,nj->ni", refl, x1))
    l2 = np.einsum("nij,nj->ni", conic, np.einsum("nij,nj->ni", refl, x2))
    base = np.cross(x1, x2)
    x1p = np.cross(base, l1)
    x2p = np.cross(base, l2)
    u = np.stack([-base[:, 1], base[:, 0]], axis=1)
    coords = [np.stack([np.einsum("ni,ni->n", p[:, :2], u), p[:, 2]], axis=1) for p in (x1, x2, x1p, x2p)]

    def det(i, j):
        return coords[i][:, 0] * coords[j][:, 1] - coords[j][:, 0] * coords[i][:, 1]

    with np.errstate(divide="ignore", invalid="ignore"):
        cos2 = np.abs(det(1, 2) * det(0, 3) / (det(0, 2) * det(1, 3)))
    side = np.einsum("ni,ni->n", l1, x1) * np.einsum("ni,ni->n", l1, x2)
    c = np.sqrt(np.minimum(cos2, 1.0))
    return np.where(side >= 0, c, -c)


def orthocentre(v1: HomPoint, v2: HomPoint, v3: HomPoint) -> HomPoint:
    """Meet of the altitudes from v1 and v2."""
    alt1 = perpendicular_through(v1, join(v2, v3))
    alt2 = perpendicular_through(v2, join(v1, v3))
    return meet(alt1, alt2)


def conic_from_three_orthogonal_vps(
    v1: HomPoint, v2: HomPoint, v3: HomPoint, tol: float = EPS
) -> CalibratingConic:
    """Circle centred at the orthocentre of the vanishing-point triangle.

    Assumes square pixels and zero skew.  Raises if the triangle is not acute,
    which would put the principal point outside it.
    """
    vps = (v1, v2, v3)
    if not all(v.is_finite() for v in vps):
        raise DegenerateInputError("vanishing points at infinity are not supported")
    if are_collinear(vps, tol):
        raise DegenerateInputError("vanishing points are collinear")
    p = orthocentre(v1, v2, v3).xy
    a, b = v1.xy - p, v2.xy - p
    r2 = -float(a @ b)
    scale = max(np.linalg.norm(v.xy - p) for v in vps)
    if r2 <= 0:
        raise GeometryError("vanishing-point triangle is not acute; not an orthogonal triple")
    if r2 < tol * scale * scale:
        warnings.warn("vanishing-point triangle is nearly right-angled", ConditioningWarning, stacklevel=2)
    return CalibratingConic(Conic.circle(p[0], p[1], math.sqrt(r2)), HomPoint.from_xy(*p))
