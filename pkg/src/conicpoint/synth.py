"""Synthetic pinhole camera and planar-motion sequences used as ground truth.

World frame: the ground is z = 0 with z up.  A platform at heading psi looks
along (cos psi, sin psi) and is pitched down by a fixed angle.  Camera axes
are raster: x right, y down, z forward.  All ground-truth quantities here are
computed directly from the camera model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .calibration import CalibrationMatrix
from .errors import DegenerateInputError
from .matches import MatchSet
from .projective import HomLine, HomPoint


def rot_z(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def platform_rotation(heading: float, pitch: float, roll: float = 0.0) -> np.ndarray:
    """World-to-camera rotation for a camera on a platform (pitch > 0 looks down)."""
    fwd = np.array([math.cos(pitch) * math.cos(heading), math.cos(pitch) * math.sin(heading), -math.sin(pitch)])
    right = np.array([math.sin(heading), -math.cos(heading), 0.0])
    down = np.cross(fwd, right)
    r = np.vstack([right, down, fwd])
    if roll:
        c, s = math.cos(roll), math.sin(roll)
        r = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]) @ r
    return r


@dataclass(frozen=True)
class SyntheticCamera:
    k: CalibrationMatrix
    rotation: np.ndarray
    centre: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=float)
        if np.abs(r @ r.T - np.eye(3)).max() > 1e-12 or abs(np.linalg.det(r) - 1) > 1e-12:
            raise ValueError("rotation must be orthonormal with determinant +1")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "centre", np.asarray(self.centre, dtype=float).reshape(3))

    @classmethod
    def on_platform(
        cls, k: CalibrationMatrix, x: float, y: float, heading: float,
        height: float, pitch: float, roll: float = 0.0,
    ) -> SyntheticCamera:
        return cls(k, platform_rotation(heading, pitch, roll), np.array([x, y, height]))

    @property
    def projection(self) -> np.ndarray:
        return self.k.matrix @ np.hstack([self.rotation, -(self.rotation @ self.centre)[:, None]])

    def depth(self, world_points) -> np.ndarray:
        x = np.atleast_2d(np.asarray(world_points, dtype=float))
        return (x - self.centre) @ self.rotation[2]

    def project_many(self, world_points) -> np.ndarray:
        """Pixel coordinates (N, 2); NaN rows for points not in front of the camera."""
        x = np.atleast_2d(np.asarray(world_points, dtype=float))
        cam = (x - self.centre) @ self.rotation.T
        img = cam @ self.k.matrix.T
        out = img[:, :2] / img[:, 2:3]
        out[cam[:, 2] <= 0] = np.nan
        return out

    def project(self, world_point) -> HomPoint:
        cam = self.rotation @ (np.asarray(world_point, dtype=float) - self.centre)
        if cam[2] <= 0:
            raise DegenerateInputError("point is behind the camera")
        return HomPoint(self.k.matrix @ cam)

    def ray(self, x: HomPoint) -> np.ndarray:
        """Unit world direction of the ray through an image point."""
        d = self.rotation.T @ (self.k.inverse @ x.oriented())
        return d / np.linalg.norm(d)

    def direction_image(self, d) -> HomPoint:
        """Vanishing point of a world direction."""
        return HomPoint(self.k.matrix @ self.rotation @ np.asarray(d, dtype=float))

    def ground_plane_map(self) -> np.ndarray:
        """Homography from ground coordinates (X, Y) to pixels."""
        r = self.rotation
        return self.k.matrix @ np.column_stack([r[:, 0], r[:, 1], -(r @ self.centre)])


def true_horizon(cam: SyntheticCamera, normal=(0.0, 0.0, 1.0)) -> HomLine:
    """Vanishing line K^-T R n of planes with the given world normal."""
    line = cam.k.inverse.T @ cam.rotation @ np.asarray(normal, dtype=float)
    h = HomLine(line)
    if h.is_at_infinity():
        raise DegenerateInputError("plane is fronto-parallel; its vanishing line is the line at infinity")
    return h


def true_conformal_point(cam: SyntheticCamera, normal=(0.0, 0.0, 1.0), ground_side: bool = True) -> np.ndarray:
    """Camera centre rotated about the horizon into the image plane.

    Built from the camera geometry: the world point on the image plane's
    horizon line nearest to the camera centre, then swung by the distance.
    """
    k = cam.k
    f = k.fx
    n_cam = cam.rotation @ np.asarray(normal, dtype=float)
    # horizon in normalized camera coords: n . (x, y, 1) = 0 on the plane z = 1
    a, b, c = n_cam
    norm2 = a * a + b * b
    foot = -c * np.array([a, b]) / norm2
    dist = math.hypot(1.0, math.hypot(*foot))
    # direction on the plane z = 1 pointing away from the sky (opposite to n's up side)
    away = -np.array([a, b]) / math.sqrt(norm2)
    if not ground_side:
        away = -away
    q = foot + dist * away
    return np.array([f * q[0] + k.px, f * q[1] + k.py])


@dataclass
class PlanarMotionSpec:
    k: CalibrationMatrix
    headings: np.ndarray
    positions: np.ndarray
    height: float = 1.5
    pitch: float = math.radians(20.0)
    image_size: tuple[float, float] = (640.0, 480.0)

    def __post_init__(self):
        self.headings = np.asarray(self.headings, dtype=float).reshape(-1)
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        if len(self.headings) != len(self.positions):
            raise ValueError("one heading per position")
        if self.height <= 0:
            raise ValueError("camera height must be positive")

    def __len__(self):
        return len(self.headings)

    def camera(self, frame: int) -> SyntheticCamera:
        x, y = self.positions[frame]
        return SyntheticCamera.on_platform(self.k, x, y, self.headings[frame], self.height, self.pitch)

    def relative_rotation(self, i: int, j: int) -> float:
        d = self.headings[j] - self.headings[i]
        return math.atan2(math.sin(d), math.cos(d))

    def relative_translation(self, i: int, j: int) -> np.ndarray:
        """Motion of the platform from i to j, in frame i's (forward, left) axes, camera-height units."""
        return rot_z(-self.headings[i])[:2, :2] @ (self.positions[j] - self.positions[i]) / self.height


@dataclass
class SyntheticSequence:
    spec: PlanarMotionSpec
    pairs: list[MatchSet]
    inliers: list[np.ndarray] = field(default_factory=list)

    def truth(self) -> dict:
        return {
            "frames": len(self.spec),
            "headings_deg": np.degrees(self.spec.headings - self.spec.headings[0]).tolist() if len(self.spec) else [],
            "positions": (self.spec.positions / self.spec.height).tolist(),
            "height": self.spec.height,
            "pitch_deg": math.degrees(self.spec.pitch),
            "k": self.spec.k.as_dict(),
            "image_size": list(self.spec.image_size),
            "inliers": [m.tolist() for m in self.inliers],
        }


def ground_points_ahead(cam: SyntheticCamera, rng: np.random.Generator, n: int,
                        near: float = 2.0, far: float = 25.0, half_width: float = 10.0) -> np.ndarray:
    """Random ground points in a trapezoid ahead of a camera."""
    heading_dir = cam.rotation[2, :2] / np.linalg.norm(cam.rotation[2, :2])
    side = np.array([-heading_dir[1], heading_dir[0]])
    fwd = rng.uniform(near, far, n)
    lat = rng.uniform(-1.0, 1.0, n) * half_width * fwd / far
    xy = cam.centre[:2] + fwd[:, None] * heading_dir + lat[:, None] * side
    return np.column_stack([xy, np.zeros(n)])


def ground_points_in_view(ci: SyntheticCamera, cj: SyntheticCamera, rng: np.random.Generator, n: int,
                          size, far: float = 50.0, max_rounds: int = 50) -> np.ndarray:
    """n ground points spread uniformly over frame i's image of the ground, visible in frame j too.

    Pixels are drawn uniformly over the image and back-projected to the ground;
    points behind the camera or beyond ``far`` (depth along the axis) are redrawn.
    """
    ginv = np.linalg.inv(ci.ground_plane_map())
    got, total = [], 0
    for _ in range(max_rounds):
        px = rng.uniform((0.0, 0.0), size, (4 * n, 2))
        g = np.column_stack([px, np.ones(len(px))]) @ ginv.T
        g = g[g[:, 2] > 0]
        w = np.column_stack([g[:, :2] / g[:, 2:3], np.zeros(len(g))])
        d = ci.depth(w)
        w = w[(d > 0) & (d < far)]
        w = w[_visible(cj.project_many(w), size)]
        got.append(w)
        total += len(w)
        if total >= n:
            return np.vstack(got)[:n]
    raise DegenerateInputError("frames share too little visible ground to place the requested points")


def _visible(px: np.ndarray, size) -> np.ndarray:
    w, h = size
    ok = np.all(np.isfinite(px), axis=1)
    ok[ok] &= (px[ok, 0] >= 0) & (px[ok, 0] <= w) & (px[ok, 1] >= 0) & (px[ok, 1] <= h)
    return ok


def generate_sequence(
    spec: PlanarMotionSpec,
    scene: np.ndarray | None = None,
    noise: float = 0.0,
    outlier_fraction: float = 0.0,
    seed: int = 0,
    points_per_pair: int = 100,
    pairs: list[tuple[int, int]] | None = None,
) -> SyntheticSequence:
    """Matches for each frame pair (consecutive by default).

    With ``scene=None`` fresh ground points covering the shared view are drawn
    for each pair.  Noise is isotropic Gaussian in pixels on both points; outliers
    replace the frame-j point with a uniform draw over the image.
    """
    rng = np.random.default_rng(seed)
    if pairs is None:
        pairs = [(f, f + 1) for f in range(len(spec) - 1)]
    out, masks = [], []
    for i, j in pairs:
        ci, cj = spec.camera(i), spec.camera(j)
        pts = ground_points_in_view(ci, cj, rng, points_per_pair, spec.image_size) if scene is None else np.asarray(scene, float).reshape(-1, 3)
        xi, xj = ci.project_many(pts), cj.project_many(pts)
        keep = _visible(xi, spec.image_size) & _visible(xj, spec.image_size)
        xi, xj = xi[keep], xj[keep]
        on_ground = np.abs(pts[keep, 2]) < 1e-12
        n = len(xi)
        if noise > 0:
            xi = xi + rng.normal(0.0, noise, xi.shape)
            xj = xj + rng.normal(0.0, noise, xj.shape)
        inlier = np.ones(n, dtype=bool)
        n_out = int(round(outlier_fraction * n))
        if n_out:
            idx = rng.choice(n, n_out, replace=False)
            inlier[idx] = False
            xj[idx] = rng.uniform((0, 0), spec.image_size, (n_out, 2))
        out.append(MatchSet(i, j, xi, xj, on_ground))
        masks.append(inlier)
    return SyntheticSequence(spec, out, masks)
