"""Planar odometry through the conformal point.

A camera on a platform moving over a ground plane sees the same horizon in
every frame, so the conformal point is fixed too.  Rotation between two
frames is the angle, measured at the conformal point, between the vanishing
points of a segment AB in one frame and its match A'B' in the other.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .calibration import CalibrationMatrix
from .conformal import ConformalPoint
from .errors import DegenerateInputError, EstimationError, HorizonNotIdentifiableError
from .matches import MatchSet
from .projective import HomLine, HomPoint, canonical

log = logging.getLogger(__name__)


def wrap(a):
    """Wrap angles to (-pi, pi]."""
    w = np.mod(np.asarray(a, dtype=float) + np.pi, 2 * np.pi) - np.pi
    w = np.where(w == -np.pi, np.pi, w)
    return float(w) if np.ndim(w) == 0 else w


# ---------------------------------------------------------------- homography

@dataclass(frozen=True)
class Homography:
    matrix: np.ndarray
    transfer_error: float = float("nan")

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (3, 3):
            raise ValueError("homography must be 3x3")
        m = canonical(m.reshape(-1)).reshape(3, 3)
        object.__setattr__(self, "matrix", m)

    @property
    def condition(self) -> float:
        return float(np.linalg.cond(self.matrix))

    def apply(self, pts: np.ndarray) -> np.ndarray:
        x = np.column_stack([pts, np.ones(len(pts))]) @ self.matrix.T
        return x[:, :2] / x[:, 2:3]


def _hartley(pts: np.ndarray) -> np.ndarray:
    c = pts.mean(axis=0)
    mean_dist = np.mean(np.linalg.norm(pts - c, axis=1))
    if mean_dist <= 1e-12:
        raise DegenerateInputError("points are coincident")
    s = math.sqrt(2.0) / mean_dist
    return np.array([[s, 0.0, -s * c[0]], [0.0, s, -s * c[1]], [0.0, 0.0, 1.0]])


def estimate_homography(matches: MatchSet, ground_only: bool = True) -> Homography:
    """Normalized DLT for x_j ~ H x_i."""
    m = matches.ground_only() if ground_only else matches
    if len(m) < 4:
        raise DegenerateInputError(f"need at least 4 ground-plane matches, got {len(m)}")
    t1, t2 = _hartley(m.pts_i), _hartley(m.pts_j)
    a = np.column_stack([m.pts_i, np.ones(len(m))]) @ t1.T
    b = np.column_stack([m.pts_j, np.ones(len(m))]) @ t2.T
    rows = []
    for (x, y, w), (u, v, s) in zip(a, b):
        rows.append([0, 0, 0, -s * x, -s * y, -s * w, v * x, v * y, v * w])
        rows.append([s * x, s * y, s * w, 0, 0, 0, -u * x, -u * y, -u * w])
    _, sv, vt = np.linalg.svd(np.asarray(rows))
    if sv[7] <= 1e-10 * sv[0]:
        raise DegenerateInputError("degenerate configuration: homography not determined")
    hn = vt[-1].reshape(3, 3)
    h = np.linalg.inv(t2) @ hn @ t1
    fwd = _transfer(h, m.pts_i, m.pts_j)
    back = _transfer(np.linalg.inv(h), m.pts_j, m.pts_i)
    err = float(np.sqrt(np.mean(fwd**2 + back**2)))
    return Homography(h, err)


def ransac_homography(matches: MatchSet, threshold: float = 2.0, iterations: int = 500,
                      seed: int = 0, ground_only: bool = True) -> tuple[Homography, np.ndarray]:
    """Four-point RANSAC on symmetric transfer error, refit by DLT on the inliers."""
    m = matches.ground_only() if ground_only else matches
    n = len(m)
    if n < 4:
        raise DegenerateInputError(f"need at least 4 ground-plane matches, got {n}")
    t1, t2 = _hartley(m.pts_i), _hartley(m.pts_j)
    a = np.column_stack([m.pts_i, np.ones(n)]) @ t1.T
    b = np.column_stack([m.pts_j, np.ones(n)]) @ t2.T
    rng = np.random.default_rng(seed)
    idx = np.argsort(rng.random((iterations, n)), axis=1)[:, :4]
    sa, sb = a[idx], b[idx]
    z = np.zeros_like(sa)
    r1 = np.concatenate([z, -sb[..., 2:3] * sa, sb[..., 1:2] * sa], axis=2)
    r2 = np.concatenate([sb[..., 2:3] * sa, z, -sb[..., 0:1] * sa], axis=2)
    rows = np.concatenate([r1, r2], axis=1)
    _, _, vt = np.linalg.svd(rows)
    hs = np.linalg.inv(t2) @ vt[:, -1].reshape(-1, 3, 3) @ t1
    src = np.column_stack([m.pts_i, np.ones(n)])
    proj = src @ hs.transpose(0, 2, 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        err = np.linalg.norm(proj[..., :2] / proj[..., 2:3] - m.pts_j, axis=2)
    support = np.nan_to_num(err, nan=np.inf) <= threshold
    best = int(np.argmax(support.sum(axis=1)))
    inliers = support[best]
    if inliers.sum() < 4:
        raise EstimationError("homography RANSAC found fewer than 4 inliers")
    for _ in range(3):
        h = estimate_homography(m.subset(inliers), ground_only=False)
        fwd = _transfer(h.matrix, m.pts_i, m.pts_j)
        grown = np.nan_to_num(fwd, nan=np.inf) <= threshold
        if grown.sum() < 4 or np.array_equal(grown, inliers):
            break
        inliers = grown
    return estimate_homography(m.subset(inliers), ground_only=False), inliers


def _transfer(h, src, dst):
    x = np.column_stack([src, np.ones(len(src))]) @ h.T
    return np.linalg.norm(x[:, :2] / x[:, 2:3] - dst, axis=1)


def char_poly_roots(m: np.ndarray) -> tuple[np.ndarray, float]:
    """Roots and discriminant of det(lambda I - m) for a 3x3 matrix."""
    tr = np.trace(m)
    minors = (m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
              + m[0, 0] * m[2, 2] - m[0, 2] * m[2, 0]
              + m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1])
    det = np.linalg.det(m)
    a, b, c, d = 1.0, -tr, minors, -det
    disc = 18 * a * b * c * d - 4 * b**3 * d + b * b * c * c - 4 * a * c**3 - 27 * a * a * d * d
    return np.roots([a, b, c, d]), float(disc)


def horizon_from_homography(h: Homography, min_imag: float = 1e-5) -> HomLine:
    """Fixed line of a planar-motion homography: eigenvector of H^T for its isolated real eigenvalue.

    Raises HorizonNotIdentifiableError when all three eigenvalues are real
    (no rotation) or the complex pair is too close to the real axis.
    """
    ht = h.matrix.T
    roots, disc = char_poly_roots(ht)
    mag = np.abs(roots).max()
    imag = np.abs(roots.imag) / mag
    if disc >= 0 or np.sort(imag)[-1] <= min_imag:
        raise HorizonNotIdentifiableError(
            "rotation-free pair, horizon not identifiable from this pair"
            f" (discriminant {disc:.3g}, max |Im| {imag.max():.3g})")
    lam = float(roots[np.argmin(imag)].real)
    _, _, vt = np.linalg.svd(ht - lam * np.eye(3))
    return HomLine(vt[-1])


def horizon_angular_error(est: HomLine, truth: HomLine, k: CalibrationMatrix) -> float:
    """Angle between the planes through the camera centre that the two lines back-project to."""
    a = k.matrix.T @ est.vec
    b = k.matrix.T @ truth.vec
    a, b = a / np.linalg.norm(a), b / np.linalg.norm(b)
    return math.atan2(float(np.linalg.norm(np.cross(a, b))), abs(float(a @ b)))


def _similarity_normalizer(pairs: list[MatchSet]) -> np.ndarray:
    pts = np.vstack([np.vstack([m.pts_i, m.pts_j]) for m in pairs])
    c = pts.mean(axis=0)
    s = math.sqrt(2.0) / max(float(np.mean(np.linalg.norm(pts - c, axis=1))), 1e-12)
    return np.array([[s, 0.0, -s * c[0]], [0.0, s, -s * c[1]], [0.0, 0.0, 1.0]])


def sequence_horizon(pairs: list[MatchSet], robust: bool = True, threshold: float = 2.0,
                     seed: int = 0, iterations: int = 20) -> HomLine:
    """Single fixed line shared by every pair that identifies it.

    Each usable pair contributes ``H^T / lam - I`` (normalised coordinates,
    lam its real eigenvalue), whose null vector is the horizon.  The stacked
    rows are solved jointly, so pairs with little rotation, whose matrices are
    close to zero, carry little weight; Cauchy reweighting on the per-pair
    residual then suppresses pairs whose homography went wrong.  With
    ``robust`` each homography comes from RANSAC.
    """
    pairs = [m for m in pairs if len(m) >= 4]
    if not pairs:
        raise HorizonNotIdentifiableError("no frame pair identifies the horizon")
    t = _similarity_normalizer(pairs)
    t_inv = np.linalg.inv(t)
    blocks = []
    for m in pairs:
        try:
            h = ransac_homography(m, threshold, seed=seed + 7919 * m.i + m.j)[0] if robust \
                else estimate_homography(m)
            horizon_from_homography(h)
        except (EstimationError, DegenerateInputError):
            continue
        hn = t @ h.matrix @ t_inv
        roots, _ = char_poly_roots(hn.T)
        lam = float(roots[np.argmin(np.abs(roots.imag))].real)
        blocks.append(hn.T / lam - np.eye(3))
    if not blocks:
        raise HorizonNotIdentifiableError("no frame pair identifies the horizon")
    blocks = np.array(blocks)
    w = np.ones(len(blocks))
    for _ in range(iterations):
        l = np.linalg.svd((blocks * w[:, None, None]).reshape(-1, 3))[2][-1]
        r = np.linalg.norm(blocks @ l, axis=1)
        scale = 1.4826 * float(np.median(r)) + 1e-15
        w = 1.0 / np.sqrt(1.0 + (r / (3.0 * scale)) ** 2)
    return HomLine(t.T @ l)


# ---------------------------------------------------------------- rotation

@dataclass(frozen=True)
class RotationEstimate:
    theta: float
    support: int
    method: str
    inliers: np.ndarray | None = field(default=None, repr=False, compare=False)
    anchors: tuple[int, int] | None = None

    @property
    def degrees(self) -> float:
        return math.degrees(self.theta)


def _hom(pts: np.ndarray) -> np.ndarray:
    return np.column_stack([pts, np.ones(len(pts))])


def _segment_dirs(p: np.ndarray, q: np.ndarray, c: np.ndarray, horizon: np.ndarray) -> np.ndarray:
    """Directions at the conformal point c for the oriented segments p -> q (arrays (N, 2)).

    The vanishing point V of line pq is kept homogeneous; the ray c -> V is
    flipped when q lies on the far side of p from V.
    """
    lines = np.cross(_hom(p), _hom(q))
    v = np.cross(lines, horizon)
    sw = np.where(v[:, 2] < 0, -1.0, 1.0)[:, None]
    toward_v = sw * (v[:, :2] - v[:, 2:3] * c)
    from_p = sw * (v[:, :2] - v[:, 2:3] * p)
    s = np.sign(np.einsum("ij,ij->i", q - p, from_p))[:, None]
    out = s * toward_v
    bad = (np.linalg.norm(lines[:, :2], axis=1) == 0) | (s[:, 0] == 0)
    out[bad] = np.nan
    return out


def _signed_angles(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.arctan2(u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0], np.einsum("ij,ij->i", u, v))


def pair_rotations(a, b, a2, b2, cp: ConformalPoint) -> np.ndarray:
    """Vectorized two-point rotation; NaN where a segment is degenerate."""
    a, b, a2, b2 = (np.atleast_2d(np.asarray(x, dtype=float)) for x in (a, b, a2, b2))
    c = cp.xy
    hz = canonical(cp.horizon.vec)
    u = _segment_dirs(a, b, c, hz)
    v = _segment_dirs(a2, b2, c, hz)
    # raster y points down, so the below branch already reads platform rotation counterclockwise-positive
    return cp.orientation * _signed_angles(u, v)


def two_point_rotation(a: HomPoint, b: HomPoint, a2: HomPoint, b2: HomPoint, cp: ConformalPoint) -> RotationEstimate:
    """Platform rotation from one segment seen in two frames (counterclockwise from above is positive)."""
    for p, q in ((a, b), (a2, b2)):
        if p.same_as(q, 1e-12):
            raise DegenerateInputError("segment endpoints coincide")
        vp = np.cross(np.cross(p.vec, q.vec), cp.horizon.vec)
        if abs(vp[2]) <= 1e-12 * np.linalg.norm(vp):
            raise DegenerateInputError("direction at infinity, ill-conditioned: segment parallel to the horizon")
    th = pair_rotations(a.xy, b.xy, a2.xy, b2.xy, cp)[0]
    return RotationEstimate(float(th), 2, "two_point")


def _anchor_angles(m: MatchSet, anchor: int, cp: ConformalPoint) -> np.ndarray:
    n = len(m)
    rep = np.repeat
    return pair_rotations(rep(m.pts_i[anchor:anchor + 1], n, 0), m.pts_i,
                          rep(m.pts_j[anchor:anchor + 1], n, 0), m.pts_j, cp)


def _support_mask(theta: float, m: MatchSet, ia: int, ib: int, cp: ConformalPoint, tol: float):
    ta = _anchor_angles(m, ia, cp)
    tb = _anchor_angles(m, ib, cp)
    with np.errstate(invalid="ignore"):
        ok = (np.abs(wrap(ta - theta)) <= tol) & (np.abs(wrap(tb - theta)) <= tol)
    ok[[ia, ib]] = True
    return ok, ta, tb


def rotation_support(theta: float, matches: MatchSet, anchor_a: int, anchor_b: int,
                     cp: ConformalPoint, tol: float) -> int:
    """Matches D whose segments AD and BD both rotate by theta within tol (anchors included)."""
    ok, _, _ = _support_mask(theta, matches, anchor_a, anchor_b, cp, tol)
    return int(ok.sum())


def circular_mean(angles) -> float:
    a = np.asarray(angles, dtype=float)
    return float(math.atan2(np.sin(a).sum(), np.cos(a).sum()))


def circular_median(angles) -> float:
    """Median of angles unwrapped about their circular mean (linear-time selection)."""
    a = np.asarray(angles, dtype=float)
    a = a[np.isfinite(a)]
    if len(a) == 0:
        raise EstimationError("no angles to take the median of")
    ref = circular_mean(a)
    return wrap(ref + float(np.median(wrap(a - ref))))


def pairwise_rotation_matrix(matches: MatchSet, cp: ConformalPoint) -> np.ndarray:
    """T[a, b] = two-point rotation from segment a -> b; NaN on the diagonal."""
    n = len(matches)
    ia = np.repeat(np.arange(n), n)
    ib = np.tile(np.arange(n), n)
    with np.errstate(invalid="ignore", divide="ignore"):
        t = pair_rotations(matches.pts_i[ia], matches.pts_i[ib], matches.pts_j[ia], matches.pts_j[ib], cp)
    return t.reshape(n, n)


def ransac_rotation(matches: MatchSet, cp: ConformalPoint, tol: float = math.radians(0.5),
                    iterations: int = 200, seed: int = 0, min_support: int = 3) -> RotationEstimate:
    """Two-point RANSAC; the winner is refined by the circular mean of its inliers' anchor estimates."""
    n = len(matches)
    if n < 2:
        raise EstimationError("two-point RANSAC needs at least two matches")
    rng = np.random.default_rng(seed)
    samples = np.array([rng.choice(n, 2, replace=False) for _ in range(iterations)]).reshape(-1, 2)
    table = pairwise_rotation_matrix(matches, cp)
    ia, ib = samples[:, 0], samples[:, 1]
    theta = table[ia, ib]
    with np.errstate(invalid="ignore"):
        ok = (np.abs(wrap(table[ia] - theta[:, None])) <= tol) & (np.abs(wrap(table[ib] - theta[:, None])) <= tol)
    rows = np.arange(len(samples))
    ok[rows, ia] = True
    ok[rows, ib] = True
    counts = np.where(np.isfinite(theta), ok.sum(axis=1), -1)
    if len(counts) == 0 or counts.max() < min_support:
        best = int(counts.max()) if len(counts) else 0
        raise EstimationError(f"no rotation hypothesis reached support {min_support} (best {max(best, 0)})")
    w = int(np.argmax(counts))
    a, b, th, inl = int(ia[w]), int(ib[w]), float(theta[w]), ok[w].copy()
    others = inl.copy()
    others[[a, b]] = False
    refined = circular_mean(np.concatenate([[th], table[a, others], table[b, others]]))
    return RotationEstimate(refined, int(counts[w]), "ransac", inl, (a, b))


def median_rotation(matches: MatchSet, cp: ConformalPoint, seed: int = 0) -> RotationEstimate:
    """Circular median over disjoint pairs (1,2), (3,4), ... after a seeded shuffle."""
    n = len(matches)
    if n < 2:
        raise EstimationError("median rotation needs at least two matches")
    order = np.random.default_rng(seed).permutation(n)
    ia, ib = order[0:n - 1:2], order[1:n:2]
    est = pair_rotations(matches.pts_i[ia], matches.pts_i[ib], matches.pts_j[ia], matches.pts_j[ib], cp)
    est = est[np.isfinite(est)]
    if len(est) == 0:
        raise EstimationError("no valid two-point estimate")
    return RotationEstimate(circular_median(est), 2 * len(est), "median")


# ---------------------------------------------------------------- averaging

def _components(n: int, edges) -> list[list[int]]:
    if n == 0:
        return []
    rows = [e[0] for e in edges]
    cols = [e[1] for e in edges]
    g = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    k, labels = connected_components(g, directed=False)
    return [np.flatnonzero(labels == c).tolist() for c in range(k)]


def average_rotations(pairwise, n_frames: int | None = None) -> np.ndarray:
    """Absolute headings from relative ones, frame 0 pinned at zero.

    ``pairwise`` holds (i, j, theta_ij, weight) with theta_ij = heading_j - heading_i.
    Solves the linear least-squares problem on unit complex numbers
    z_j = exp(i theta_ij) z_i, then projects back to the circle.
    """
    pairwise = list(pairwise)
    if n_frames is None:
        n_frames = 1 + max((max(i, j) for i, j, *_ in pairwise), default=-1)
    if n_frames == 0:
        return np.zeros(0)
    comps = _components(n_frames, pairwise)
    if len(comps) > 1:
        raise EstimationError(f"pair graph is disconnected; components: {comps}")
    a = np.zeros((len(pairwise), n_frames), dtype=complex)
    for r, (i, j, th, w) in enumerate(pairwise):
        sw = math.sqrt(w)
        a[r, j] += sw
        a[r, i] -= sw * complex(math.cos(th), math.sin(th))
    if n_frames == 1:
        return np.zeros(1)
    z, *_ = np.linalg.lstsq(a[:, 1:], -a[:, 0], rcond=None)
    z = np.concatenate([[1.0 + 0j], z])
    if np.any(np.abs(z) < 1e-12):
        raise EstimationError("rotation averaging collapsed (vanishing solution)")
    return np.angle(z)


# ---------------------------------------------------------------- translation

def ground_plane_frame(k: CalibrationMatrix, horizon: HomLine, cp: ConformalPoint):
    """Rectification image -> ground (forward, left) with the camera at height 1."""
    l = horizon.vec
    n = k.matrix.T @ l
    n = n / np.linalg.norm(n)
    # sign of l . x on the ground side of the horizon
    probe = np.array([*(cp.xy if cp.branch == "below" else cp.mirror().xy), 1.0])
    if (l @ probe) > 0:
        n = -n
    fwd = np.array([0.0, 0.0, 1.0]) - n[2] * n
    if np.linalg.norm(fwd) < 1e-12:
        raise DegenerateInputError("camera looks straight down; forward direction undefined")
    fwd /= np.linalg.norm(fwd)
    left = np.cross(n, fwd)
    kinv = k.inverse

    def rectify(pts: np.ndarray) -> np.ndarray:
        """Ground coordinates; NaN for points on the sky side of the horizon."""
        r = _hom(np.atleast_2d(pts)) @ kinv.T
        depth = -(r @ n)
        with np.errstate(divide="ignore", invalid="ignore"):
            x = r / np.where(depth > 0, depth, np.nan)[:, None]
        return np.column_stack([x @ fwd, x @ left])

    return rectify


def recover_translation(matches: MatchSet, theta: float, cp: ConformalPoint,
                        k: CalibrationMatrix, horizon: HomLine) -> np.ndarray:
    """Least-squares platform translation (forward, left) of frame j in frame i, camera-height units."""
    m = matches.ground_only()
    if len(m) == 0:
        raise EstimationError("no ground-plane matches for translation")
    rect = ground_plane_frame(k, horizon, cp)
    qi, qj = rect(m.pts_i), rect(m.pts_j)
    c, s = math.cos(theta), math.sin(theta)
    rot = np.array([[c, -s], [s, c]])
    resid = qi - qj @ rot.T
    good = np.all(np.isfinite(resid), axis=1)
    if not good.any():
        raise EstimationError("no match lies on the ground side of the horizon in both frames")
    # pixel noise maps to ground error growing with range squared
    var = 1.0 + np.sum(qi[good] ** 2, axis=1) ** 2 + np.sum(qj[good] ** 2, axis=1) ** 2
    w = 1.0 / var
    return (resid[good] * w[:, None]).sum(axis=0) / w.sum()


# ---------------------------------------------------------------- sequences

@dataclass
class OdometryConfig:
    estimator: str = "ransac"
    tol: float = math.radians(0.5)
    iterations: int = 200
    seed: int = 0
    min_support: int = 3
    on_failure: str = "interpolate"

    def __post_init__(self):
        if self.estimator not in ("ransac", "median"):
            raise ValueError(f"unknown estimator {self.estimator!r}")
        if self.on_failure not in ("interpolate", "drop"):
            raise ValueError(f"unknown failure policy {self.on_failure!r}")


@dataclass
class PlanarTrajectory:
    headings: np.ndarray
    positions: np.ndarray
    diagnostics: list[dict] = field(default_factory=list)

    def __len__(self):
        return len(self.headings)

    def to_json(self) -> dict:
        frames = [
            {"frame": f, "theta_deg": round(math.degrees(float(self.headings[f])), 12),
             "tx": round(float(self.positions[f, 0]), 12), "ty": round(float(self.positions[f, 1]), 12)}
            for f in range(len(self.headings))
        ]
        return {"trajectory": frames, "pairs": self.diagnostics}


def _estimate_pair(m: MatchSet, cp, k, horizon, cfg: OdometryConfig):
    if cfg.estimator == "ransac":
        est = ransac_rotation(m, cp, cfg.tol, cfg.iterations, cfg.seed + 7919 * m.i + m.j, cfg.min_support)
        used = m.subset(est.inliers)
    else:
        seed = cfg.seed + 7919 * m.i + m.j
        est = median_rotation(m, cp, seed)
        used = m.subset(_consistent_with(est.theta, m, cp, cfg.tol, seed))
    t = recover_translation(used, est.theta, cp, k, horizon)
    return est, t, len(used)


def _consistent_with(theta, m: MatchSet, cp, tol, seed: int) -> np.ndarray:
    """Largest support set among disjoint pairs whose own estimate is closest to theta."""
    n = len(m)
    order = np.random.default_rng(seed).permutation(n)
    ia, ib = order[0:n - 1:2], order[1:n:2]
    est = pair_rotations(m.pts_i[ia], m.pts_i[ib], m.pts_j[ia], m.pts_j[ib], cp)
    with np.errstate(invalid="ignore"):
        rank = np.argsort(np.nan_to_num(np.abs(wrap(est - theta)), nan=np.inf))[:20]
    best = np.ones(n, dtype=bool)
    best_count = -1
    for r in rank:
        ok, _, _ = _support_mask(theta, m, int(ia[r]), int(ib[r]), cp, tol)
        if ok.sum() > best_count:
            best, best_count = ok, int(ok.sum())
    return best


def run_sequence(pairs: list[MatchSet], n_frames: int, k: CalibrationMatrix, horizon: HomLine,
                 cp: ConformalPoint, config: OdometryConfig | None = None) -> PlanarTrajectory:
    cfg = config or OdometryConfig()
    if n_frames == 0:
        return PlanarTrajectory(np.zeros(0), np.zeros((0, 2)), [])
    results = {}
    diags = []
    for m in pairs:
        d = {"i": int(m.i), "j": int(m.j), "matches": len(m)}
        try:
            est, t, used = _estimate_pair(m, cp, k, horizon, cfg)
        except (EstimationError, DegenerateInputError) as exc:
            log.warning("pair %d-%d failed: %s", m.i, m.j, exc)
            d.update(status="failed", reason=str(exc))
            diags.append(d)
            continue
        results[(m.i, m.j)] = (est.theta, t, max(est.support, 1))
        d.update(status="ok", theta_deg=round(est.degrees, 12), support=int(est.support),
                 inlier_ratio=round(used / max(len(m), 1), 12),
                 t=[round(float(x), 12) for x in t])
        diags.append(d)
    if cfg.on_failure == "interpolate":
        _interpolate_failures(pairs, results, diags)
    edges = [(i, j, th, w) for (i, j), (th, _, w) in results.items()]
    headings = average_rotations(edges, n_frames)
    positions = _chain_positions(n_frames, results, headings)
    return PlanarTrajectory(headings, positions, diags)


def _interpolate_failures(pairs, results, diags):
    ok_keys = sorted(results)
    for d in diags:
        if d["status"] != "failed" or not ok_keys:
            continue
        key = (d["i"], d["j"])
        before = [x for x in ok_keys if x[0] <= key[0]]
        after = [x for x in ok_keys if x[0] >= key[0]]
        near = [results[x] for x in (before[-1:] + after[:1])]
        th = circular_mean([r[0] for r in near])
        t = np.mean([r[1] for r in near], axis=0)
        results[key] = (th, t, 1)
        d["status"] = "interpolated"


def _chain_positions(n: int, results, headings) -> np.ndarray:
    """Positions solving c_j - c_i = R(heading_i) t_ij over all pairs, frame 0 at the origin."""
    if n <= 1:
        return np.zeros((n, 2))
    rows, rhs, wts = [], [], []
    for (i, j), (_, t, w) in sorted(results.items()):
        c, s = math.cos(headings[i]), math.sin(headings[i])
        rows.append((i, j))
        rhs.append(np.array([[c, -s], [s, c]]) @ np.asarray(t))
        wts.append(math.sqrt(w))
    a = np.zeros((len(rows), n))
    for r, (i, j) in enumerate(rows):
        a[r, j] += wts[r]
        a[r, i] -= wts[r]
    b = np.array(rhs) * np.array(wts)[:, None]
    sol, *_ = np.linalg.lstsq(a[:, 1:], b, rcond=None)
    return np.vstack([np.zeros((1, 2)), sol])
