import math

import numpy as np
import pytest

from conicpoint.calibration import CalibrationMatrix
from conicpoint.conformal import conformal_point_from_k
from conicpoint.errors import DegenerateInputError, EstimationError, HorizonNotIdentifiableError
from conicpoint.matches import MatchSet
from conicpoint.odometry import (
    Homography,
    OdometryConfig,
    average_rotations,
    circular_median,
    estimate_homography,
    horizon_angular_error,
    horizon_from_homography,
    median_rotation,
    pair_rotations,
    ransac_homography,
    ransac_rotation,
    recover_translation,
    rotation_support,
    run_sequence,
    sequence_horizon,
    two_point_rotation,
    wrap,
)
from conicpoint.projective import HomLine, HomPoint
from conicpoint.synth import PlanarMotionSpec, generate_sequence, rot_z, true_horizon

K = CalibrationMatrix.square(500.0, 320.0, 240.0)
DEG = math.pi / 180


def two_frame(theta_deg, t=(0.4, 0.1), heading0_deg=12.0, pitch_deg=20.0, height=1.5):
    h0 = heading0_deg * DEG
    p0 = np.array([2.0, -1.0])
    p1 = p0 + rot_z(h0)[:2, :2] @ np.asarray(t, float)
    return PlanarMotionSpec(K, [h0, h0 + theta_deg * DEG], [p0, p1], height, pitch_deg * DEG)


def pair(theta_deg, noise=0.0, outliers=0.0, seed=0, n=100, **kw):
    spec = two_frame(theta_deg, **kw)
    seq = generate_sequence(spec, None, noise, outliers, seed, n)
    cam = spec.camera(0)
    h = true_horizon(cam)
    return spec, seq.pairs[0], h, conformal_point_from_k(h, K), seq.inliers[0]


# ------------------------------------------------------------ homography

def test_homography_square_corners(rng):
    h_true = np.array([[1.2, 0.1, 5], [-0.2, 0.9, 3], [1e-3, 2e-3, 1]])
    src = np.array([[0, 0], [100, 0], [100, 100], [0, 100]], float)
    dst = Homography(h_true).apply(src)
    h = estimate_homography(MatchSet(0, 1, src, dst))
    assert np.abs(h.matrix - Homography(h_true).matrix).max() < 1e-9
    assert h.transfer_error < 1e-9


def test_homography_identity(rng):
    pts = rng.uniform(0, 640, (20, 2))
    h = estimate_homography(MatchSet(0, 1, pts, pts))
    assert np.abs(h.matrix - Homography(np.eye(3)).matrix).max() < 1e-12
    assert np.isclose(np.linalg.norm(h.matrix), 1)


def test_homography_synthetic_composition():
    spec, m, *_ = pair(10.0, n=50)
    hi, hj = spec.camera(0).ground_plane_map(), spec.camera(1).ground_plane_map()
    h = estimate_homography(m)
    assert np.abs(h.matrix - Homography(hj @ np.linalg.inv(hi)).matrix).max() < 1e-9
    assert h.transfer_error < 1e-9
    assert h.condition > 1


def test_homography_degenerate():
    with pytest.raises(DegenerateInputError):
        estimate_homography(MatchSet(0, 1, np.zeros((3, 2)), np.zeros((3, 2))))
    line = np.column_stack([np.arange(10.0), 2 * np.arange(10.0)])
    with pytest.raises(DegenerateInputError):
        estimate_homography(MatchSet(0, 1, line, line + 1))


def test_homography_uses_ground_points_only(rng):
    spec, m, *_ = pair(10.0, n=50)
    flags = np.ones(len(m), bool)
    flags[:5] = False
    pts_j = m.pts_j.copy()
    pts_j[:5] += 50
    h = estimate_homography(MatchSet(0, 1, m.pts_i, pts_j, flags))
    assert h.transfer_error < 1e-9


def test_ransac_homography_rejects_outliers():
    spec, m, h_true, cp, inl = pair(15.0, noise=0.5, outliers=0.3, seed=3)
    h, mask = ransac_homography(m, seed=1)
    assert mask[inl].mean() > 0.95 and mask[~inl].mean() < 0.1
    l = horizon_from_homography(h)
    assert horizon_angular_error(l, h_true, K) < 0.5 * DEG


# ------------------------------------------------------------ horizon

@pytest.mark.parametrize("theta", [2.0, 10.0, 30.0, -17.0])
def test_horizon_noiseless(theta):
    spec, m, h_true, *_ = pair(theta)
    hom = estimate_homography(m)
    l = horizon_from_homography(hom)
    assert horizon_angular_error(l, h_true, K) < 1e-6
    v = l.vec / np.linalg.norm(l.vec)
    w = hom.matrix.T @ v
    lam = w @ v
    assert np.linalg.norm(w - lam * v) < 1e-9 * np.linalg.norm(hom.matrix)


def test_horizon_pure_translation_rejected():
    spec, m, *_ = pair(0.0)
    with pytest.raises(HorizonNotIdentifiableError, match="rotation-free pair"):
        horizon_from_homography(estimate_homography(m))


def test_horizon_conjugated_rotation():
    cam = two_frame(0.0).camera(0)
    r = cam.rotation @ rot_z(0.3) @ cam.rotation.T
    h = Homography(K.matrix @ r @ K.inverse)
    l = horizon_from_homography(h)
    assert horizon_angular_error(l, true_horizon(cam), K) < 1e-9


def test_sequence_horizon_aggregates():
    spec = PlanarMotionSpec(K, np.radians([0, 8, 20, 20, 35]), [[0, 0], [0.3, 0], [0.6, 0.1], [0.9, 0.2], [1.1, 0.4]])
    seq = generate_sequence(spec, None, 0.5, 0.2, 4)
    l = sequence_horizon(seq.pairs)
    assert horizon_angular_error(l, true_horizon(spec.camera(0)), K) < 0.5 * DEG
    clean = generate_sequence(spec, None, seed=4)
    with pytest.raises(HorizonNotIdentifiableError):
        sequence_horizon([p for p in clean.pairs if p.i == 2])


# ------------------------------------------------------------ two-point rotation

def test_two_point_no_motion():
    _, m, _, cp, _ = pair(10.0)
    a, b = HomPoint.from_xy(*m.pts_i[0]), HomPoint.from_xy(*m.pts_i[1])
    assert two_point_rotation(a, b, a, b, cp).theta == 0.0


@pytest.mark.parametrize("t", [(0.0, 0.0), (0.5, 0.2), (3.0, -2.0), (-1.0, 4.0)])
def test_two_point_exact(t):
    for theta in (10.0, -25.0):
        _, m, _, cp, _ = pair(theta, t=t)
        for br in (cp, cp.mirror()):
            est = pair_rotations(m.pts_i[:-1], m.pts_i[1:], m.pts_j[:-1], m.pts_j[1:], br)
            assert np.abs(np.degrees(est) - theta).max() < 1e-7
        a, b, a2, b2 = (HomPoint.from_xy(*p) for p in (m.pts_i[0], m.pts_i[1], m.pts_j[0], m.pts_j[1]))
        assert abs(two_point_rotation(a, b, a2, b2, cp).degrees - theta) < 1e-7


def test_two_point_pure_translation():
    _, m, _, cp, _ = pair(0.0, t=(0.6, -0.3))
    est = pair_rotations(m.pts_i[:-1], m.pts_i[1:], m.pts_j[:-1], m.pts_j[1:], cp)
    assert np.abs(np.degrees(est)).max() < 1e-7


def test_two_point_errors():
    _, m, h, cp, _ = pair(10.0)
    a = HomPoint.from_xy(*m.pts_i[0])
    b = HomPoint.from_xy(*m.pts_i[1])
    with pytest.raises(DegenerateInputError):
        two_point_rotation(a, a, a, b, cp)
    # segment parallel to the horizon
    d = h.direction
    c = HomPoint.from_xy(*(a.xy + 30 * d))
    with pytest.raises(DegenerateInputError, match="direction at infinity"):
        two_point_rotation(a, c, a, b, cp)


def test_rotation_composability():
    spec = PlanarMotionSpec(K, np.radians([5, 12, 31]), [[0, 0], [0.4, 0.1], [0.7, 0.4]])
    seq = generate_sequence(spec, None, pairs=[(0, 1), (1, 2), (0, 2)], seed=2)
    cp = conformal_point_from_k(true_horizon(spec.camera(0)), K)
    th = {(m.i, m.j): ransac_rotation(m, cp).theta for m in seq.pairs}
    assert abs(wrap(th[(0, 1)] + th[(1, 2)] - th[(0, 2)])) < 1e-9


def test_off_plane_bias_diagnostic():
    """Off-plane points: exact under pure rotation, biased under translation (measured, not asserted exact)."""
    rng = np.random.default_rng(8)
    spec_t = two_frame(10.0, t=(0.8, 0.3))
    spec_r = two_frame(10.0, t=(0.0, 0.0))
    cp = conformal_point_from_k(true_horizon(spec_t.camera(0)), K)
    pts = np.column_stack([rng.uniform(4, 15, 80), rng.uniform(-4, 4, 80), rng.uniform(0.3, 1.2, 80)])
    pts[:, :2] = spec_t.positions[0] + pts[:, :2] @ rot_z(spec_t.headings[0])[:2, :2].T
    bias = {}
    for name, spec in (("translate", spec_t), ("rotate", spec_r)):
        seq = generate_sequence(spec, pts, seed=1)
        m = seq.pairs[0]
        est = pair_rotations(m.pts_i[:-1], m.pts_i[1:], m.pts_j[:-1], m.pts_j[1:], cp)
        bias[name] = np.nanmedian(np.abs(np.degrees(est) - 10.0))
    assert bias["rotate"] < 1e-7
    assert bias["translate"] > 1e-3


# ------------------------------------------------------------ support and robust estimators

def test_rotation_support():
    _, m, _, cp, _ = pair(10.0)
    assert rotation_support(10 * DEG, m, 0, 1, cp, 0.5 * DEG) == len(m)
    # exact inliers, 30% uniform outliers: support is the inlier set
    _, m, _, cp, inl = pair(10.0, outliers=0.3, seed=5)
    a, b = np.flatnonzero(inl)[:2]
    assert rotation_support(10 * DEG, m, int(a), int(b), cp, 0.5 * DEG) == inl.sum()
    assert abs(inl.mean() - 0.7) < 0.02
    _, m, _, cp, inl = pair(10.0, noise=0.5, outliers=0.3, seed=5)
    assert rotation_support(10 * DEG, m, 0, 1, cp, 0.0) == 2
    counts = [rotation_support(10 * DEG, m, 3, 7, cp, t * DEG) for t in (0, 0.1, 0.5, 1, 5, 90)]
    assert counts == sorted(counts)


def test_ransac_noiseless_and_deterministic():
    _, m, _, cp, _ = pair(-13.0)
    est = ransac_rotation(m, cp, seed=4)
    assert abs(est.degrees + 13.0) < 1e-9 and est.support == len(m) and est.method == "ransac"
    _, m, _, cp, _ = pair(10.0, noise=0.5, outliers=0.3, seed=9)
    a, b = ransac_rotation(m, cp, seed=11), ransac_rotation(m, cp, seed=11)
    assert a.theta == b.theta and np.array_equal(a.inliers, b.inliers)
    assert a.support <= len(m)


def test_ransac_contaminated():
    _, m, _, cp, inl = pair(10.0, noise=0.5, outliers=0.3, seed=21)
    est = ransac_rotation(m, cp, 0.5 * DEG, 200, seed=0)
    assert abs(est.degrees - 10.0) < 0.5
    assert est.inliers[~inl].mean() < 0.1


def test_ransac_all_outliers():
    rng = np.random.default_rng(0)
    _, m, _, cp, _ = pair(10.0)
    junk = MatchSet(0, 1, m.pts_i, rng.uniform((0, 0), (640, 480), m.pts_j.shape))
    with pytest.raises(EstimationError):
        ransac_rotation(junk, cp, 0.01 * DEG, 200, min_support=10)
    with pytest.raises(EstimationError):
        ransac_rotation(MatchSet(0, 1, m.pts_i[:1], m.pts_j[:1]), cp)


def test_median_rotation():
    _, m, _, cp, _ = pair(10.0)
    assert abs(median_rotation(m, cp).degrees - 10) < 1e-9
    one = MatchSet(0, 1, m.pts_i[:2], m.pts_j[:2])
    direct = pair_rotations(m.pts_i[:1], m.pts_i[1:2], m.pts_j[:1], m.pts_j[1:2], cp)[0]
    assert abs(median_rotation(one, cp).theta - direct) < 1e-12
    errs = []
    for seed in range(20):
        _, m, _, cp, _ = pair(10.0, noise=0.5, seed=seed)
        errs.append(abs(median_rotation(m, cp, seed).degrees - 10))
    # spread of single two-point estimates at this noise level
    _, m, _, cp, _ = pair(10.0, noise=0.5, seed=99)
    single = np.abs(np.degrees(pair_rotations(m.pts_i[:-1:2], m.pts_i[1::2], m.pts_j[:-1:2], m.pts_j[1::2], cp)) - 10)
    assert max(errs) < np.quantile(single, 0.5)
    with pytest.raises(EstimationError):
        median_rotation(MatchSet(0, 1, m.pts_i[:1], m.pts_j[:1]), cp)


def test_median_breakdown_49_percent():
    rng = np.random.default_rng(1)
    good = 0.3 + rng.normal(0, 0.002, 51)
    bad = np.full(49, -1.2)
    assert abs(circular_median(np.concatenate([good, bad])) - 0.3) < 0.01
    # wrap-around near +-pi
    assert abs(wrap(circular_median([math.pi - 0.01, -math.pi + 0.01, math.pi - 0.005]) - (math.pi - 0.005))) < 1e-12


# ------------------------------------------------------------ averaging

def test_average_chain_and_redundant():
    edges = [(i, i + 1, 5 * DEG, 1.0) for i in range(9)]
    h = average_rotations(edges, 10)
    assert np.abs(np.degrees(h) - 5 * np.arange(10)).max() < 1e-10
    edges += [(i, i + 3, 15 * DEG, 2.0) for i in range(7)]
    h2 = average_rotations(edges, 10)
    assert np.abs(np.degrees(h2) - 5 * np.arange(10)).max() < 1e-10


def test_average_noisy_loop_rich():
    rng = np.random.default_rng(3)
    truth = np.cumsum(rng.normal(0, 0.1, 40))
    truth -= truth[0]
    edges = [(i, j, truth[j] - truth[i] + rng.normal(0, 0.5 * DEG), 1.0)
             for i in range(40) for j in range(i + 1, min(40, i + 6))]
    h = average_rotations(edges, 40)
    rmse = math.sqrt(np.mean(wrap(h - truth) ** 2))
    assert rmse < 0.5 * DEG


def test_average_disconnected():
    with pytest.raises(EstimationError, match=r"\[0, 1\], \[2, 3\]"):
        average_rotations([(0, 1, 0.1, 1), (2, 3, 0.2, 1)], 4)
    assert average_rotations([], 0).size == 0


# ------------------------------------------------------------ translation

def test_translation_exact():
    spec, m, h, cp, _ = pair(0.0, t=(0.7, -0.2))
    t = recover_translation(m, 0.0, cp, K, h)
    assert np.abs(t - spec.relative_translation(0, 1)).max() < 1e-9
    spec, m, h, cp, _ = pair(12.0, t=(0.3, 0.25))
    t = recover_translation(m, 12 * DEG, cp, K, h)
    assert np.abs(t - spec.relative_translation(0, 1)).max() < 1e-9
    spec, m, h, cp, _ = pair(0.0, t=(0.0, 0.0))
    assert np.abs(recover_translation(m, 0.0, cp, K, h)).max() < 1e-12


def test_translation_noisy():
    spec, m, h, cp, _ = pair(8.0, t=(0.4, 0.1), noise=0.5, seed=6)
    t = recover_translation(m, 8 * DEG, cp, K, h)
    err = np.linalg.norm(t - spec.relative_translation(0, 1))
    assert err < 0.01  # camera-height units


def test_translation_needs_ground_points():
    _, m, h, cp, _ = pair(8.0)
    with pytest.raises(EstimationError):
        recover_translation(MatchSet(0, 1, m.pts_i, m.pts_j, np.zeros(len(m), bool)), 0.1, cp, K, h)


# ------------------------------------------------------------ sequence

def sinusoid(n=150):
    psi = 40 * DEG * np.sin(2 * np.pi * np.arange(n) / 75)
    pos = np.zeros((n, 2))
    for i in range(1, n):
        pos[i] = pos[i - 1] + 0.3 * np.array([math.cos(psi[i - 1]), math.sin(psi[i - 1])])
    return PlanarMotionSpec(K, psi, pos)


def test_sequence_noiseless():
    spec = sinusoid(150)
    seq = generate_sequence(spec, None, seed=0)
    h = true_horizon(spec.camera(0))
    traj = run_sequence(seq.pairs, 150, K, h, conformal_point_from_k(h, K))
    err = np.degrees(np.abs(wrap(traj.headings - (spec.headings - spec.headings[0]))))
    assert err.max() < 1e-6
    truth = rot_z(-spec.headings[0])[:2, :2] @ (spec.positions - spec.positions[0]).T / spec.height
    assert np.abs(traj.positions - truth.T).max() < 1e-6
    assert traj.headings[0] == 0 and np.all(traj.positions[0] == 0)
    doc = traj.to_json()
    assert len(doc["trajectory"]) == 150 and all(d["status"] == "ok" for d in doc["pairs"])


def test_sequence_median_agrees_on_clean_data():
    spec = sinusoid(20)
    seq = generate_sequence(spec, None, seed=0)
    h = true_horizon(spec.camera(0))
    cp = conformal_point_from_k(h, K)
    a = run_sequence(seq.pairs, 20, K, h, cp, OdometryConfig(estimator="median"))
    b = run_sequence(seq.pairs, 20, K, h, cp, OdometryConfig(estimator="ransac"))
    assert np.degrees(np.abs(a.headings - b.headings)).max() < 1e-6


def test_sequence_failed_pair_interpolated():
    spec = sinusoid(10)
    seq = generate_sequence(spec, None, seed=0)
    pairs = list(seq.pairs)
    rng = np.random.default_rng(0)
    bad = pairs[4]
    pairs[4] = MatchSet(bad.i, bad.j, bad.pts_i, rng.uniform((0, 0), (640, 480), bad.pts_j.shape))
    h = true_horizon(spec.camera(0))
    cfg = OdometryConfig(tol=0.01 * DEG, min_support=20)
    traj = run_sequence(pairs, 10, K, h, conformal_point_from_k(h, K), cfg)
    statuses = [d["status"] for d in traj.diagnostics]
    assert statuses[4] == "interpolated" and statuses.count("ok") == 8
    with pytest.raises(EstimationError, match="disconnected"):
        run_sequence(pairs, 10, K, h, conformal_point_from_k(h, K), OdometryConfig(tol=0.01 * DEG, min_support=20, on_failure="drop"))


def test_sequence_empty():
    h = HomLine([0, 1, -100])
    traj = run_sequence([], 0, K, h, conformal_point_from_k(h, K))
    assert len(traj) == 0 and traj.to_json() == {"trajectory": [], "pairs": []}


def test_config_validation():
    with pytest.raises(ValueError):
        OdometryConfig(estimator="mean")
