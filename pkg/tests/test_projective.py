import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conicpoint.errors import DegenerateInputError, GeometryError
from conicpoint.projective import (
    Conic,
    HomLine,
    HomPoint,
    canonical,
    conic_line_intersections,
    cross_ratio,
    foot_of_perpendicular,
    join,
    meet,
    perpendicular_through,
    polar,
    pole,
    signed_cross_ratio,
)

coord = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def close(a, b, tol=1e-9):
    return np.allclose(canonical(np.asarray(a, float)), canonical(np.asarray(b, float)), atol=tol)


def test_zero_vector_rejected():
    with pytest.raises(GeometryError):
        HomPoint([0, 0, 0])


def test_canonical_sign_and_norm():
    v = canonical(np.array([0.0, -3.0, 4.0]))
    assert np.isclose(np.linalg.norm(v), 1) and v[1] > 0


def test_points_at_infinity_are_valid():
    p = HomPoint.at_infinity(1, 0)
    assert not p.is_finite()
    with pytest.raises(GeometryError):
        p.xy


def test_join_examples():
    assert close(join(HomPoint([0, 0, 1]), HomPoint([1, 0, 1])).vec, [0, 1, 0])
    assert close(join(HomPoint([1, 0, 0]), HomPoint([0, 1, 0])).vec, [0, 0, 1])
    assert join(HomPoint([1, 0, 0]), HomPoint([0, 1, 0])).is_at_infinity()


def test_join_coincident_raises():
    with pytest.raises(DegenerateInputError):
        join(HomPoint([1, 2, 1]), HomPoint([2, 4, 2]))


def test_meet_examples():
    assert close(meet(HomLine([0, 1, 0]), HomLine([1, 0, 0])).vec, [0, 0, 1])
    assert close(meet(HomLine([0, 1, 0]), HomLine([0, 1, -1])).vec, [1, 0, 0])
    with pytest.raises(DegenerateInputError):
        meet(HomLine([1, 1, 1]), HomLine([-2, -2, -2]))


def test_random_incidence(rng):
    for _ in range(200):
        p, q = HomPoint(rng.normal(size=3)), HomPoint(rng.normal(size=3))
        l = join(p, q)
        assert abs(l.vec @ p.vec) < 1e-12 and abs(l.vec @ q.vec) < 1e-12
        m = HomLine(rng.normal(size=3))
        x = meet(l, m)
        assert abs(l.vec @ x.vec) < 1e-12 and abs(m.vec @ x.vec) < 1e-12


@settings(max_examples=200, deadline=None)
@given(st.lists(coord, min_size=6, max_size=6))
def test_join_meet_duality(c):
    p, q, r = HomPoint.from_xy(0.0, 0.0), HomPoint.from_xy(c[0], c[1]), HomPoint.from_xy(c[2], c[3])
    m = np.array([[0, 0, 1], [c[0], c[1], 1], [c[2], c[3], 1]])
    if abs(np.linalg.det(m)) < 1e-3 or np.hypot(c[0], c[1]) < 1e-3 or np.hypot(c[2], c[3]) < 1e-3:
        return
    assert meet(join(p, q), join(p, r)).same_as(p)


def test_cross_ratio_parameters():
    pts = [HomPoint.from_xy(t, 2 * t + 1) for t in (0, 1, 2, 3)]
    assert np.isclose(cross_ratio(*pts), 0.75, rtol=1e-12)


def test_cross_ratio_zero_numerator():
    # x2 coincides with x1' (second and third points equal): numerator vanishes
    a, b, d = (HomPoint.from_xy(t, 0) for t in (0, 1, 3))
    assert cross_ratio(a, b, b, d) == 0.0
    with pytest.raises(DegenerateInputError):
        cross_ratio(a, b, a, d)


def test_cross_ratio_non_collinear_raises():
    with pytest.raises(GeometryError):
        cross_ratio(*(HomPoint.from_xy(*p) for p in [(0, 0), (1, 0), (2, 1), (3, 0)]))


def test_cross_ratio_projective_invariance(rng):
    for _ in range(300):
        t = rng.uniform(-10, 10, 4)
        line_pts = [HomPoint([ti, 1.0 - 0.5 * ti, 1.0]) for ti in t]
        h = rng.normal(size=(3, 3))
        mapped = [HomPoint(h @ p.vec) for p in line_pts]
        a, b = cross_ratio(*line_pts), cross_ratio(*mapped)
        assert np.isclose(a, b, rtol=1e-9, atol=1e-12)
        assert np.isclose(abs(signed_cross_ratio(*line_pts)), a)


def test_polar_examples():
    unit = Conic.circle(0, 0, 1)
    assert close(polar(HomPoint([2, 0, 1]), unit).vec, [2, 0, -1])
    assert polar(HomPoint([0, 0, 1]), unit).is_at_infinity()


def test_polar_tangency_points_exterior():
    unit = Conic.circle(0, 0, 1)
    x = HomPoint.from_xy(2, 0)
    l = polar(x, unit)
    for t in conic_line_intersections(unit, l):
        # tangent line at t passes through x
        assert abs(polar(t, unit).vec @ x.vec) < 1e-12


def test_polar_symmetry_and_duality(rng):
    for _ in range(100):
        m = rng.normal(size=(3, 3))
        c = Conic.from_matrix(m + m.T)
        x, y = HomPoint(rng.normal(size=3)), HomPoint(rng.normal(size=3))
        assert np.array_equal(c.matrix, c.matrix.T)
        lhs, rhs = y.vec @ c.matrix @ x.vec, x.vec @ c.matrix @ y.vec
        assert abs(lhs - rhs) <= 1e-14 * np.abs(c.matrix).max()
        assert pole(polar(x, c), c).same_as(x, 1e-8)


def test_polar_degenerate_conic_raises():
    with pytest.raises(DegenerateInputError):
        polar(HomPoint([1, 0, 1]), Conic(1, 0, 0, 0, 0, 0))


def test_conic_symmetric_storage():
    with pytest.raises(GeometryError):
        Conic.from_matrix([[1, 2, 0], [0, 1, 0], [0, 0, 1]])
    m = Conic(1, 2, 3, 4, 5, 6).matrix
    assert np.array_equal(m, m.T)


def test_conic_line_intersections_examples():
    unit = Conic.circle(0, 0, 1)
    two = conic_line_intersections(unit, HomLine([0, 1, 0]))
    assert sorted(p.xy[0] for p in two) == pytest.approx([-1, 1])
    assert conic_line_intersections(unit, HomLine([0, 1, -2])) == []
    one = conic_line_intersections(unit, HomLine([0, 1, -1]))
    assert len(one) == 1 and np.allclose(one[0].xy, [0, 1])


def test_conic_line_intersections_pixel_scale(rng):
    for _ in range(200):
        cx, cy, r = rng.uniform(0, 1000), rng.uniform(0, 1000), rng.uniform(100, 2000)
        c = Conic.circle(cx, cy, r)
        l = HomLine([*rng.normal(size=2), 0.0])
        l = HomLine([l.vec[0], l.vec[1], -(l.vec[0] * cx + l.vec[1] * cy) + rng.uniform(-0.9, 0.9) * r * np.hypot(*l.vec[:2])])
        hits = conic_line_intersections(c, l)
        assert len(hits) == 2
        for p in hits:
            v = p.vec / np.linalg.norm(p.vec)
            assert abs(v @ l.vec) / np.linalg.norm(l.vec) < 1e-9
            assert abs(np.hypot(*(p.xy - [cx, cy])) - r) / r < 1e-9


def test_foot_examples(rng):
    assert np.allclose(foot_of_perpendicular(HomPoint([0, 0, 1]), HomLine([0, 1, -2])).xy, [0, 2])
    l = HomLine([1, -1, 3])
    on = HomPoint.from_xy(1, 4)
    assert foot_of_perpendicular(on, l).same_as(on)
    with pytest.raises(GeometryError):
        foot_of_perpendicular(HomPoint([1, 0, 0]), l)
    for _ in range(50):
        p = HomPoint.from_xy(*rng.normal(size=2) * 10)
        l = HomLine(rng.normal(size=3))
        foot = foot_of_perpendicular(p, l).xy
        d = l.direction
        ts = np.linspace(-1, 1, 101)
        dist = [np.linalg.norm(foot + t * d - p.xy) for t in ts]
        assert np.argmin(dist) == 50
        perp = perpendicular_through(p, l)
        assert abs(perp.normal @ l.normal) < 1e-12 and perp.contains(p)
