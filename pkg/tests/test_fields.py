import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from linefields.fields import (
    Box, FieldError, Metric, MetricError, ProtoLineField, SingularPointError, Torus,
    VectorField, angle_between, bisector, bisector_angles, find_zeros, frame_angle,
    orthonormal_frame, realize_line_field, wrap_line, wrap_vec,
)

LEMON = ProtoLineField(("x + y", "y - x"), ("1", "1"))
STAR = ProtoLineField(("x", "-y"), ("1", "0"))


def line_dist(a, b):
    d = (a - b) % math.pi
    return min(d, math.pi - d)


def vec_dist(a, b):
    d = (a - b) % (2 * math.pi)
    return min(d, 2 * math.pi - d)


def gram(g, p, u, v):
    return u @ g.matrix(*p) @ v


@pytest.mark.parametrize("g,e1,e2", [
    (Metric(), (1, 0), (0, 1)),
    (Metric("1", "0", "9"), (1, 0), (0, 1 / 3)),
    (Metric("2", "0", "2"), (1 / math.sqrt(2), 0), (0, 1 / math.sqrt(2))),
])
def test_frame_examples(g, e1, e2):
    f1, f2 = orthonormal_frame(g, (0.3, -0.2))
    np.testing.assert_allclose(f1, e1, atol=1e-15)
    np.testing.assert_allclose(f2, e2, atol=1e-15)


def test_frame_is_orthonormal_and_oriented():
    g = Metric("2 + x^2", "0.5*sin(y)", "1 + y^2")
    p = (0.7, 1.1)
    e1, e2 = orthonormal_frame(g, p)
    assert gram(g, p, e1, e1) == pytest.approx(1.0)
    assert gram(g, p, e2, e2) == pytest.approx(1.0)
    assert gram(g, p, e1, e2) == pytest.approx(0.0, abs=1e-15)
    assert e1[1] == 0 and e1[0] > 0
    assert e1[0] * e2[1] - e1[1] * e2[0] > 0


def test_metric_not_positive_definite():
    g = Metric("1", "2", "1")
    with pytest.raises(MetricError):
        orthonormal_frame(g, (0, 0))
    with pytest.raises(MetricError):
        Metric("x", "0", "1").at(-1.0, 0.0)


def test_angle_between_examples():
    E = Metric()
    assert angle_between(E, (0, 0), (1, 0), (0, 1)) == pytest.approx(math.pi / 2)
    t = math.pi / 4
    g3 = Metric("1", "0", "9")
    assert angle_between(g3, (0, 0), (1, 0), (math.cos(t), math.sin(t))) == pytest.approx(math.atan(3), abs=1e-15)
    assert angle_between(g3, (0, 0), (0.3, 0.4), (0.3, 0.4)) == 0.0
    with pytest.raises(FieldError):
        angle_between(E, (0, 0), (0, 0), (1, 0))


def test_angle_matches_metric_cosine():
    # independent oracle: cos of the angle from the metric inner product
    g = Metric("2", "0.7", "1.5")
    rng = np.random.default_rng(1)
    for u, v in rng.normal(size=(20, 2, 2)):
        a = angle_between(g, (0, 0), u, v)
        c = gram(g, (0, 0), u, v) / math.sqrt(gram(g, (0, 0), u, u) * gram(g, (0, 0), v, v))
        assert math.cos(a) == pytest.approx(c, abs=1e-12)


def test_wrap_idempotent_and_line_angle_of_negation():
    rng = np.random.default_rng(2)
    for a in rng.uniform(-20, 20, 50):
        assert wrap_vec(wrap_vec(a)) == wrap_vec(a)
        assert wrap_line(wrap_line(a)) == wrap_line(a)
        assert 0 <= wrap_vec(a) < 2 * math.pi and 0 <= wrap_line(a) < math.pi
    gv = (2.0, 0.3, 1.0)
    for v in rng.normal(size=(20, 2)):
        a = float(frame_angle(gv, v[0], v[1]))
        b = float(frame_angle(gv, -v[0], -v[1]))
        assert line_dist(wrap_line(a), wrap_line(b)) < 1e-15


def test_bisector_examples():
    assert bisector(LEMON, (1, 0)) == pytest.approx(0.0, abs=1e-15)
    assert bisector(STAR, (0, 1)) == pytest.approx(3 * math.pi / 4)
    same = ProtoLineField(("1 + x", "2 - y"), ("1 + x", "2 - y"))
    assert line_dist(bisector(same, (0.3, 0.1)), math.atan2(1.9, 1.3)) < 1e-15


def test_bisector_at_zero_raises():
    with pytest.raises(SingularPointError):
        bisector(LEMON, (0, 0))


def test_bisector_angles_vectorized():
    xs = np.array([1.0, 0.0, 0.5])
    ys = np.array([0.0, 0.0, 0.5])
    out = bisector_angles(LEMON, xs, ys)
    assert out[0] == pytest.approx(0.0) and math.isnan(out[1])
    assert out[2] == pytest.approx(bisector(LEMON, (0.5, 0.5)))


random_vec = st.tuples(st.floats(-3, 3), st.floats(-3, 3)).filter(lambda v: math.hypot(*v) > 1e-3)
random_metric = st.tuples(st.floats(0.2, 3), st.floats(-1, 1), st.floats(0.2, 3)).filter(
    lambda m: m[0] * m[2] - m[1] ** 2 > 0.05)


def _const_plf(u, v, m):
    return ProtoLineField(VectorField.constant(*u), VectorField.constant(*v), Metric(*map(repr, m)))


@settings(max_examples=100, deadline=None)
@given(random_vec, random_vec, random_metric)
def test_bisector_swap_invariant(u, v, m):
    a = bisector(_const_plf(u, v, m), (0, 0))
    b = bisector(_const_plf(v, u, m), (0, 0))
    assert line_dist(a, b) < 1e-12


@settings(max_examples=100, deadline=None)
@given(random_vec, random_vec, random_metric, st.floats(0.01, 100), st.floats(0.01, 100))
def test_bisector_scale_invariant(u, v, m, s, t):
    a = bisector(_const_plf(u, v, m), (0, 0))
    b = bisector(_const_plf((s * u[0], s * u[1]), (t * v[0], t * v[1]), m), (0, 0))
    assert line_dist(a, b) < 1e-12


def test_bisector_scale_invariant_nonconstant_factor():
    L = ProtoLineField(("x + y", "y - x"), ("1", "1"))
    S = ProtoLineField(("(2 + sin(x*y))*(x + y)", "(2 + sin(x*y))*(y - x)"), ("exp(x)", "exp(x)"))
    rng = np.random.default_rng(3)
    for p in rng.uniform(-2, 2, size=(50, 2)):
        assert line_dist(bisector(L, p), bisector(S, p)) < 1e-12


@settings(max_examples=100, deadline=None)
@given(random_vec, random_vec, random_vec, random_metric)
def test_angle_additivity(u, v, w, m):
    g = Metric(*map(repr, m))
    total = angle_between(g, (0, 0), u, v) + angle_between(g, (0, 0), v, w)
    assert vec_dist(total, angle_between(g, (0, 0), u, w)) < 1e-12


def test_bisector_is_halfway_in_metric():
    # the bisector makes equal g-angles with X and Y
    L = ProtoLineField(("1 + x", "y"), ("x", "1 - y"), Metric("2", "0.4", "1 + x^2"))
    rng = np.random.default_rng(4)
    for p in rng.uniform(-0.5, 0.5, size=(20, 2)):
        t = bisector(L, p)
        from linefields.fields import direction
        d = direction(L.g, p, t)
        a = angle_between(L.g, p, L.X(*p), d)
        b = angle_between(L.g, p, d, L.Y(*p))
        assert line_dist(a, b) < 1e-12


def test_realize_simple_sections():
    X = VectorField("1", "0")
    Y = realize_line_field(lambda x, y: 0.0, X)
    np.testing.assert_allclose(Y(0.3, 0.4), (1.0, 0.0), atol=1e-15)
    Y = realize_line_field(lambda x, y: math.pi / 4, X)
    np.testing.assert_allclose(Y(0.3, 0.4), (0.0, 1.0), atol=1e-15)
    L = ProtoLineField(X, Y)
    assert bisector(L, (0.1, 0.2)) == pytest.approx(math.pi / 4)


def test_realize_lemon_section_on_annulus():
    X = VectorField("1", "0")
    Y = realize_line_field(lambda x, y: bisector(LEMON, (x, y)), X)
    L = ProtoLineField(X, Y)
    rng = np.random.default_rng(5)
    r = rng.uniform(0.5, 1.5, 100)
    t = rng.uniform(0, 2 * math.pi, 100)
    for x, y in zip(r * np.cos(t), r * np.sin(t)):
        assert line_dist(bisector(L, (x, y)), bisector(LEMON, (x, y))) < 1e-9


def test_realize_round_trip_with_metric_and_negative_damping():
    g = Metric("1 + x^2", "0.3", "2")
    X = VectorField("2 + y", "x")
    section = lambda x, y: wrap_line(3 * x - y * y)
    Y = realize_line_field(section, X, damping="x - 0.1", g=g)
    L = ProtoLineField(X, Y, g)
    rng = np.random.default_rng(6)
    for p in rng.uniform(-1, 1, size=(100, 2)):
        if abs(p[0] - 0.1) < 1e-3:
            continue
        assert line_dist(bisector(L, p), section(*p)) < 1e-9


def test_realize_rejects_vanishing_inputs():
    Y = realize_line_field(lambda x, y: 0.3, VectorField("x", "y"))
    with pytest.raises(SingularPointError):
        Y(0.0, 0.0)
    Y = realize_line_field(lambda x, y: 0.3, VectorField("1", "0"), damping="x")
    with pytest.raises(SingularPointError):
        Y(0.0, 0.5)


def test_find_zeros_lemon():
    zs = find_zeros(LEMON.X, Box(-2, 2, -2, 2))
    assert len(zs) == 1
    assert zs[0].point == pytest.approx((0.0, 0.0), abs=1e-12)
    assert zs[0].det == pytest.approx(2.0)
    assert not zs[0].degenerate


def test_find_zeros_sine():
    zs = find_zeros(VectorField("sin(x)", "sin(y)"), Box(-0.5, 2 * math.pi - 0.5, -0.5, 2 * math.pi - 0.5))
    got = sorted((round(z.point[0], 9), round(z.point[1], 9)) for z in zs)
    pi = round(math.pi, 9)
    assert got == [(0.0, 0.0), (0.0, pi), (pi, 0.0), (pi, pi)]
    assert sorted(round(z.det) for z in zs) == [-1, -1, 1, 1]


def test_find_zeros_two_roots():
    zs = find_zeros(VectorField("x^2 - 1", "y"), Box(-2, 2, -2, 2))
    assert [z.point for z in zs] == [pytest.approx((-1, 0)), pytest.approx((1, 0))]


def test_find_zeros_degenerate_and_empty():
    zs = find_zeros(VectorField("x^2", "y"), Box(-2, 2, -2, 2))
    assert len(zs) == 1 and zs[0].degenerate
    none = find_zeros(VectorField("x^2 + y^2 + 1", "y"), Box(-2, 2, -2, 2))
    assert len(none) == 0 and none.unconverged > 0


def test_find_zeros_on_torus_wraps_and_dedups():
    zs = find_zeros(VectorField("sin(x)", "sin(y)"), Torus(2 * math.pi, 2 * math.pi))
    assert len(zs) == 4
    for z in zs:
        assert 0 <= z.point[0] < 2 * math.pi and 0 <= z.point[1] < 2 * math.pi


def test_torus_periodicity_checked():
    T = Torus(2 * math.pi, 2 * math.pi)
    ProtoLineField(("sin(x)", "cos(y)"), ("1", "0"), domain=T)
    with pytest.raises(FieldError):
        ProtoLineField(("x", "cos(y)"), ("1", "0"), domain=T)


def test_jacobian_self_check_rejects_nothing_on_valid_fields():
    V = VectorField("atan(x*y) + sqrt(2 + x)", "exp(-y)*tan(x/3)")
    J = V.jacobian(0.2, 0.1)
    h = 1e-6
    fd = np.column_stack([(V.value(0.2 + h, 0.1) - V.value(0.2 - h, 0.1)) / (2 * h),
                          (V.value(0.2, 0.1 + h) - V.value(0.2, 0.1 - h)) / (2 * h)])
    np.testing.assert_allclose(J, fd, atol=1e-8)
