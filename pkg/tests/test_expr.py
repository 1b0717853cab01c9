import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from linefields.expr import (
    Binary, EvaluationDomainError, ExprSyntaxError, UnknownIdentifierError, Var,
    Const, Power, Unary, differentiate, evaluate, parse,
)


def test_parse_sum():
    assert parse("x + y") == Binary("+", Var("x"), Var("y"))


def test_evaluate_trig_product():
    e = parse("sin(2*x)*y - 3")
    assert evaluate(e, math.pi / 4, 1.0) == pytest.approx(-2.0, abs=1e-15)
    assert e(math.pi / 4, 1.0) == evaluate(e, math.pi / 4, 1.0)


def test_incomplete_input_offset():
    with pytest.raises(ExprSyntaxError) as info:
        parse("x + ")
    assert info.value.offset == 4
    assert info.value.expected


def test_offset_is_in_bytes():
    # the non-ascii character occupies two bytes in utf-8
    with pytest.raises(ExprSyntaxError) as info:
        parse("x + é")
    assert info.value.offset == 4


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifierError):
        parse("foo(x)")
    with pytest.raises(UnknownIdentifierError):
        parse("z + 1")


@pytest.mark.parametrize("text", ["x ^ y", "x ^ 1.5", "(x", "x y", "sin x", ""])
def test_syntax_errors(text):
    with pytest.raises(ExprSyntaxError):
        parse(text)


def test_precedence():
    assert parse("-x^2")(3.0, 0.0) == -9.0
    assert parse("2*x^2")(3.0, 0.0) == 18.0
    assert parse("x - y - 1")(0.0, 0.0) == -1.0
    assert parse("8 / 4 / 2")(0.0, 0.0) == 1.0
    assert parse("--x")(2.0, 0.0) == 2.0
    assert parse("pi")(0.0, 0.0) == math.pi


def test_simple_evaluations():
    assert evaluate(parse("x*x - y"), 2, 1) == 3
    assert evaluate(parse("exp(0)*cos(0)"), 0, 0) == 1


@pytest.mark.parametrize("text,x,culprit", [
    ("sqrt(x)", -1.0, "sqrt(x)"),
    ("1 / x", 0.0, "1 / x"),
    ("tan(x)", math.pi / 2, "tan(x)"),
    ("y + 1 / (x - 1)", 1.0, "1 / (x - 1)"),
])
def test_domain_errors(text, x, culprit):
    e = parse(text)
    with pytest.raises(EvaluationDomainError) as info:
        evaluate(e, x, 0.0)
    assert culprit.replace(" ", "") in str(info.value).replace(" ", "")
    # the compiled fast path reports the same error
    with pytest.raises(EvaluationDomainError):
        e(x, 0.0)


def test_derivatives():
    assert str(differentiate(parse("x*y"), "x")) == "y"
    assert differentiate(parse("sin(2*x)"), "x")(0.0, 0.0) == 2.0
    mixed = differentiate(differentiate(parse("x^2*y"), "y"), "x")
    assert mixed(3.0, 0.7) == pytest.approx(6.0)
    h = 1e-6
    f = parse("x^2*y")
    fd = ((f(3 + h, 1 + h) - f(3 + h, 1 - h)) - (f(3 - h, 1 + h) - f(3 - h, 1 - h))) / (4 * h * h)
    assert fd == pytest.approx(6.0, rel=1e-3)


def test_derivative_stays_in_grammar():
    for text in ["atan(x*y)", "sqrt(1 + x^2)", "tan(x) / (1 + y^2)", "exp(-x) * cos(y)^3"]:
        d = differentiate(parse(text), "x")
        assert parse(str(d)) is not None


def test_vectorized_matches_scalar():
    e = parse("sin(x)*y^2 - atan(x - y)")
    xs = np.linspace(-2, 2, 7)
    ys = np.linspace(-1, 3, 7)
    expected = [e(a, b) for a, b in zip(xs, ys)]
    np.testing.assert_allclose(e.vectorized(xs, ys), expected, rtol=1e-15)


# random polynomial trees for the property tests

_leaves = st.one_of(
    st.just(Var("x")), st.just(Var("y")),
    st.floats(-5, 5, allow_nan=False).map(lambda v: Const(round(v, 3))),
)


def _extend(children):
    return st.one_of(
        st.tuples(st.sampled_from("+-*"), children, children).map(lambda t: Binary(*t)),
        st.tuples(children, st.integers(0, 4)).map(lambda t: Power(*t)),
        children.map(lambda c: Unary("neg", c)),
    )


polynomials = st.recursive(_leaves, _extend, max_leaves=12)
points = st.tuples(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))


@settings(max_examples=200, deadline=None)
@given(polynomials, points, st.sampled_from("xy"))
def test_derivative_matches_finite_difference(e, p, var):
    x, y = p
    h = 1e-5
    if var == "x":
        fd = (evaluate(e, x + h, y) - evaluate(e, x - h, y)) / (2 * h)
    else:
        fd = (evaluate(e, x, y + h) - evaluate(e, x, y - h)) / (2 * h)
    value = evaluate(differentiate(e, var), x, y)
    assert abs(value - fd) <= 1e-6 * (1 + abs(value))


@settings(max_examples=100, deadline=None)
@given(polynomials)
def test_print_parse_round_trip(e):
    back = parse(str(e))
    rng = np.random.default_rng(0)
    for x, y in rng.uniform(-2, 2, size=(100, 2)):
        a = evaluate(e, x, y)
        b = evaluate(back, x, y)
        assert a == b or (math.isnan(a) and math.isnan(b))
