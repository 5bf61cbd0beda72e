import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from garsamp.errors import ExpressionDomainError, ExpressionSyntaxError
from garsamp.harness.expr import Dual, parse_expression

CASES = [
    ("exp(-x)", lambda x: math.exp(-x)),
    ("x^2 - 3*x + 1", lambda x: x * x - 3 * x + 1),
    ("cosh(x) / 2", lambda x: math.cosh(x) / 2),
    ("exp(abs(x))", lambda x: math.exp(abs(x))),
    ("sinh(x) * x", lambda x: math.sinh(x) * x),
    ("-x^2", lambda x: -(x ** 2)),
    ("log(1 + x^2)", lambda x: math.log(1 + x * x)),
    ("sqrt(x^2 + 1) - 0.5", lambda x: math.sqrt(x * x + 1) - 0.5),
    ("1 / (1 + exp(-x))", lambda x: 1 / (1 + math.exp(-x))),
]


@pytest.mark.parametrize("text,ref", CASES)
def test_values(text, ref):
    e = parse_expression(text)
    for x in (-2.0, -0.3, 0.7, 1.9):
        assert e.f(x) == pytest.approx(ref(x), rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("text,ref", CASES)
def test_derivatives_match_finite_differences(text, ref):
    e = parse_expression(text)
    rng = np.random.default_rng(0)
    xs = rng.uniform(-3, 3, 100)
    xs = xs[np.abs(xs) > 1e-3]  # keep away from the kink of abs
    h = 1e-5
    d1 = np.array([(ref(x + h) - ref(x - h)) / (2 * h) for x in xs])
    d2 = np.array([(ref(x + h) - 2 * ref(x) + ref(x - h)) / h ** 2 for x in xs])
    np.testing.assert_allclose(e.d1(xs), d1, rtol=1e-6, atol=1e-6)
    np.testing.assert_allclose(e.d2(xs), d2, rtol=1e-3, atol=1e-3)


def test_known_triple():
    assert parse_expression("exp(-x)").triple(0.0) == (1.0, -1.0, 1.0)


def test_precedence():
    e = parse_expression("-x^2 + 2*3^2")
    assert e.f(3.0) == pytest.approx(-9 + 18)
    assert parse_expression("x^(-2)").f(2.0) == pytest.approx(0.25)
    # exponents are plain numbers, so chained powers are rejected
    with pytest.raises(ExpressionSyntaxError):
        parse_expression("2^3^2")
    with pytest.raises(ExpressionSyntaxError):
        parse_expression("2^x")


def test_constants_and_variable():
    e = parse_expression("a * t^2", variable="t", constants={"a": 3.0})
    assert e.f(2.0) == 12.0
    assert e.d1(2.0) == 12.0


def test_vectorised_shape():
    e = parse_expression("3")
    assert e.f(np.zeros(4)).shape == (4,)
    assert np.all(e.d1(np.zeros(4)) == 0)


@pytest.mark.parametrize("text,offset", [("(x", 2), ("x +", 3), ("2 ** x", 3), ("foo(x)", 0), ("x $ 1", 2)])
def test_syntax_errors_report_offset(text, offset):
    with pytest.raises(ExpressionSyntaxError) as info:
        parse_expression(text)
    assert info.value.position == offset
    assert f"offset {offset}" in str(info.value)


def test_unknown_name():
    with pytest.raises(ExpressionSyntaxError):
        parse_expression("y + 1")


def test_domain_errors():
    e = parse_expression("log(x)")
    with pytest.raises(ExpressionDomainError):
        e.f(-1.0)
    safe = e.safe(np.inf)
    v = safe(np.array([-1.0, 1.0]))
    assert v[0] == np.inf and v[1] == 0.0


def test_dual_arithmetic():
    a = Dual(2.0, 1.0)
    r = (a * a + 3) / a
    # d/dx (x + 3/x) = 1 - 3/x^2
    assert r.re == pytest.approx(3.5)
    assert r.du == pytest.approx(1 - 3 / 4)


@settings(max_examples=50, deadline=None)
@given(st.floats(-4, 4), st.floats(0.1, 3))
def test_chain_rule_property(x, a):
    e = parse_expression("exp(a*x) * cosh(x)", constants={"a": a})
    expect = a * math.exp(a * x) * math.cosh(x) + math.exp(a * x) * math.sinh(x)
    assert e.d1(x) == pytest.approx(expect, rel=1e-10)
