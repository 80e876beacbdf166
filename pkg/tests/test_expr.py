import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wavecrest import expr as ex

CH = ex.Chart(["rho", "p", "u"])
RHO, P, U = ex.Sym("rho"), ex.Sym("p"), ex.Sym("u")


def test_sqrt_value():
    e = ex.parse("sqrt(3*p/rho)", CH)
    assert ex.evaluate(e, [1, 1, 0], chart=CH) == pytest.approx(math.sqrt(3), rel=1e-15)


def test_zero_and_power():
    assert ex.evaluate(ex.parse("0", CH), [2, 5, 1], chart=CH) == 0.0
    assert ex.evaluate(ex.parse("rho^(-1)", CH), {"rho": 4.0}) == pytest.approx(0.25)


def test_derivative_examples():
    e = ex.parse("sqrt(3*p/rho)", CH)
    d = ex.differentiate(e, "rho")
    assert ex.evaluate(d, [1, 1, 0], chart=CH) == pytest.approx(-math.sqrt(3) / 2, rel=1e-14)
    assert ex.evaluate(ex.differentiate(e, "u"), [1, 1, 0], chart=CH) == 0.0
    dl = ex.differentiate(ex.parse("D*ln(p)", CH, ["D"]), "p")
    assert ex.evaluate(dl, {"p": 2.0, "D": 3.0}) == pytest.approx(1.5)


def test_evaluate_examples():
    tc = ex.Chart(["t1", "t2", "t3"])
    assert ex.evaluate(ex.parse("exp(2*t1+t3)", tc), [0, 0, 0], chart=tc) == 1.0
    e = ex.parse("kappa*p/rho", CH, ["kappa"])
    assert ex.evaluate(e, [2, 1, 0], {"kappa": 3}, CH) == pytest.approx(1.5)


def test_domain_errors():
    with pytest.raises(ex.DomainError) as info:
        ex.evaluate(ex.ln(RHO), {"rho": -1.0})
    assert "ln" in str(info.value.subterm)
    with pytest.raises(ex.DomainError):
        ex.evaluate(ex.sqrt(RHO), {"rho": -1.0})
    with pytest.raises(ex.DomainError):
        ex.evaluate(ex.parse("rho^0.5", CH), {"rho": -1.0})
    # integer exponents are fine on negative bases
    assert ex.evaluate(ex.parse("rho^3", CH), {"rho": -2.0}) == -8.0
    with pytest.raises(ex.DomainError):
        ex.evaluate(1 / RHO, np.array([[0.0, 1, 1]]), chart=CH)


def test_parse_errors_report_offsets():
    with pytest.raises(ex.ParseError) as info:
        ex.parse("1 + * 2", CH)
    assert info.value.offset == 4
    with pytest.raises(ex.UnknownIdentifier) as info:
        ex.parse("rho + foo", CH)
    assert info.value.name == "foo" and info.value.offset == 6
    with pytest.raises(ex.ParseError):
        ex.parse("sqrt(rho", CH)
    with pytest.raises(ex.ParseError):
        ex.parse("", CH)


def test_parse_is_deterministic():
    assert ex.parse("rho*exp(-p)+u^2", CH) == ex.parse("rho*exp(-p)+u^2", CH)


def test_unbound_parameter():
    e = ex.parse("kappa*p", CH, ["kappa"])
    with pytest.raises(ex.ExprError):
        ex.evaluate(e, [1, 1, 0], chart=CH)


def test_chart_validation():
    with pytest.raises(ValueError):
        ex.Chart(["x", "x"])
    with pytest.raises(ValueError):
        ex.Chart([])


def test_lambdify_vectorized():
    f = ex.lambdify(ex.parse("rho*p+u", CH), CH.names)
    out = f(np.array([1.0, 2.0]), np.array([3.0, 4.0]), np.array([0.5, 0.5]))
    assert np.allclose(out, [3.5, 8.5])


# -- properties ---------------------------------------------------------------

TEXTS = [
    "rho*p - u^2",
    "sqrt(3*p/rho)",
    "exp(-u)*ln(rho+p)",
    "sin(rho*u)/cos(p/4)",
    "(rho + 2*p)^3/(1 + u^2)",
    "rho^(-2)*sqrt(p)",
    "-(p - rho)*exp(u/3)",
]
SAMPLES = np.random.default_rng(1).uniform([0.5, 0.5, -1], [3, 3, 1], size=(100, 3))


@pytest.mark.parametrize("text", TEXTS)
def test_print_parse_round_trip(text):
    e = ex.parse(text, CH)
    e2 = ex.parse(ex.to_text(e), CH)
    a = ex.evaluate(e, SAMPLES, chart=CH)
    b = ex.evaluate(e2, SAMPLES, chart=CH)
    assert np.allclose(a, b, rtol=1e-12, atol=0)


@pytest.mark.parametrize("text", TEXTS)
@pytest.mark.parametrize("var", ["rho", "p", "u"])
def test_derivative_matches_finite_difference(text, var):
    e = ex.parse(text, CH)
    d = ex.differentiate(e, var)
    k = CH.index(var)
    h = np.maximum(1.0, np.abs(SAMPLES[:, k])) * np.finfo(float).eps ** (1 / 3)
    up, dn = SAMPLES.copy(), SAMPLES.copy()
    up[:, k] += h
    dn[:, k] -= h
    fd = (ex.evaluate(e, up, chart=CH) - ex.evaluate(e, dn, chart=CH)) / (2 * h)
    exact = np.broadcast_to(ex.evaluate(d, SAMPLES, chart=CH), fd.shape)
    assert np.allclose(fd, exact, rtol=1e-6, atol=1e-6)


@pytest.mark.parametrize("text", TEXTS)
def test_mixed_partials_commute(text):
    e = ex.parse(text, CH)
    for a, b in (("rho", "p"), ("rho", "u"), ("p", "u")):
        ab = ex.evaluate(ex.differentiate(ex.differentiate(e, a), b), SAMPLES, chart=CH)
        ba = ex.evaluate(ex.differentiate(ex.differentiate(e, b), a), SAMPLES, chart=CH)
        ab, ba = np.broadcast_to(ab, (100,)), np.broadcast_to(ba, (100,))
        assert np.allclose(ab, ba, rtol=1e-10, atol=1e-12)


text_st = st.sampled_from(TEXTS)
coef_st = st.floats(min_value=-5, max_value=5, allow_nan=False)
point_st = st.tuples(st.floats(0.5, 3), st.floats(0.5, 3), st.floats(-1, 1))


def _close(a, b, rel):
    return abs(a - b) <= rel * max(1.0, abs(a), abs(b))


@given(text_st, text_st, coef_st, coef_st, point_st, st.sampled_from(["rho", "p", "u"]))
@settings(max_examples=100, deadline=None)
def test_linearity(t1, t2, alpha, beta, pt, var):
    e, f = ex.parse(t1, CH), ex.parse(t2, CH)
    lhs = ex.differentiate(alpha * e + beta * f, var)
    rhs = alpha * ex.differentiate(e, var) + beta * ex.differentiate(f, var)
    assert _close(ex.evaluate(lhs, pt, chart=CH), ex.evaluate(rhs, pt, chart=CH), 1e-12)


@given(text_st, text_st, point_st, st.sampled_from(["rho", "p", "u"]))
@settings(max_examples=100, deadline=None)
def test_leibniz(t1, t2, pt, var):
    e, f = ex.parse(t1, CH), ex.parse(t2, CH)
    lhs = ex.differentiate(e * f, var)
    rhs = ex.differentiate(e, var) * f + e * ex.differentiate(f, var)
    assert _close(ex.evaluate(lhs, pt, chart=CH), ex.evaluate(rhs, pt, chart=CH), 1e-12)


@given(point_st)
@settings(max_examples=50, deadline=None)
def test_evaluation_is_finite_where_defined(pt):
    for t in TEXTS:
        assert math.isfinite(ex.evaluate(ex.parse(t, CH), pt, chart=CH))
