import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from cslme.instances import load
from cslme.poly import (PolyError, Polynomial, VarTable, format_polynomial, parse_polynomial,
                        var)
from conftest import polynomials


def P(s):
    return parse_polynomial(s)


def test_parse_simplex_constraint():
    g = P("1 - x1 - x2 - x3")
    assert len(g.terms) == 4 and g.degree() == 1


def test_zero_polynomial():
    z = P("0")
    assert z.terms == {} and z.degree() == 0 and z.is_zero()


def test_rational_coefficient():
    p = P("3/2*x1^2*x4 - x4")
    assert len(p.terms) == 2 and p.degree() == 3
    assert p.coeff(((1, 2), (4, 1))) == Fraction(3, 2)


def test_add_and_mul_basics():
    assert (P("x1") + P("-x1")).is_zero()
    assert P("x1 + x2") + P("x2") == P("x1 + 2*x2")
    p = P("x1^2*x3 - 7*x2 + 1/3")
    assert p * 1 == p
    assert P("x1 - x2") * P("x1 + x2") == P("x1^2 - x2^2")


def test_ex51_objective_sum(ex5_1):
    f = ex5_1.objective()
    assert f.degree() == 3
    assert f.evaluate([0.0] * 6) == 0


def test_diff():
    assert P("x1^2*x2").diff(1) == P("2*x1*x2")
    assert P("x2^3 + 5").diff(1).is_zero()


def test_ex51_block1_gradient_matches_finite_differences(ex5_1):
    f1 = ex5_1.block(1).objective
    expected = [P("x2*x3 - 2*x1"), P("x1*x3 - 2*x2"), P("x1*x2")]
    assert [f1.diff(v) for v in (1, 2, 3)] == expected
    rng = random.Random(3)
    h = 1e-5
    for _ in range(10):
        z = [rng.uniform(-2, 2) for _ in range(6)]
        for v in (1, 2, 3):
            zp, zm = list(z), list(z)
            zp[v - 1] += h
            zm[v - 1] -= h
            fd = (f1.evaluate(zp) - f1.evaluate(zm)) / (2 * h)
            assert abs(fd - float(f1.diff(v).evaluate(z))) <= 1e-6


def test_evaluate():
    assert P("1 - x1 - x2 - x3").evaluate([1, 0, 0]) == 0
    assert P("7/2").evaluate([5.0]) == Fraction(7, 2)
    with pytest.raises(Exception):
        P("x3").evaluate({1: 1.0})


def test_degree_support():
    p = P("x1*x2*x3 - x1^2 - x2^2")
    assert p.degree() == 3 and len(p.terms) == 3 and p.variables() == (1, 2, 3)
    f3 = load("ex5_3").block(3).objective
    assert f3.degree() == 4 and set(f3.variables()) <= {4, 7, 8}


def test_parse_errors_report_column():
    with pytest.raises(PolyError) as e:
        P("x1 + * x2")
    assert e.value.column == 6
    with pytest.raises(PolyError):
        P("")
    with pytest.raises(PolyError):
        parse_polynomial("y1 + 2", VarTable.standard(2))


def test_named_variables():
    names = VarTable(["a", "b", "nu_2_1_3"])
    p = parse_polynomial("a*nu_2_1_3 - 2*b^2", names)
    assert p == var(1) * var(3) - 2 * var(2) ** 2
    assert format_polynomial(p, names).count("nu_2_1_3") == 1


@given(polynomials(), polynomials(), polynomials())
def test_ring_axioms(p, q, r):
    assert p + q == q + p
    assert p * q == q * p
    assert (p + q) + r == p + (q + r)
    assert (p * q) * r == p * (q * r)
    assert p * (q + r) == p * q + p * r


@given(polynomials(), polynomials(), st.integers(1, 5))
def test_product_rule(p, q, v):
    assert (p * q).diff(v) == p.diff(v) * q + p * q.diff(v)


@given(polynomials(), st.integers(1, 5), st.lists(st.floats(-1.5, 1.5), min_size=5, max_size=5))
def test_derivative_against_central_difference(p, v, z):
    h = 1e-5
    zp, zm = list(z), list(z)
    zp[v - 1] += h
    zm[v - 1] -= h
    fd = (float(p.evaluate(zp)) - float(p.evaluate(zm))) / (2 * h)
    ex = float(p.diff(v).evaluate(z))
    assert abs(fd - ex) <= 1e-5 * (1 + abs(ex))


@given(polynomials())
def test_serialize_round_trip(p):
    assert parse_polynomial(format_polynomial(p)) == p


def test_float_mode():
    p = parse_polynomial("0.5*x1 + 1/4", exact=False)
    assert all(isinstance(c, float) for c in p.terms.values())
    assert math.isclose(float(p.evaluate([1.0])), 0.75)
