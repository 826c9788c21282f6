import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cslme.csp import Block, CspProblem
from cslme.instances import load, simplex_chain
from cslme.oracle import (CERTIFY_TOL, CompiledPoly, SandwichViolation, compare_bounds, grid_minimize,
                          local_search_upper_bound)
from cslme.poly import parse_polynomial

from conftest import polynomials


def one_block(n, obj, ineqs=(), eqs=(), box=None):
    P = parse_polynomial
    return CspProblem(n, [Block(tuple(range(1, n + 1)), P(obj), [P(g) for g in ineqs], [P(h) for h in eqs])],
                      box=box)


@pytest.mark.parametrize("name,value", [("ex5_1", -1.0), ("ex5_3", 4.0), ("ex5_4", -1.125)])
def test_known_minima(name, value):
    p = load(name)
    r = local_search_upper_bound(p, starts=24, seed=0)
    assert r.found and r.violation <= 1e-8
    assert abs(r.value - value) <= 1e-6
    if p.known_min is not None:
        assert abs(p.known_min - value) <= 1e-9


def test_chain_upper_bound():
    r = local_search_upper_bound(simplex_chain(), starts=16, seed=1)
    assert abs(r.value + 3.0) <= 1e-6


def test_grid_square():
    r = grid_minimize(one_block(1, "x1^2", ["1 - x1^2"]), points=21)
    assert abs(r.value) <= 1e-12 and abs(r.x[0]) <= 1e-6


def test_grid_two_well_quartic():
    # (x^2 - 1)^2 + x/4 has its global minimum in the left well
    p = one_block(1, "x1^4 - 2*x1^2 + 1 + 1/4*x1", box=(-2.0, 2.0))
    r = grid_minimize(p, points=401)
    xs = np.linspace(-2, 2, 200001)
    ref = np.min((xs ** 2 - 1) ** 2 + xs / 4)
    assert r.x[0] < 0 and abs(r.value - ref) <= 1e-8
    ls = local_search_upper_bound(p, starts=16, seed=3)
    assert abs(ls.value - r.value) <= 1e-8


def test_grid_simplex_bilinear():
    # bilinear objective on the standard simplex attains its minimum at a vertex or edge
    p = one_block(3, "x1*x2 - x1 + 2*x3 - x2*x3", ["x1", "x2", "x3"], ["1 - x1 - x2 - x3"], box=(0.0, 1.0))
    ls = local_search_upper_bound(p, starts=32, seed=0)
    verts = [(1, 0, 0), (0, 1, 0), (0, 0, 1)]
    f = lambda x: x[0] * x[1] - x[0] + 2 * x[2] - x[1] * x[2]
    assert ls.value <= min(f(v) for v in verts) + 1e-8
    t = np.linspace(0, 1, 10001)
    edges = [f((a, 1 - a, 0)) for a in t] + [f((a, 0, 1 - a)) for a in t] + [f((0, a, 1 - a)) for a in t]
    assert abs(ls.value - min(edges)) <= 1e-7


def test_grid_rejects_large_n():
    with pytest.raises(ValueError):
        grid_minimize(load("ex5_3"))


def test_infeasible_returns_inf():
    p = one_block(1, "x1", ["x1 - 3"], box=(-1.0, 1.0))
    r = local_search_upper_bound(p, starts=4)
    assert not r.found and math.isinf(r.value)


def test_compare_bounds():
    rep = compare_bounds(-1.0000566, -1.0)
    assert not rep.certified and rep.gap == pytest.approx(5.66e-5)
    assert compare_bounds(-1.000002, -1.0).certified
    with pytest.raises(SandwichViolation):
        compare_bounds(1.0, 0.0)
    compare_bounds(1e-7, 0.0)


def test_certify_tol_value():
    assert CERTIFY_TOL == 1e-5


def test_determinism():
    p = load("ex5_4")
    a = local_search_upper_bound(p, starts=8, seed=7)
    b = local_search_upper_bound(p, starts=8, seed=7)
    assert a.value == b.value and np.array_equal(a.x, b.x)


def test_reported_point_reevaluates():
    p = load("ex5_3")
    r = local_search_upper_bound(p, starts=8, seed=2)
    f = CompiledPoly(p.objective(), p.n)
    assert f.value(r.x) == r.value
    for g in p.all_ineqs():
        assert CompiledPoly(g, p.n).value(r.x) >= -1e-8
    for h in p.all_eqs():
        assert abs(CompiledPoly(h, p.n).value(r.x)) <= 1e-8


@given(polynomials(nvars=3, maxdeg=3), st.lists(st.floats(-2, 2), min_size=3, max_size=3))
def test_compiled_matches_exact(p, pt):
    c = CompiledPoly(p, 3)
    exact = float(p.evaluate(pt))
    assert abs(c.value(np.array(pt)) - exact) <= 1e-9 * (1 + abs(exact))
    h = 1e-6
    for v in range(3):
        e = np.zeros(3)
        e[v] = h
        fd = (c.value(np.array(pt) + e) - c.value(np.array(pt) - e)) / (2 * h)
        assert abs(c.grad(np.array(pt))[v] - fd) <= 1e-4 * (1 + abs(fd))
