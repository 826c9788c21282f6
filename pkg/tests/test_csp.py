import random

import pytest
from hypothesis import given, strategies as st

from cslme.csp import Block, CspError, CspProblem, build_tree, check_rip, detect_csp, validate_csp
from cslme.instances import chain_cliques, load
from cslme.poly import Polynomial, parse_polynomial as P
from cslme.reform import enumerate_nu, extended_cliques


def test_validate_ex51():
    p = load("ex5_1")
    validate_csp(p)
    assert p.s == 2


def test_validate_containment_breach():
    p = CspProblem(4, [Block((1, 2, 3), P("x4"), [], []), Block((4,), Polynomial(), [], [])])
    with pytest.raises(CspError, match="block 1 objective uses x4"):
        validate_csp(p)


def test_validate_uncovered():
    p = CspProblem(4, [Block((1, 2), Polynomial()), Block((3,), Polynomial())])
    with pytest.raises(CspError, match=r"\[4\]"):
        validate_csp(p)


def test_rip_examples():
    r = check_rip([(1, 2, 3), (3, 4, 5, 6)])
    assert r.holds and r.witness[1] == 1
    r = check_rip([(1, 2), (2, 3), (1, 3)])
    assert not r.holds and r.violations[2] == (1, 3)
    assert check_rip(load("ex5_4").cliques).holds


def test_rip_is_order_sensitive():
    assert not check_rip([(1, 2), (3, 4), (2, 3)]).holds
    assert check_rip([(1, 2), (2, 3), (3, 4)]).holds


def test_tree_examples():
    t = build_tree([(1, 2, 3, 4), (4, 5, 6), (4, 7, 8)])
    assert t.arcs == [(2, 1), (3, 2)]
    assert t.overlap(2, 1) == (4,) and t.overlap(3, 2) == (4,)
    assert build_tree(load("ex5_4").cliques).arcs == [(2, 1), (3, 2), (4, 1), (5, 4)]
    assert build_tree([(1, 2), (3, 4)]).arcs == []


def test_tree_rejects_non_rip():
    with pytest.raises(CspError, match="clique 3"):
        build_tree([(1, 2), (2, 3), (1, 3)])


def test_detect_csp():
    sep = detect_csp(3, [P("x1^2"), P("x2^4"), P("x3")])
    assert sep.cliques == [(1,), (2,), (3,)]
    dense = detect_csp(3, [P("x1*x2"), P("x2*x3"), P("x1*x3")])
    assert dense.cliques == [(1, 2, 3)]
    chain = detect_csp(5, [P("x1*x2*x3"), P("x2*x3*x4"), P("x3*x4*x5")])
    assert chain.cliques == [(1, 2, 3), (2, 3, 4), (3, 4, 5)]
    validate_csp(chain)


@st.composite
def rip_cliques(draw):
    """Random clique families built to satisfy RIP: every new clique takes
    its overlap from one earlier clique and adds fresh variables."""
    s = draw(st.integers(1, 7))
    cliques = [tuple(range(1, draw(st.integers(1, 4)) + 1))]
    nxt = len(cliques[0]) + 1
    for _ in range(s - 1):
        host = cliques[draw(st.integers(0, len(cliques) - 1))]
        k = draw(st.integers(0, len(host)))
        shared = sorted(draw(st.permutations(host))[:k])
        fresh = list(range(nxt, nxt + draw(st.integers(1, 3))))
        nxt += len(fresh)
        cliques.append(tuple(sorted(shared + fresh)))
    return cliques


@given(rip_cliques())
def test_tree_properties(cliques):
    assert check_rip(cliques).holds
    t = build_tree(cliques)
    assert len(t.arcs) <= len(cliques) - 1
    for i in range(1, len(cliques) + 1):
        assert len(t.parents(i)) <= 1
    union = set()
    for idx, c in enumerate(cliques, start=1):
        inter = set(c) & union
        if inter:
            (par,) = t.parents(idx)
            assert par < idx and inter <= set(cliques[par - 1])
        union |= set(c)
    # every variable's cliques form a connected subtree (union-find)
    for k in union:
        q = [i for i, c in enumerate(cliques, start=1) if k in c]
        root = {i: i for i in q}

        def find(a):
            while root[a] != a:
                a = root[a]
            return a
        for (i, tt) in t.arcs:
            if k in t.overlap(i, tt):
                root[find(i)] = find(tt)
        assert len({find(i) for i in q}) == 1


@given(rip_cliques())
def test_extended_cliques_keep_rip(cliques):
    n = max(max(c) for c in cliques)
    p = CspProblem(n, [Block(c, Polynomial()) for c in cliques])
    t = build_tree(cliques)
    nus = enumerate_nu(t, n)
    ext = extended_cliques(p, t, nus)
    assert check_rip(ext).holds
    for c, e in zip(cliques, ext):
        assert set(c) <= set(e)


def test_chain_cliques():
    assert chain_cliques(3, 2, 3) == [(1, 2, 3), (2, 3, 4), (3, 4, 5)]
    assert chain_cliques(4, 1, 3) == [(1, 2, 3, 4), (4, 5, 6, 7), (7, 8, 9, 10)]
