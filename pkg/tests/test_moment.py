import math

import numpy as np
import pytest

from cslme.csp import Block, CspProblem
from cslme.instances import load, simplex_chain
from cslme.moment import (MomentError, assemble_cs_moment, assemble_dense_moment, min_order,
                          moment_basis, solve_relaxation)
from cslme.oracle import local_search_upper_bound
from cslme.poly import Polynomial, parse_polynomial as P
from cslme.reform import build_reformulation


def test_moment_basis_sizes():
    assert moment_basis((1,), 2) == [(), ((1, 1),), ((1, 2),)]
    assert len(moment_basis((1, 2, 3, 4, 5), 3)) == 56
    assert len(moment_basis((1, 2, 3, 4, 5, 6), 3)) == 84


def _univariate():
    return CspProblem(1, [Block((1,), P("x1^2"))])


def test_univariate_square():
    r = assemble_cs_moment(_univariate(), 1)
    assert r.sdp.block_sizes == [2]
    assert r.sdp.m == 2
    # objective is y_2 (the x^2 moment), M_1 = [[1, y1], [y1, y2]]
    assert np.allclose(r.sdp.c * r.objective_scale, [0, 1])
    M0 = r.sdp.dense_block(0, 0)
    assert np.allclose(M0, [[-1, 0], [0, 0]])
    rep = solve_relaxation(r)
    assert rep.status == "optimal" and abs(rep.bound) <= 1e-8


def test_dense_equals_sparse_on_trivial_pattern():
    p = _univariate()
    a = assemble_cs_moment(p, 1).sdp
    b = assemble_dense_moment(p, 1).sdp
    assert a.block_sizes == b.block_sizes and np.array_equal(a.c, b.c)


def test_order_too_small():
    with pytest.raises(MomentError):
        assemble_cs_moment(load("ex5_2"), 2)
    assert min_order(load("ex5_2")) == 3


def test_ex51_reformulation_sizes():
    q = build_reformulation(load("ex5_1"), "cslme").problem
    r = assemble_cs_moment(q, 2)
    moments = [b for b in r.blocks if b.kind == "moment"]
    assert [b.size for b in moments] == [15, 21]
    # 16 inequalities (8 multipliers, 8 original constraints) all localize;
    # the order-0 ones share one diagonal block
    loc = [b for b in r.blocks if b.kind == "localizer"]
    diag = [b for b in r.blocks if b.kind == "diagonal"]
    assert len(loc) + sum(b.size for b in diag) == 16
    assert r.sdp.block_sizes[-1] == -diag[0].size
    assert r.n_equality_rows > 0


def test_dense_ex51():
    r = assemble_dense_moment(load("ex5_1"), 2)
    assert max(abs(n) for n in r.sdp.block_sizes) == 28


def test_disjoint_cliques_share_only_constant():
    p = CspProblem(2, [Block((1,), P("x1^2")), Block((2,), P("x2^2"))])
    r = assemble_cs_moment(p, 1)
    for b in range(len(r.sdp.block_sizes)):
        be = r.sdp.blocks[b]
        vars_ = {m for k in set(be.k.tolist()) if k > 0 for m in r.index.monomials[k]}
        assert len({v for v, _ in vars_}) <= 1


def test_shared_monomials_single_index():
    q = build_reformulation(load("ex5_1"), "cslme").problem
    r = assemble_cs_moment(q, 2)
    # x3 * nu lives in both cliques and must have one index
    assert len(r.index.monomials) == len(set(r.index.monomials))
    assert ((3, 1), (7, 1)) in r.index.index


def _dirac(r, z):
    y = np.array([math.prod(z[v - 1] ** e for v, e in m) for m in r.index.monomials[1:]])
    return y


@pytest.mark.parametrize("name,mode", [("ex5_1", "none"), ("ex5_1", "cslme"), ("ex5_3", "none")])
def test_evaluation_map_is_feasible(name, mode):
    p = load(name)
    ub = local_search_upper_bound(p, starts=8, seed=1)
    R = None if mode == "none" else build_reformulation(p, mode)
    q = p if R is None else R.problem
    z = list(ub.x)
    if R is not None:
        # nu from the block systems (ex5_1 has one nu); pick the best on a grid
        from cslme.reform import kkt_residual
        best = min(np.linspace(-3, 3, 6001), key=lambda nu: kkt_residual(
            p, ub.x, [[float(t.evaluate(z + [nu])) for t in b.p] for b in R.blocks], [nu], R.tree)["max"])
        z = z + [best]
    r = assemble_cs_moment(q, min_order(q), reduce_faces=False)
    y = _dirac(r, z)
    S = r.sdp.slack(y)
    tol = 1e-8 if mode == "none" else 1e-5
    assert min(np.linalg.eigvalsh(b)[0] for b in S) >= -tol * max(1, max(np.abs(b).max() for b in S))
    if r.sdp.E.shape[0]:
        assert np.max(np.abs(r.sdp.E @ y - r.sdp.e)) <= tol * 10
    val = (r.sdp.c @ y + r.sdp.const) * r.objective_scale
    assert abs(val - float(q.objective().evaluate(z))) <= 1e-8


def test_facial_reduction_drops_implied_rows_only():
    q = build_reformulation(load("ex5_1"), "cslme").problem
    a = assemble_cs_moment(q, 2, reduce_faces=False)
    b = assemble_cs_moment(q, 2, reduce_faces=True)
    ra = solve_relaxation(a)
    rb = solve_relaxation(b)
    assert ra.ok and rb.ok
    assert abs(ra.bound - rb.bound) <= 1e-6


def test_scaling_is_undone():
    p = CspProblem(1, [Block((1,), P("1000*x1^2 - 2000*x1"))])
    r1 = solve_relaxation(assemble_cs_moment(p, 1, scale=True))
    r2 = solve_relaxation(assemble_cs_moment(p, 1, scale=False))
    assert abs(r1.bound + 1000) <= 1e-7 * 1000 and abs(r2.bound + 1000) <= 1e-7 * 1000


def test_chain_extended_clique_size():
    q = build_reformulation(simplex_chain(), "cslme").problem
    assert max(len(c) for c in q.cliques) == 6
