import numpy as np
import pytest
import scipy.sparse as sp

from cslme.instances import load
from cslme.moment import assemble_cs_moment
from cslme.reform import build_reformulation
from cslme.sdp import (BlockEntries, SdpaFormatError, SdpError, SdpProblem, check_solution, export_sdpa,
                       from_sdpa_string, import_sdpa, import_sdpa_solution, parse_sdpa_solution, solve_sdp,
                       to_sdpa_string, trace_bounded)


def eig_problem(F0_diag=(1.0, 2.0)):
    # min y  s.t.  y I - F0 psd
    be = BlockEntries.from_lists([0, 0, 1, 1], [0, 1, 0, 1], [0, 1, 0, 1], list(F0_diag) + [1.0, 1.0])
    return SdpProblem(np.array([1.0]), [2], [be])


def test_trivial_eigenvalue_problem():
    # min <diag(1,2), X> s.t. tr X = 1  is the X side with F0 = -diag(1,2)
    sol = solve_sdp(eig_problem((-1.0, -2.0)))
    assert sol.status == "optimal"
    assert abs(-sol.dual_objective - 1.0) <= 1e-8
    assert np.allclose(sol.X[0], [[1, 0], [0, 0]], atol=1e-6)


def test_sdpa_convention_example_value():
    sol = solve_sdp(eig_problem())
    assert sol.status == "optimal" and abs(sol.primal_objective - 2.0) <= 1e-8


def test_export_small_example():
    text = to_sdpa_string(eig_problem())
    lines = text.splitlines()
    assert lines == ["1", "1", "2", "1", "0 1 1 1 1", "0 1 2 2 2", "1 1 1 1 1", "1 1 2 2 1"]


def test_export_round_trip(tmp_path):
    p = eig_problem()
    path = tmp_path / "a.dat-s"
    export_sdpa(p, path)
    q = import_sdpa(path)
    assert to_sdpa_string(q) == to_sdpa_string(p)


def test_export_with_equalities_round_trip():
    q = build_reformulation(load("ex5_1"), "cslme").problem
    P = assemble_cs_moment(q, 2).sdp
    text = to_sdpa_string(P)
    Q = from_sdpa_string(text)
    assert to_sdpa_string(Q) == text
    assert np.array_equal(P.c, Q.c) and P.block_sizes == Q.block_sizes
    assert (P.E != Q.E).nnz == 0 and np.array_equal(P.e, Q.e)


def test_seventeen_digits():
    be = BlockEntries.from_lists([0, 1], [0, 0], [0, 0], [0.1, 1 / 3])
    p = SdpProblem(np.array([2 / 3]), [-1], [be])
    text = to_sdpa_string(p)
    assert "0.33333333333333331" in text
    assert from_sdpa_string(text).blocks[0].v.tolist() == [0.1, 1 / 3]


def test_malformed_sdpa():
    with pytest.raises(SdpaFormatError):
        from_sdpa_string("1\n1\n")
    with pytest.raises(SdpaFormatError):
        from_sdpa_string("1\n2\n2\n1\n")


def test_problem_validation():
    with pytest.raises(SdpError):
        SdpProblem(np.array([1.0]), [2], [BlockEntries.from_lists([2], [0], [0], [1.0])])
    with pytest.raises(SdpError):
        SdpProblem(np.array([1.0]), [-2], [BlockEntries.from_lists([1], [0], [1], [1.0])])


def test_moment_sdp_for_square():
    # min y2 s.t. [[1, y1], [y1, y2]] psd
    be = BlockEntries.from_lists([0, 1, 2], [0, 0, 1], [0, 1, 1], [-1.0, 1.0, 1.0])
    sol = solve_sdp(SdpProblem(np.array([0.0, 1.0]), [2], [be]))
    assert sol.status == "optimal" and abs(sol.primal_objective) <= 1e-8


def test_unbounded_and_infeasible():
    p = SdpProblem(np.array([-1.0]), [-1], [BlockEntries.from_lists([1], [0], [0], [1.0])])
    assert solve_sdp(p).status == "unbounded"
    p = SdpProblem(np.array([1.0]), [-2], [BlockEntries.from_lists([0, 1, 1], [0, 0, 1], [0, 0, 1], [1.0, 1.0, -1.0])])
    assert solve_sdp(p).status == "infeasible"
    E = sp.csr_matrix(np.array([[1.0], [1.0]]))
    p = SdpProblem(np.array([1.0]), [-1], [BlockEntries.from_lists([1], [0], [0], [1.0])], E, np.array([0.0, 1.0]))
    assert solve_sdp(p).status == "infeasible"


def random_feasible(rng, total=80):
    """Blocks and constraints with a planted strictly feasible pair."""
    sizes = []
    left = int(rng.integers(3, total + 1))
    while left > 0:
        s = int(min(left, rng.integers(1, 25)))
        sizes.append(-s if rng.random() < 0.2 else s)
        left -= s
    m = int(rng.integers(1, 25))
    y0 = rng.normal(size=m)
    c = np.zeros(m)
    blocks = []
    for n in sizes:
        N = abs(n)
        ks, is_, js, vs = [], [], [], []
        F0 = -np.eye(N) * rng.uniform(0.5, 2)
        X0 = np.eye(N) * rng.uniform(0.5, 2)
        for k in range(1, m + 1):
            if n < 0:
                A = np.diag(rng.normal(size=N))
            else:
                A = rng.normal(size=(N, N))
                A = (A + A.T) / 2
                A[np.abs(A) < 0.8] = 0
            F0 += y0[k - 1] * A
            c[k - 1] += float(np.sum(A * X0))
            ii, jj = np.nonzero(np.triu(A))
            ks += [k] * len(ii)
            is_ += ii.tolist()
            js += jj.tolist()
            vs += A[ii, jj].tolist()
        ii, jj = np.nonzero(np.triu(F0))
        ks += [0] * len(ii)
        is_ += ii.tolist()
        js += jj.tolist()
        vs += F0[ii, jj].tolist()
        blocks.append(BlockEntries.from_lists(ks, is_, js, vs))
    return SdpProblem(c, sizes, blocks)


def test_random_strictly_feasible():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        p = random_feasible(rng)
        sol = solve_sdp(p, tol=1e-8, max_iter=60)
        assert sol.status == "optimal", sol.message
        assert sol.dual_objective <= sol.primal_objective + 1e-7 * (1 + abs(sol.primal_objective))
        res = check_solution(p, sol.y, sol.X)
        assert res["min_eig_S"] >= -1e-8 and res["min_eig_X"] >= -1e-8


def test_determinism():
    p = random_feasible(np.random.default_rng(5))
    a, b = solve_sdp(p), solve_sdp(p)
    assert a.history == b.history
    assert np.array_equal(a.y, b.y) and all(np.array_equal(x, y) for x, y in zip(a.X, b.X))


def test_check_solution_identity_and_perturbation():
    p = eig_problem((-1.0, -2.0))
    res = check_solution(p, np.array([-1.0]), [np.diag([1.0, 0.0])])
    assert res["min_eig_S"] == 0 and res["dual_residual"] == 0 and res["gap"] == 0
    res = check_solution(p, np.array([-1.0]), [np.diag([1.1, -0.05])])
    assert res["dual_residual"] > 0 and res["min_eig_X"] < 0


def test_ex51_solution_residuals():
    q = build_reformulation(load("ex5_1"), "cslme").problem
    r = assemble_cs_moment(q, 2)
    sol = solve_sdp(r.sdp)
    assert sol.status == "optimal"
    res = check_solution(r.sdp, sol.y, sol.X)
    scale = 1 + max(np.abs(b.v).max() for b in r.sdp.blocks)
    assert res["eq_residual"] <= 1e-7 and res["min_eig_S"] >= -1e-7 * scale
    assert res["dual_residual"] <= 1e-7


def test_trace_bounded_is_a_valid_bound():
    p = eig_problem((-1.0, -2.0))
    # tr X = 1 does not fit under a trace bound of 0.5, so the y side runs off
    assert solve_sdp(trace_bounded(p, 0.5)).status == "unbounded"
    for T in (1.0, 10.0):
        sol = solve_sdp(trace_bounded(p, T))
        assert sol.ok
        assert abs(sol.dual_objective + 1.0) <= 1e-7
        assert sum(np.trace(X) for X in sol.X[:1]) <= T + 1e-7


def test_import_solution(tmp_path):
    p = eig_problem((-1.0, -2.0))
    out = tmp_path / "out.txt"
    out.write_text("phase.value = pdOPT\nobjValPrimal = -1.0\nobjValDual = -1.0\nxVec = \n{-1.0}\n")
    sol = import_sdpa_solution(out, p)
    assert sol.status == "optimal" and sol.phase == "pdOPT" and sol.y.tolist() == [-1.0]
    out.write_text("objValPrimal = -0.5\nxVec = \n{-1.0}\n")
    assert import_sdpa_solution(out, p).status == "near-optimal"
    out.write_text("objValPrimal = -1.0\nxVec = \n{-1.0,\n")
    with pytest.raises(SdpaFormatError, match="line 3"):
        import_sdpa_solution(out, p)
    csdp = tmp_path / "out.sol"
    csdp.write_text("-1.0\n2 1 1 1 1.0\n")
    sol = import_sdpa_solution(csdp, p)
    assert sol.status == "optimal" and sol.X[0][0, 0] == 1.0


def test_parse_solution_bad_number():
    with pytest.raises(SdpaFormatError, match="line 2"):
        parse_sdpa_solution("objValPrimal = 1\nxVec = {1.0, abc}\n")
