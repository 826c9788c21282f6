"""Moment relaxations (sparse or dense) assembled as SDPs.

All cliques share one moment vector y indexed by the monomials of degree
<= 2d supported in some clique; a monomial common to several cliques gets
a single index.  Index 0 is the constant monomial and y_0 = 1 is
substituted, so the SDP variables are y_1 .. y_{M-1}.

Per clique the relaxation has the moment matrix M_d, one localizing
matrix of order d - ceil(deg g / 2) per inequality g, and for each
equality h the linear rows L_y(mu * h) = 0 for |mu| <= 2(d - ceil(deg h / 2)),
i.e. every entry of its localizing matrix vanishes.
Localizers of order 0 are gathered into one diagonal block.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .csp import CspProblem
from .poly import Monomial, Polynomial, grlex_key, mono_mul, monomials_upto
from .sdp import BlockEntries, SdpProblem, SdpSolution, solve_sdp, trace_bounded


class MomentError(ValueError):
    pass


def moment_basis(variables: Sequence[int], d: int) -> List[Monomial]:
    """Monomials of degree <= d in ``variables``, grlex ascending."""
    return monomials_upto(variables, d)


def min_order(problem: CspProblem) -> int:
    """Smallest admissible relaxation order."""
    return max(1, math.ceil(problem.max_degree() / 2))


class MomentIndex:
    """Shared numbering of the monomials of degree <= 2d over the cliques."""

    def __init__(self, cliques: Sequence[Sequence[int]], d: int):
        self.d = d
        self.cliques = [tuple(sorted(c)) for c in cliques]
        allm = set()
        per = []
        for c in self.cliques:
            ms = monomials_upto(c, 2 * d)
            per.append(ms)
            allm.update(ms)
        self.monomials: List[Monomial] = sorted(allm, key=grlex_key)
        self.index: Dict[Monomial, int] = {m: i for i, m in enumerate(self.monomials)}
        self.base = 2 * d + 1
        self._codes = []
        for c, ms in zip(self.cliques, per):
            pos = {v: p for p, v in enumerate(c)}
            if self.base ** len(c) < 2 ** 62:
                codes = np.array([self._code(m, pos) for m in ms], dtype=np.int64)
                gids = np.array([self.index[m] for m in ms], dtype=np.int64)
                order = np.argsort(codes)
                self._codes.append((pos, codes[order], gids[order]))
            else:
                self._codes.append((pos, None, None))

    def __len__(self):
        return len(self.monomials)

    def _code(self, m: Monomial, pos) -> int:
        b = self.base
        return sum(e * b ** pos[v] for v, e in m)

    def lookup_codes(self, clique_id: int, codes: np.ndarray) -> np.ndarray:
        pos, sc, gid = self._codes[clique_id]
        at = np.searchsorted(sc, codes)
        at = np.minimum(at, len(sc) - 1)
        if not np.all(sc[at] == codes):
            raise MomentError("monomial outside the moment index")
        return gid[at]

    def codes_of(self, clique_id: int, monos: Sequence[Monomial]) -> np.ndarray:
        pos = self._codes[clique_id][0]
        return np.array([self._code(m, pos) for m in monos], dtype=np.int64)

    def uses_codes(self, clique_id: int) -> bool:
        return self._codes[clique_id][1] is not None


@dataclass
class BlockInfo:
    clique: int        # 1-based
    kind: str          # 'moment', 'localizer'
    label: str
    order: int
    size: int


@dataclass
class MomentRelaxation:
    problem: CspProblem
    order: int
    dense: bool
    index: MomentIndex
    sdp: SdpProblem
    blocks: List[BlockInfo]
    objective_scale: float
    n_equality_rows: int
    build_seconds: float = 0.0
    n_face_reduced: int = 0     # rows removed by facial reduction

    def summary(self) -> Dict[str, object]:
        big = [b.size for b in self.blocks]
        return {"moments": len(self.index), "psd_blocks": len(self.sdp.block_sizes),
                "largest_block": max(big) if big else 0, "equality_rows": self.n_equality_rows,
                "order": self.order, "dense": self.dense, "face_reduced": self.n_face_reduced}


def _normalize(p: Polynomial) -> Tuple[Polynomial, float]:
    s = p.max_abs_coeff()
    if s == 0:
        return p, 1.0
    return p.to_float() * (1.0 / s), s


def _terms(p: Polynomial):
    return [(m, float(c)) for m, c in p.terms.items()]


def _face_keep(B: List[Monomial], variables: Sequence[int], eqs: List[Polynomial], t: int,
               qdeg: int, d: int) -> np.ndarray:
    """Rows of a block of order t (localizing a polynomial of degree qdeg,
    0 for the moment matrix) that survive facial reduction.

    If the equality rows of h reach every product q x^beta x^mu h with
    |beta| <= t, |mu| <= t - deg h, the block maps vec(x^mu h) to zero for
    every feasible y, so it is psd iff its principal submatrix outside a
    pivot set of those kernel vectors is psd.
    """
    r = len(B)
    pos = {m: a for a, m in enumerate(B)}
    cols = []
    for h in eqs:
        dh = h.degree()
        if dh < 0 or dh > t:
            continue
        if qdeg + 2 * t - dh > 2 * (d - math.ceil(dh / 2)):
            continue
        for mu in monomials_upto(variables, t - dh):
            vec = np.zeros(r)
            ok = True
            for m, cf in h.terms.items():
                a = pos.get(mono_mul(m, mu))
                if a is None:
                    ok = False
                    break
                vec[a] += float(cf)
            if ok:
                cols.append(vec)
    if not cols:
        return np.arange(r)
    K = np.array(cols)                      # kernel vectors as rows
    _, R, piv = sla.qr(K, pivoting=True, mode="economic")
    dg = np.abs(np.diag(R))
    rank = int(np.sum(dg > 1e-9 * dg[0])) if dg.size and dg[0] > 0 else 0
    drop = set(piv[:rank].tolist())
    return np.array([a for a in range(r) if a not in drop], dtype=np.int64)


def _assemble(problem: CspProblem, cliques: List[Tuple[int, ...]], groups, d: int,
              scale: bool, dense: bool, reduce_faces: bool = True) -> MomentRelaxation:
    t0 = time.perf_counter()
    n_dropped = 0
    f_total = Polynomial()
    for g in groups:
        f_total = f_total + g["objective"]
    for g in groups:
        for p in [g["objective"]] + g["ineqs"] + g["eqs"]:
            if p.degree() > 2 * d:
                raise MomentError(f"relaxation order {d} is too small for a polynomial of degree {p.degree()}")
    index = MomentIndex(cliques, d)
    M = len(index)
    fs = f_total.max_abs_coeff() if scale else 1.0
    if fs == 0:
        fs = 1.0
    c = np.zeros(M - 1)
    const = 0.0
    for m, coef in f_total.terms.items():
        a = index.index.get(m)
        if a is None:
            raise MomentError(f"objective monomial {m} is not supported in any clique")
        if a == 0:
            const += float(coef) / fs
        else:
            c[a - 1] += float(coef) / fs

    block_sizes: List[int] = []
    block_entries: List[BlockEntries] = []
    infos: List[BlockInfo] = []
    diag_k, diag_i, diag_v = [], [], []
    diag_count = 0
    diag_labels = []
    eq_rows, eq_cols, eq_vals, eq_rhs = [], [], [], []
    n_eq = 0
    basis_cache: Dict[Tuple[int, int], List[Monomial]] = {}

    def basis(cid, t):
        key = (cid, t)
        if key not in basis_cache:
            basis_cache[key] = moment_basis(cliques[cid], t)
        return basis_cache[key]

    def gid_of(cid, monos_codes_or_list):
        return index.lookup_codes(cid, monos_codes_or_list)

    for cid, g in enumerate(groups):
        use_codes = index.uses_codes(cid)
        if not use_codes:
            raise MomentError("clique too large for the moment index encoding")
        loc = [(None, "moment", d, 0)]
        for j, q in enumerate(g["ineqs"]):
            qq = _normalize(q)[0] if scale else q.to_float()
            t = d - math.ceil(max(q.degree(), 0) / 2)
            loc.append((qq, f"ineq {j + 1}", t, max(q.degree(), 0)))
        eqn = [(_normalize(h)[0] if scale else h.to_float()) for h in g["eqs"]]
        for q, label, t, qdeg in loc:
            B = basis(cid, t)
            if reduce_faces and eqn:
                keep = _face_keep(B, cliques[cid], eqn, t, qdeg, d)
                n_dropped += len(B) - len(keep)
                B = [B[a] for a in keep]
            r = len(B)
            if r == 0:
                continue
            bc = index.codes_of(cid, B)
            iu, ju = np.triu_indices(r)
            base_codes = bc[iu] + bc[ju]
            ks, ii, jj, vv = [], [], [], []
            terms = [((), 1.0)] if q is None else _terms(q)
            for mono, coef in terms:
                code = index.codes_of(cid, [mono])[0]
                gids = gid_of(cid, base_codes + code)
                ks.append(gids)
                ii.append(iu)
                jj.append(ju)
                vv.append(np.full(len(gids), coef))
            k = np.concatenate(ks)
            i = np.concatenate(ii)
            j = np.concatenate(jj)
            v = np.concatenate(vv)
            # y_0 = 1 goes to the constant matrix: S = sum y_k F_k - F_0
            v = np.where(k == 0, -v, v)
            if r == 1:
                diag_k.append(k)
                diag_i.append(np.full(len(k), diag_count))
                diag_v.append(v)
                diag_count += 1
                diag_labels.append((cid + 1, label))
                continue
            block_sizes.append(r)
            block_entries.append(BlockEntries.from_lists(k, i, j, v))
            infos.append(BlockInfo(cid + 1, "moment" if q is None else "localizer", label, t, r))
        for j, h in enumerate(g["eqs"]):
            hh = _normalize(h)[0] if scale else h.to_float()
            t = 2 * (d - math.ceil(max(h.degree(), 0) / 2))
            mus = moment_basis(cliques[cid], t)
            mc = index.codes_of(cid, mus)
            for mono, coef in _terms(hh):
                code = index.codes_of(cid, [mono])[0]
                gids = gid_of(cid, mc + code)
                eq_rows.append(np.arange(n_eq, n_eq + len(mus)))
                eq_cols.append(gids)
                eq_vals.append(np.full(len(mus), coef))
            n_eq += len(mus)
    if diag_count:
        k = np.concatenate(diag_k)
        i = np.concatenate(diag_i)
        v = np.concatenate(diag_v)
        block_sizes.append(-diag_count)
        block_entries.append(BlockEntries.from_lists(k, i, i, v))
        infos.append(BlockInfo(0, "diagonal", f"{diag_count} scalar localizers", 0, diag_count))
    E = None
    e = None
    if n_eq:
        rows = np.concatenate(eq_rows)
        cols = np.concatenate(eq_cols)
        vals = np.concatenate(eq_vals)
        const_part = cols == 0
        e = np.zeros(n_eq)
        np.add.at(e, rows[const_part], -vals[const_part])
        keep = ~const_part
        E = sp.csr_matrix((vals[keep], (rows[keep], cols[keep] - 1)), shape=(n_eq, M - 1))
        E.sum_duplicates()
        E.eliminate_zeros()
        # drop rows that vanish identically (e.g. repeated shifts)
        nnz = np.diff(E.indptr)
        good = (nnz > 0) | (np.abs(e) > 0)
        E = E[good]
        e = e[good]
        n_eq = E.shape[0]
    sdp = SdpProblem(c, block_sizes, block_entries, E, e, const)
    return MomentRelaxation(problem, d, dense, index, sdp, infos, fs, n_eq, time.perf_counter() - t0, n_dropped)


def assemble_cs_moment(problem: CspProblem, d: int, scale: bool = True,
                       reduce_faces: bool = True) -> MomentRelaxation:
    """Correlatively sparse moment relaxation of order d.

    With ``reduce_faces`` the rows of each psd block that the equality
    rows force into its kernel are removed (an equivalent, smaller SDP
    that has strictly feasible points more often)."""
    cliques = [b.clique for b in problem.blocks]
    groups = [{"objective": b.objective, "ineqs": list(b.ineqs), "eqs": list(b.eqs)} for b in problem.blocks]
    return _assemble(problem, cliques, groups, d, scale, False, reduce_faces)


def assemble_dense_moment(problem: CspProblem, d: int, scale: bool = True,
                          reduce_faces: bool = True) -> MomentRelaxation:
    """Dense relaxation: one clique holding every variable."""
    merged = problem.merged()
    b = merged.blocks[0]
    groups = [{"objective": b.objective, "ineqs": list(b.ineqs), "eqs": list(b.eqs)}]
    return _assemble(problem, [b.clique], groups, d, scale, True, reduce_faces)


@dataclass
class BoundReport:
    bound: float
    status: str
    order: int
    mode: str
    primal_objective: float
    dual_objective: float
    relative_gap: float
    iterations: int
    seconds: float
    size: Dict[str, object] = field(default_factory=dict)
    first_moments: Optional[np.ndarray] = None
    primal_infeasibility: float = math.nan
    dual_infeasibility: float = math.nan
    trace_bound: Optional[float] = None
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status in ("optimal", "near-optimal")


def extract_bound(relax: MomentRelaxation, sol: SdpSolution, mode: str = "", seconds: float = 0.0,
                  trace_bound: Optional[float] = None) -> BoundReport:
    """Lower bound from a solved relaxation, undoing the objective scaling.

    The bound is the sum-of-squares (X-side) value: any X satisfying the
    linear constraints certifies it, so it stays meaningful when the
    moment side is only approximately optimal.  Both values are kept."""
    s = relax.objective_scale
    n = relax.problem.n
    first = np.full(n, np.nan)
    if len(sol.y):
        for v in range(1, n + 1):
            a = relax.index.index.get(((v, 1),))
            if a is not None:
                first[v - 1] = sol.y[a - 1]
    return BoundReport(sol.dual_objective * s, sol.status, relax.order, mode,
                       sol.primal_objective * s, sol.dual_objective * s, sol.relative_gap,
                       sol.iterations, seconds, relax.summary(), first,
                       sol.primal_infeasibility, sol.dual_infeasibility, trace_bound, sol.message)


def solve_relaxation(relax: MomentRelaxation, tol: float = 1e-8, max_iter: int = 200,
                     mode: str = "", verbose: bool = False,
                     trace_bound: Optional[float] = None) -> BoundReport:
    """Solve the relaxation.  With ``trace_bound`` the X-side gets the
    extra constraint sum tr(X_b) <= T (see ``trace_bounded``); use it when
    the plain solve fails on a relaxation whose moment side has no
    interior."""
    t0 = time.perf_counter()
    sdp = relax.sdp if trace_bound is None else trace_bounded(relax.sdp, trace_bound)
    sol = solve_sdp(sdp, tol=tol, max_iter=max_iter, verbose=verbose)
    if trace_bound is not None and len(sol.y):
        sol.y = sol.y[:-1]
    return extract_bound(relax, sol, mode, time.perf_counter() - t0 + relax.build_seconds, trace_bound)
