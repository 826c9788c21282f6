"""KKT-based reformulation with correlatively sparse multiplier expressions.

Each overlap C_{i,t} of the csp tree gets auxiliary variables
nu_{i,t,k} (k in C_{i,t}) that decouple the stationarity condition into
per-block systems

    F_i = grad_i f_i - sum_{t parent of i} nu^{(i,t)} + sum_{t child of i} nu^{(t,i)}
        = sum_j lam_j grad_i c_j.

With a block LME the multipliers become polynomials p^(i) = L_i F_i and the
reformulated problem lives on the extended cliques I_i u J_i.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .csp import Block, CspProblem, CspTree, build_tree, validate_csp
from .lme import Lme, block_lme, build_gradient_matrix, synthesize_lme
from .poly import Polynomial


@dataclass(frozen=True)
class NuVar:
    i: int
    t: int
    k: int
    index: int

    @property
    def name(self) -> str:
        return f"nu_{self.i}_{self.t}_{self.k}"


def enumerate_nu(tree: CspTree, n: int) -> List[NuVar]:
    """nu variables in lexicographic (i, t, k) order, indexed from n + 1."""
    out = []
    idx = n
    for (i, t) in sorted(tree.arcs):
        for k in tree.overlap(i, t):
            idx += 1
            out.append(NuVar(i, t, k, idx))
    return out


def _nu_lookup(nus: Sequence[NuVar]) -> Dict[Tuple[int, int, int], NuVar]:
    return {(u.i, u.t, u.k): u for u in nus}


def build_F(problem: CspProblem, tree: CspTree, nus: Sequence[NuVar], i: int) -> List[Polynomial]:
    """F_i in the local enumeration of I_i."""
    look = _nu_lookup(nus)
    b = problem.block(i)
    parents = tree.parents(i)
    children = tree.children(i)
    F = []
    for k in b.clique:
        p = b.objective.diff(k)
        for t in parents:
            u = look.get((i, t, k))
            if u is not None:
                p = p - Polynomial.var(u.index)
        for t in children:
            u = look.get((t, i, k))
            if u is not None:
                p = p + Polynomial.var(u.index)
        F.append(p)
    return F


def nu_of_block(tree: CspTree, nus: Sequence[NuVar], i: int) -> List[NuVar]:
    """The nu variables entering F_i (the set J_i)."""
    par = set(tree.parents(i))
    ch = set(tree.children(i))
    return [u for u in nus if (u.i == i and u.t in par) or (u.t == i and u.i in ch)]


def extended_cliques(problem: CspProblem, tree: CspTree, nus: Sequence[NuVar]) -> List[Tuple[int, ...]]:
    return [tuple(sorted(set(problem.block(i).clique) | {u.index for u in nu_of_block(tree, nus, i)}))
            for i in range(1, problem.s + 1)]


@dataclass
class BlockReform:
    F: List[Polynomial]
    p: List[Polynomial]
    stationarity: List[Polynomial]          # nonzero rows only
    stationarity_rows: List[int]            # their local row indices
    eqs: List[Polynomial]                   # phi
    ineqs: List[Polynomial]                 # psi


@dataclass
class Reformulation:
    mode: str
    source: CspProblem
    tree: Optional[CspTree]
    nus: List[NuVar]
    lmes: List[Lme]
    blocks: List[BlockReform]
    problem: CspProblem

    @property
    def n_original(self) -> int:
        return self.source.n


def _reform_block(F: List[Polynomial], variables: Sequence[int], ineqs: List[Polynomial],
                  eqs: List[Polynomial], lme: Lme) -> BlockReform:
    p = lme.multipliers(F) if (ineqs or eqs) else []
    m = len(ineqs)
    cons = list(ineqs) + list(eqs)
    stat, rows = [], []
    for r, v in enumerate(variables):
        row = F[r]
        for j, c in enumerate(cons):
            dc = c.diff(v)
            if dc.terms and p[j].terms:
                row = row - p[j] * dc
        if not row.is_zero():
            stat.append(row)
            rows.append(r)
    comp = [p[j] * ineqs[j] for j in range(m)]
    phi = stat + list(eqs) + comp
    psi = list(p[:m]) + list(ineqs)
    return BlockReform(F, p, stat, rows, phi, psi)


def build_reformulation(problem: CspProblem, mode: str = "cslme", deg_cap: Optional[int] = None,
                        lmes: Optional[Sequence[Lme]] = None) -> Reformulation:
    """Reformulate ``problem`` with CS-LMEs (mode 'cslme') or with a single
    LME of the whole constraint set (mode 'lme')."""
    validate_csp(problem)
    if mode == "cslme":
        tree = build_tree(problem.cliques)
        nus = enumerate_nu(tree, problem.n)
        if lmes is None:
            lmes = []
            for i in range(1, problem.s + 1):
                lmes.append(block_lme(problem, i, deg_cap))
        names = problem.names.copy()
        for u in nus:
            names.add(u.name)
        ext = extended_cliques(problem, tree, nus)
        breforms, blocks = [], []
        for i in range(1, problem.s + 1):
            b = problem.block(i)
            F = build_F(problem, tree, nus, i)
            br = _reform_block(F, b.clique, b.ineqs, b.eqs, lmes[i - 1])
            breforms.append(br)
            blocks.append(Block(ext[i - 1], b.objective, br.ineqs, br.eqs))
        out = CspProblem(problem.n + len(nus), blocks, names, problem.name, problem.known_min, problem.box)
        return Reformulation(mode, problem, tree, nus, list(lmes), breforms, out)
    if mode == "lme":
        merged = problem.merged()
        b = merged.blocks[0]
        if lmes is None:
            gm = build_gradient_matrix(b.clique, b.ineqs, b.eqs)
            lmes = [synthesize_lme(gm, deg_cap)]
        F = [b.objective.diff(v) for v in b.clique]
        br = _reform_block(F, b.clique, b.ineqs, b.eqs, lmes[0])
        out = CspProblem(problem.n, [Block(b.clique, b.objective, br.ineqs, br.eqs)],
                         problem.names.copy(), problem.name, problem.known_min, problem.box)
        return Reformulation(mode, problem, None, [], list(lmes), [br], out)
    raise ValueError(f"unknown reformulation mode {mode!r}")


# -- numerical KKT checks --------------------------------------------------

def _eval(p: Polynomial, point) -> float:
    return float(p.evaluate(point))


def kkt_residual(problem: CspProblem, x: Sequence[float], lambdas: Sequence[Sequence[float]],
                 nu: Optional[Sequence[float]] = None, tree: Optional[CspTree] = None) -> Dict[str, float]:
    """Infinity-norm KKT residuals.

    ``lambdas[i-1]`` lists the multipliers of block i (inequalities first).
    Without ``nu`` the aggregate stationarity grad f - sum lam grad c is
    measured; with ``nu`` (and ``tree``) the block systems F_i = ... are.
    """
    x = np.asarray(x, dtype=float)
    n = problem.n
    out = {"stationarity": 0.0, "feasibility": 0.0, "sign": 0.0, "complementarity": 0.0}
    if nu is None:
        grad = np.zeros(n)
        for b, lam in zip(problem.blocks, lambdas):
            for k in b.clique:
                grad[k - 1] += _eval(b.objective.diff(k), x)
            for c, l in zip(b.constraints, lam):
                for k in c.variables():
                    grad[k - 1] -= l * _eval(c.diff(k), x)
        out["stationarity"] = float(np.max(np.abs(grad))) if n else 0.0
    else:
        if tree is None:
            tree = build_tree(problem.cliques)
        nus = enumerate_nu(tree, n)
        point = np.concatenate([x, np.asarray(nu, dtype=float)])
        worst = 0.0
        for i, (b, lam) in enumerate(zip(problem.blocks, lambdas), start=1):
            F = build_F(problem, tree, nus, i)
            for r, k in enumerate(b.clique):
                val = _eval(F[r], point)
                for c, l in zip(b.constraints, lam):
                    val -= l * _eval(c.diff(k), point)
                worst = max(worst, abs(val))
        out["stationarity"] = worst
    for b, lam in zip(problem.blocks, lambdas):
        for j, g in enumerate(b.ineqs):
            gv = _eval(g, x)
            out["feasibility"] = max(out["feasibility"], -gv)
            out["sign"] = max(out["sign"], -lam[j])
            out["complementarity"] = max(out["complementarity"], abs(lam[j] * gv))
        for h in b.eqs:
            out["feasibility"] = max(out["feasibility"], abs(_eval(h, x)))
    out["max"] = max(out.values())
    return out


def recover_nu(problem: CspProblem, tree: CspTree, x: Sequence[float],
               lambdas: Sequence[Sequence[float]]) -> Tuple[np.ndarray, float]:
    """Solve the linear system for nu given a KKT pair (x, lambda).

    For every block i and k in I_i:
        sum_{(i,t)} nu_{i,t,k} - sum_{(t,i)} nu_{t,i,k}
            = d f_i/d x_k - sum_j lam_j d c_j/d x_k.
    Returns the least-squares solution and the infinity-norm residual.
    """
    x = np.asarray(x, dtype=float)
    nus = enumerate_nu(tree, problem.n)
    col = {(u.i, u.t, u.k): j for j, u in enumerate(nus)}
    rows, rhs = [], []
    for i, (b, lam) in enumerate(zip(problem.blocks, lambdas), start=1):
        par, ch = tree.parents(i), tree.children(i)
        for k in b.clique:
            row = np.zeros(len(nus))
            for t in par:
                j = col.get((i, t, k))
                if j is not None:
                    row[j] += 1.0
            for t in ch:
                j = col.get((t, i, k))
                if j is not None:
                    row[j] -= 1.0
            val = _eval(b.objective.diff(k), x)
            for c, l in zip(b.constraints, lam):
                val -= l * _eval(c.diff(k), x)
            rows.append(row)
            rhs.append(val)
    B = np.array(rows).reshape(len(rows), len(nus))
    r = np.array(rhs)
    if len(nus):
        nu, *_ = np.linalg.lstsq(B, r, rcond=None)
    else:
        nu = np.zeros(0)
    res = float(np.max(np.abs(B @ nu - r))) if len(r) else 0.0
    return nu, res
