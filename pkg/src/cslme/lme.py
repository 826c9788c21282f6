"""Exact Lagrange multiplier expressions (LMEs).

For constraints c_1..c_r in local variables x_I the gradient matrix is

    G = [ grad c_1 ... grad c_r ]     (n_I rows)
        [ diag(c_1, ..., c_r)   ]     (r rows)

and an LME is a polynomial matrix [L D] (r x (n_I + r)) with
[L D] G = I identically.  At a KKT pair with F = sum lam_j grad c_j and
lam_j c_j = 0 this gives lam = L F.

Construction tries closed forms for common constraint families first and
otherwise solves a degree-k linear ansatz in exact rational arithmetic.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .csp import CspProblem
from .poly import (ONE, Monomial, PolyMatrix, Polynomial, grlex_key, mono_mul,
                   monomials_upto)


class LmeError(RuntimeError):
    pass


@dataclass
class GradientMatrix:
    variables: Tuple[int, ...]
    ineqs: List[Polynomial]
    eqs: List[Polynomial]
    G: PolyMatrix

    @property
    def constraints(self) -> List[Polynomial]:
        return list(self.ineqs) + list(self.eqs)

    @property
    def r(self) -> int:
        return len(self.ineqs) + len(self.eqs)

    @property
    def n_local(self) -> int:
        return len(self.variables)

    def is_exact_all(self) -> bool:
        return all(c.is_exact() for c in self.constraints)


@dataclass
class Lme:
    variables: Tuple[int, ...]
    L: PolyMatrix   # r x n_local
    D: PolyMatrix   # r x r
    family: str
    degree: int

    @property
    def LD(self) -> PolyMatrix:
        return self.L.hstack(self.D)

    def multipliers(self, F: Sequence[Polynomial]) -> List[Polynomial]:
        """p = L F."""
        return self.L.apply(list(F))


def build_gradient_matrix(variables: Sequence[int], ineqs: Sequence[Polynomial],
                          eqs: Sequence[Polynomial] = ()) -> GradientMatrix:
    variables = tuple(variables)
    cons = list(ineqs) + list(eqs)
    for c in cons:
        extra = set(c.variables()) - set(variables)
        if extra:
            raise LmeError(f"constraint {c} uses variables {sorted(extra)} outside the block")
    r = len(cons)
    rows = [[c.diff(v) for c in cons] for v in variables]
    for j in range(r):
        rows.append([cons[j] if k == j else Polynomial() for k in range(r)])
    G = PolyMatrix(rows) if rows else PolyMatrix([])
    return GradientMatrix(variables, list(ineqs), list(eqs), G)


def block_gradient_matrix(problem: CspProblem, i: int) -> GradientMatrix:
    b = problem.block(i)
    return build_gradient_matrix(b.clique, b.ineqs, b.eqs)


def verify_lme(gm: GradientMatrix, lme: Lme) -> PolyMatrix:
    """Residual [L D] G - I, computed exactly.  Zero means the identity holds."""
    if gm.r == 0:
        return PolyMatrix([])
    prod = lme.LD @ gm.G
    r = gm.r
    one = Polynomial.constant(1)
    return PolyMatrix([[prod[i, j] - (one if i == j else Polynomial()) for j in range(r)]
                       for i in range(r)])


def residual_is_zero(res: PolyMatrix) -> bool:
    return all(p.is_zero() for row in res.rows for p in row)


# -- helpers for closed forms ----------------------------------------------

def _affine(p: Polynomial):
    """(constant, {var: coeff}) if p has degree <= 1, else None."""
    if p.degree() > 1:
        return None
    b = p.constant_term()
    w = {m[0][0]: c for m, c in p.terms.items() if m}
    return b, w


def _ball(p: Polynomial):
    """(b, a, S) if p = b + a * sum_{j in S} x_j^2 with b, a nonzero."""
    b = p.constant_term()
    if b == 0:
        return None
    a = None
    S = []
    for m, c in p.terms.items():
        if not m:
            continue
        if len(m) != 1 or m[0][1] != 2:
            return None
        if a is None:
            a = c
        elif c != a:
            return None
        S.append(m[0][0])
    if a is None:
        return None
    return b, a, sorted(S)


# univariate polynomials as coefficient lists, lowest degree first

def _u_trim(a):
    a = list(a)
    while a and a[-1] == 0:
        a.pop()
    return a


def _u_mul(a, b):
    if not a or not b:
        return []
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return _u_trim(out)


def _u_sub(a, b):
    n = max(len(a), len(b))
    return _u_trim([(a[i] if i < len(a) else 0) - (b[i] if i < len(b) else 0) for i in range(n)])


def _u_divmod(a, b):
    a = _u_trim(a)
    b = _u_trim(b)
    if not b:
        raise ZeroDivisionError
    q = [Fraction(0)] * max(len(a) - len(b) + 1, 1)
    r = list(a)
    while len(r) >= len(b) and r:
        k = len(r) - len(b)
        c = r[-1] / b[-1]
        q[k] = c
        for i, y in enumerate(b):
            r[i + k] -= c * y
        r = _u_trim(r)
    return _u_trim(q), r


def _u_inverse_mod(a, m):
    """s with s*a = 1 mod m, or None if gcd(a, m) != 1."""
    r0, r1 = _u_trim(m), _u_divmod(a, m)[1]
    s0, s1 = [], [Fraction(1)]
    while r1:
        q, r2 = _u_divmod(r0, r1)
        r0, r1 = r1, r2
        s0, s1 = s1, _u_sub(s0, _u_mul(q, s1))
    if len(r0) != 1:
        return None
    c = r0[0]
    return _u_divmod([x / c for x in s0], m)[1]


def _u_deriv(a):
    return _u_trim([a[i] * i for i in range(1, len(a))])


def _to_uni(p: Polynomial, v: int):
    deg = p.degree()
    out = [Fraction(0)] * (deg + 1)
    for m, c in p.terms.items():
        e = m[0][1] if m else 0
        out[e] += c
    return _u_trim(out)


def _from_uni(a, v: int) -> Polynomial:
    return Polynomial({(((v, e),) if e else ONE): c for e, c in enumerate(a) if c != 0})


# -- closed forms ----------------------------------------------------------

def _empty_lme(gm) -> Lme:
    return Lme(gm.variables, PolyMatrix([]), PolyMatrix([]), "none", 0)


def _template_univariate(gm: GradientMatrix) -> Optional[Lme]:
    """Every constraint depends on a single variable.  Per variable the
    constraints must be squarefree and pairwise coprime; the rows then
    come from a Chinese remainder construction."""
    cons = gm.constraints
    if not gm.is_exact_all():
        return None
    owner = []
    for c in cons:
        vs = c.variables()
        if len(vs) != 1:
            return None
        owner.append(vs[0])
    idx = {v: k for k, v in enumerate(gm.variables)}
    r = gm.r
    L = [[Polynomial() for _ in gm.variables] for _ in range(r)]
    D = [[Polynomial() for _ in range(r)] for _ in range(r)]
    for v in sorted(set(owner)):
        group = [j for j in range(r) if owner[j] == v]
        qs = {j: _to_uni(cons[j], v) for j in group}
        dq = {j: _u_deriv(qs[j]) for j in group}
        for j in group:
            others = [Fraction(1)]
            for k in group:
                if k != j:
                    others = _u_mul(others, qs[k])
            s = _u_inverse_mod(_u_mul(dq[j], others), qs[j])
            if s is None:
                return None
            lj = _u_mul(others, s)
            # L_j q_k' + D_jk q_k = delta_jk, D from exact division
            for k in group:
                target = [Fraction(1)] if k == j else []
                num = _u_sub(target, _u_mul(lj, dq[k]))
                quo, rem = _u_divmod(num, qs[k])
                if rem:
                    return None
                D[j][k] = _from_uni(quo, v)
            L[j][idx[v]] = _from_uni(lj, v)
    deg = max([p.degree() for row in L + D for p in row] + [0])
    return Lme(gm.variables, PolyMatrix(L), PolyMatrix(D), "univariate", deg)


def _template_simplex(gm: GradientMatrix) -> Optional[Lme]:
    """One affine constraint b - w'x with b != 0 and at least two variables,
    all others of the form c_j * x_{v_j} on distinct variables."""
    cons = gm.constraints
    main = None
    single = []
    for j, c in enumerate(cons):
        aff = _affine(c)
        if aff is None:
            return None
        b, w = aff
        if len(w) == 1 and b == 0:
            single.append((j, next(iter(w)), next(iter(w.values()))))
        elif b != 0 and len(w) >= 2 and main is None:
            main = (j, b, {v: -c0 for v, c0 in w.items()})
        else:
            return None
    if main is None:
        return None
    if len({v for _, v, _ in single}) != len(single):
        return None
    j1, b, w = main
    S = sorted(set(w) | {v for _, v, _ in single})
    idx = {v: k for k, v in enumerate(gm.variables)}
    r = gm.r
    L = [[Polynomial() for _ in gm.variables] for _ in range(r)]
    D = [[Polynomial() for _ in range(r)] for _ in range(r)]
    for v in S:
        L[j1][idx[v]] = Polynomial.var(v, Fraction(-1) / b)
    for k in range(r):
        D[j1][k] = Polynomial.constant(Fraction(1) / b)
    for j, v, c in single:
        wv = w.get(v, Fraction(0))
        for u in S:
            val = L[j1][idx[u]] * wv
            if u == v:
                val = val + 1
            L[j][idx[u]] = val / c
        for k in range(r):
            D[j][k] = Polynomial.constant(wv / (b * c))
    return Lme(gm.variables, PolyMatrix(L), PolyMatrix(D), "simplex", 1)


def _template_ball(gm: GradientMatrix) -> Optional[Lme]:
    """Single constraint b + a * |x_S|^2 (ball or sphere)."""
    if gm.r != 1:
        return None
    bb = _ball(gm.constraints[0])
    if bb is None:
        return None
    b, a, S = bb
    idx = {v: k for k, v in enumerate(gm.variables)}
    L = [Polynomial() for _ in gm.variables]
    for v in S:
        L[idx[v]] = Polynomial.var(v, Fraction(-1) / (2 * b))
    fam = "sphere" if gm.eqs else "ball"
    return Lme(gm.variables, PolyMatrix([L]), PolyMatrix([[Polynomial.constant(Fraction(1) / b)]]), fam, 1)


def _template_linear(gm: GradientMatrix) -> Optional[Lme]:
    """Single constraint with a constant nonzero gradient."""
    if gm.r != 1:
        return None
    aff = _affine(gm.constraints[0])
    if aff is None or not aff[1]:
        return None
    _, w = aff
    v = min(w)
    L = [Polynomial.constant(Fraction(1) / w[v]) if u == v else Polynomial() for u in gm.variables]
    return Lme(gm.variables, PolyMatrix([L]), PolyMatrix([[Polynomial()]]), "linear", 0)


def template_lme(gm: GradientMatrix) -> Optional[Lme]:
    """Closed-form LME if the constraints match a known family, else None.
    The result is always checked against the identity before returning."""
    if gm.r == 0:
        return _empty_lme(gm)
    if not gm.is_exact_all():
        return None
    for builder in (_template_linear, _template_ball, _template_univariate, _template_simplex):
        lme = builder(gm)
        if lme is not None and residual_is_zero(verify_lme(gm, lme)):
            return lme
    return None


# -- linear ansatz -----------------------------------------------------------

def _solve_rational(rows: List[Tuple[Dict[int, Fraction], List[Fraction]]], ncols: int, nrhs: int):
    """Sparse Gaussian elimination over Q with several right-hand sides.

    Returns (solutions, consistent) where solutions[k] is a dict col->value
    (free columns at zero) for each consistent right-hand side k.
    """
    pivots: Dict[int, Tuple[Dict[int, Fraction], List[Fraction]]] = {}
    order: List[int] = []
    consistent = [True] * nrhs
    for row, rhs in rows:
        row = dict(row)
        rhs = list(rhs)
        # reduce against existing pivots, smallest column first
        while True:
            hit = [c for c in row if c in pivots]
            if not hit:
                break
            c = min(hit)
            f = row[c]
            prow, prhs = pivots[c]
            for cc, vv in prow.items():
                nv = row.get(cc, 0) - f * vv
                if nv == 0:
                    row.pop(cc, None)
                else:
                    row[cc] = nv
            for k in range(nrhs):
                if prhs[k]:
                    rhs[k] -= f * prhs[k]
        if not row:
            for k in range(nrhs):
                if rhs[k] != 0:
                    consistent[k] = False
            continue
        c = min(row)
        piv = row[c]
        row = {cc: vv / piv for cc, vv in row.items()}
        rhs = [x / piv for x in rhs]
        pivots[c] = (row, rhs)
        order.append(c)
    sols = []
    for k in range(nrhs):
        if not consistent[k]:
            sols.append(None)
            continue
        val: Dict[int, Fraction] = {}
        for c in reversed(order):
            prow, prhs = pivots[c]
            x = prhs[k]
            for cc, vv in prow.items():
                if cc != c and cc in val:
                    x -= vv * val[cc]
            if x != 0:
                val[c] = x
        sols.append(val)
    return sols, consistent


def ansatz_lme(gm: GradientMatrix, k: int) -> Optional[Lme]:
    """Try entries of [L D] of degree <= k; None if some row has no solution."""
    nloc, r = gm.n_local, gm.r
    basis = monomials_upto(gm.variables, k)
    ncol_blocks = nloc + r
    unknowns = [(c, mu) for c in range(ncol_blocks) for mu in basis]
    col_of = {u: i for i, u in enumerate(unknowns)}
    # equations indexed by (q, monomial)
    eqs: Dict[Tuple[int, Monomial], Dict[int, Fraction]] = {}
    Gm = gm.G
    for c in range(ncol_blocks):
        for q in range(r):
            g = Gm[c, q]
            if g.is_zero():
                continue
            for mu in basis:
                u = col_of[(c, mu)]
                for m, coef in g.terms.items():
                    key = (q, mono_mul(mu, m))
                    row = eqs.setdefault(key, {})
                    row[u] = row.get(u, 0) + coef
    # the right-hand sides: delta_{row,q} at the constant monomial
    for q in range(r):
        eqs.setdefault((q, ONE), {})
    keys = sorted(eqs, key=lambda t: (t[0], grlex_key(t[1])))
    rows = []
    for key in keys:
        row = {u: v for u, v in eqs[key].items() if v != 0}
        q, m = key
        rhs = [Fraction(1) if (m == ONE and q == target) else Fraction(0) for target in range(r)]
        rows.append((row, rhs))
    sols, ok = _solve_rational(rows, len(unknowns), r)
    if not all(ok):
        return None
    L = [[Polynomial() for _ in range(nloc)] for _ in range(r)]
    D = [[Polynomial() for _ in range(r)] for _ in range(r)]
    for j in range(r):
        acc: Dict[int, Dict[Monomial, Fraction]] = {}
        for u, val in sols[j].items():
            c, mu = unknowns[u]
            acc.setdefault(c, {})[mu] = val
        for c, terms in acc.items():
            p = Polynomial(terms)
            if c < nloc:
                L[j][c] = p
            else:
                D[j][c - nloc] = p
    return Lme(gm.variables, PolyMatrix(L), PolyMatrix(D), "ansatz", k)


def default_degree_cap(gm: GradientMatrix) -> int:
    return max([2] + [c.degree() for c in gm.constraints])


def synthesize_lme(gm: GradientMatrix, deg_cap: Optional[int] = None,
                   use_templates: bool = True) -> Lme:
    """Closed form if available, otherwise the smallest ansatz degree
    k <= deg_cap that works.  Raises LmeError when none does."""
    if use_templates:
        t = template_lme(gm)
        if t is not None:
            return t
    if gm.r == 0:
        return _empty_lme(gm)
    if not gm.is_exact_all():
        raise LmeError("LME synthesis needs exact (rational) constraint coefficients")
    cap = default_degree_cap(gm) if deg_cap is None else deg_cap
    for k in range(cap + 1):
        lme = ansatz_lme(gm, k)
        if lme is not None:
            if not residual_is_zero(verify_lme(gm, lme)):
                raise LmeError("internal error: ansatz solution fails the identity")
            return lme
    raise LmeError(f"no LME with entries of degree <= {cap} (the constraints may be "
                   f"singular somewhere, e.g. a repeated root or a common zero)")


def block_lme(problem: CspProblem, i: int, deg_cap: Optional[int] = None) -> Lme:
    try:
        return synthesize_lme(block_gradient_matrix(problem, i), deg_cap)
    except LmeError as e:
        raise LmeError(f"block {i}: {e}") from None
