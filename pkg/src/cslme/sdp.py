"""Semidefinite programs in SDPA convention and a primal-dual interior
point solver.

Problem (``y`` side, a minimization)::

    min  c'y + const
    s.t. S_b = sum_k y_k F_{b,k} - F_{b,0}  psd   for every block b
         E y = e                                   (free equality rows)

and its dual (``X`` side, a maximization)::

    max  <F_0, X> + e'w + const
    s.t. <F_k, X> + (E'w)_k = c_k,   X psd.

Weak duality reads dual objective <= primal objective.  Blocks with a
negative size are diagonal (LP) blocks, as in the SDPA format.

The solver is an infeasible-start HKM predictor-corrector method.  The
equality rows are eliminated once by a pivoted QR, y = y_p + N z.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

STATUSES = ("optimal", "near-optimal", "infeasible", "unbounded", "max-iter", "numerical-failure")


class SdpError(RuntimeError):
    pass


class SdpaFormatError(ValueError):
    pass


@dataclass
class BlockEntries:
    """Coefficients of one block: F_{k}[i, j] = v for i <= j (0-based)."""
    k: np.ndarray
    i: np.ndarray
    j: np.ndarray
    v: np.ndarray

    @classmethod
    def empty(cls) -> "BlockEntries":
        z = np.zeros(0, dtype=np.int64)
        return cls(z, z.copy(), z.copy(), np.zeros(0))

    @classmethod
    def from_lists(cls, k, i, j, v) -> "BlockEntries":
        k = np.asarray(k, dtype=np.int64)
        i = np.asarray(i, dtype=np.int64)
        j = np.asarray(j, dtype=np.int64)
        v = np.asarray(v, dtype=float)
        lo = np.minimum(i, j)
        hi = np.maximum(i, j)
        return cls(k, lo, hi, v).canonical()

    def canonical(self) -> "BlockEntries":
        """Sum duplicates, drop zeros, sort by (k, i, j)."""
        if len(self.k) == 0:
            return self
        key = np.stack([self.k, self.i, self.j], axis=1)
        uniq, inv = np.unique(key, axis=0, return_inverse=True)
        inv = np.asarray(inv).reshape(-1)
        vals = np.zeros(len(uniq))
        np.add.at(vals, inv, self.v)
        keep = vals != 0
        uniq = uniq[keep]
        return BlockEntries(uniq[:, 0].copy(), uniq[:, 1].copy(), uniq[:, 2].copy(), vals[keep])


@dataclass
class SdpProblem:
    c: np.ndarray
    block_sizes: List[int]
    blocks: List[BlockEntries]
    E: Optional[sp.csr_matrix] = None
    e: Optional[np.ndarray] = None
    const: float = 0.0

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        if len(self.blocks) != len(self.block_sizes):
            raise SdpError("one BlockEntries per block is required")
        if self.E is None:
            self.E = sp.csr_matrix((0, len(self.c)))
            self.e = np.zeros(0)
        else:
            self.E = sp.csr_matrix(self.E)
            self.e = np.asarray(self.e, dtype=float)
            if self.E.shape[1] != len(self.c) or self.E.shape[0] != len(self.e):
                raise SdpError("equality rows have the wrong shape")
        for b, (n, be) in enumerate(zip(self.block_sizes, self.blocks)):
            if n == 0:
                raise SdpError(f"block {b + 1} has size 0")
            if len(be.k) and (be.k.min() < 0 or be.k.max() > self.m):
                raise SdpError(f"block {b + 1} references a variable out of range")
            if len(be.i) and (be.i.min() < 0 or be.j.max() >= abs(n)):
                raise SdpError(f"block {b + 1} has an index out of range")
            if n < 0 and len(be.i) and np.any(be.i != be.j):
                raise SdpError(f"diagonal block {b + 1} has off-diagonal entries")

    @property
    def m(self) -> int:
        return len(self.c)

    def dense_block(self, b: int, k: int) -> np.ndarray:
        """F_{b,k} as a dense symmetric matrix (diagonal blocks as full diag)."""
        n = abs(self.block_sizes[b])
        be = self.blocks[b]
        M = np.zeros((n, n))
        sel = be.k == k
        M[be.i[sel], be.j[sel]] = be.v[sel]
        M[be.j[sel], be.i[sel]] = be.v[sel]
        return M

    def slack(self, y: np.ndarray) -> List[np.ndarray]:
        out = []
        for b in range(len(self.block_sizes)):
            n = abs(self.block_sizes[b])
            be = self.blocks[b]
            coef = np.where(be.k == 0, -1.0, np.concatenate([[0.0], y])[be.k])
            M = np.zeros((n, n))
            np.add.at(M, (be.i, be.j), coef * be.v)
            off = be.i != be.j
            np.add.at(M, (be.j[off], be.i[off]), (coef * be.v)[off])
            out.append(M)
        return out


@dataclass
class SdpSolution:
    status: str
    y: np.ndarray
    X: List[np.ndarray]
    S: List[np.ndarray]
    primal_objective: float
    dual_objective: float
    iterations: int
    primal_infeasibility: float
    dual_infeasibility: float
    relative_gap: float
    message: str = ""
    history: List[Dict[str, float]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.status in ("optimal", "near-optimal")


# -- internal operator form --------------------------------------------------

class _Dense:
    __slots__ = ("n", "P", "cols", "F0", "Pt")

    def __init__(self, n, be: BlockEntries, m):
        self.n = n
        nz = be.k > 0
        k, i, j, v = be.k[nz], be.i[nz], be.j[nz], be.v[nz]
        cols = np.unique(k)
        self.cols = cols - 1
        local = np.searchsorted(cols, k)
        off = i != j
        rows = np.concatenate([i * n + j, (j * n + i)[off]])
        cc = np.concatenate([local, local[off]])
        vv = np.concatenate([v, v[off]])
        self.P = sp.csc_matrix((vv, (rows, cc)), shape=(n * n, len(cols)))
        self.Pt = self.P.T.tocsr()
        F0 = np.zeros((n, n))
        z = be.k == 0
        F0[be.i[z], be.j[z]] = be.v[z]
        F0[be.j[z], be.i[z]] = be.v[z]
        self.F0 = F0

    def op(self, yfull):
        """sum_k y_k F_k."""
        return (self.P @ yfull[self.cols]).reshape(self.n, self.n)

    def adj(self, X, out):
        """out[k] += <F_k, X>."""
        out[self.cols] += self.Pt @ X.reshape(-1)

    def schur(self, Sinv, X, M):
        n = self.n
        ncol = len(self.cols)
        if ncol == 0:
            return
        chunk = max(1, min(ncol, int(4e6 // (n * n))))
        local = np.zeros((ncol, ncol))
        for start in range(0, ncol, chunk):
            stop = min(ncol, start + chunk)
            Fd = self.P[:, start:stop].toarray().T.reshape(stop - start, n, n)
            T = np.matmul(np.matmul(Sinv, Fd), X)
            local[:, start:stop] = self.Pt @ T.reshape(stop - start, n * n).T
        local = 0.5 * (local + local.T)
        M[np.ix_(self.cols, self.cols)] += local


class _Diag:
    __slots__ = ("n", "A", "At", "cols", "f0")

    def __init__(self, n, be: BlockEntries, m):
        self.n = n
        nz = be.k > 0
        k, i, v = be.k[nz], be.i[nz], be.v[nz]
        cols = np.unique(k)
        self.cols = cols - 1
        local = np.searchsorted(cols, k)
        self.A = sp.csr_matrix((v, (i, local)), shape=(n, len(cols)))
        self.At = self.A.T.tocsr()
        f0 = np.zeros(n)
        z = be.k == 0
        np.add.at(f0, be.i[z], be.v[z])
        self.f0 = f0

    def op(self, yfull):
        return self.A @ yfull[self.cols]

    def adj(self, x, out):
        out[self.cols] += self.At @ x

    def schur(self, x, s, M):
        if len(self.cols) == 0:
            return
        W = self.A.multiply((x / s)[:, None]).tocsc()
        local = (self.At @ W).toarray()
        M[np.ix_(self.cols, self.cols)] += local


def _max_step(X, dX, is_diag):
    """Largest alpha <= inf with X + alpha dX psd."""
    if is_diag:
        neg = dX < 0
        if not np.any(neg):
            return math.inf
        return float(np.min(-X[neg] / dX[neg]))
    try:
        L = np.linalg.cholesky(X)
    except np.linalg.LinAlgError:
        return 0.0
    Li_dX = sla.solve_triangular(L, dX, lower=True)
    T = sla.solve_triangular(L, Li_dX.T, lower=True)
    lam = np.linalg.eigvalsh(0.5 * (T + T.T))[0]
    if lam >= 0:
        return math.inf
    return -1.0 / lam


def _eliminate(E: sp.csr_matrix, e: np.ndarray, m: int, tol: float = 1e-10):
    """Particular solution and null-space basis of E y = e."""
    if E.shape[0] == 0:
        return np.zeros(m), None, 0.0
    Et = E.T.toarray()
    Q, R, piv = sla.qr(Et, pivoting=True, mode="full")
    d = np.abs(np.diag(R)) if R.size else np.zeros(0)
    if d.size == 0 or d[0] == 0:
        r = 0
    else:
        r = int(np.sum(d > tol * d[0] * max(1, max(Et.shape))))
    Q1 = Q[:, :r]
    ep = e[piv]
    u = sla.solve_triangular(R[:r, :r].T, ep[:r], lower=True) if r else np.zeros(0)
    yp = Q1 @ u
    incons = float(np.max(np.abs(E @ yp - e))) / (1.0 + float(np.max(np.abs(e)))) if len(e) else 0.0
    N = Q[:, r:]
    return yp, N, incons


def solve_sdp(problem: SdpProblem, tol: float = 1e-8, max_iter: int = 200,
              verbose: bool = False) -> SdpSolution:
    """Primal-dual interior point method (HKM direction, Mehrotra
    predictor-corrector, infeasible start).  Deterministic."""
    m = problem.m
    c = problem.c
    blocks = []
    for n, be in zip(problem.block_sizes, problem.blocks):
        blocks.append(_Diag(-n, be, m) if n < 0 else _Dense(n, be, m))
    yp, N, incons = _eliminate(problem.E, problem.e, m)
    if incons > 1e-8:
        return SdpSolution("infeasible", yp, [], [], math.nan, math.nan, 0, incons, math.nan, math.nan,
                           "equality rows are inconsistent")
    mz = m if N is None else N.shape[1]

    def lift(z):
        return yp + (z if N is None else N @ z)

    def reduce(v):
        return v if N is None else N.T @ v

    nrm_c = 1.0 + float(np.linalg.norm(c))
    nrm_F0 = 1.0 + math.sqrt(sum(float(np.sum(b.F0 ** 2)) if isinstance(b, _Dense) else float(np.sum(b.f0 ** 2))
                                 for b in blocks))
    # starting point
    Fk_norm = np.zeros(m)
    for b in blocks:
        if isinstance(b, _Dense):
            Fk_norm[b.cols] = np.maximum(Fk_norm[b.cols], np.sqrt(np.asarray(b.P.multiply(b.P).sum(axis=0)).ravel()))
        else:
            Fk_norm[b.cols] = np.maximum(Fk_norm[b.cols], np.sqrt(np.asarray(b.A.multiply(b.A).sum(axis=0)).ravel()))
    X, S = [], []
    for b in blocks:
        n = b.n
        F0n = float(np.linalg.norm(b.F0)) if isinstance(b, _Dense) else float(np.linalg.norm(b.f0))
        xi = max(10.0, math.sqrt(n), n * float(np.max((1 + np.abs(c[b.cols])) / (1 + Fk_norm[b.cols])))
                 if len(b.cols) else 10.0)
        eta = max(10.0, math.sqrt(n), F0n, float(np.max(Fk_norm[b.cols])) if len(b.cols) else 0.0)
        if isinstance(b, _Dense):
            X.append(xi * np.eye(n))
            S.append(eta * np.eye(n))
        else:
            X.append(np.full(n, xi))
            S.append(np.full(n, eta))
    z = np.zeros(mz)
    ntot = sum(b.n for b in blocks)
    history = []
    status = "max-iter"
    message = ""
    it = 0
    best = None
    min_pinf = math.inf
    diag = {"min_pivot": math.nan, "ap": math.nan, "ad": math.nan}

    def residuals(z, X, S):
        y = lift(z)
        AX = np.zeros(m)
        Rd = []
        for b, Xb, Sb in zip(blocks, X, S):
            b.adj(Xb, AX)
            if isinstance(b, _Dense):
                Rd.append(b.op(y) - b.F0 - Sb)
            else:
                Rd.append(b.op(y) - b.f0 - Sb)
        rp = reduce(c - AX)
        pobj = float(c @ y)
        dobj = sum(float(np.sum(b.F0 * Xb)) if isinstance(b, _Dense) else float(b.f0 @ Xb)
                   for b, Xb in zip(blocks, X)) + float(yp @ (c - AX))
        return y, AX, Rd, rp, pobj, dobj

    for it in range(1, max_iter + 1):
        y, AX, Rd, rp, pobj, dobj = residuals(z, X, S)
        pinf = float(np.linalg.norm(rp)) / nrm_c
        dinf = math.sqrt(sum(float(np.sum(r * r)) for r in Rd)) / nrm_F0
        gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        mu = sum(float(np.sum(Xb * Sb)) for Xb, Sb in zip(X, S)) / ntot
        history.append({"iter": it - 1, "pobj": pobj, "dobj": dobj, "pinf": pinf, "dinf": dinf,
                        "gap": gap, "mu": mu})
        if verbose:
            print(f"{it - 1:3d} pobj={pobj: .9e} dobj={dobj: .9e} pinf={pinf:.1e} dinf={dinf:.1e} gap={gap:.1e}")
        score = max(pinf, dinf, gap)
        min_pinf = min(min_pinf, pinf)
        if best is None or score < best[0]:
            best = (score, z.copy(), [a.copy() for a in X], [a.copy() for a in S], it - 1)
        if pinf <= tol and dinf <= tol and gap <= tol:
            status = "optimal"
            break
        # divergence checks
        ynorm = float(np.max(np.abs(y))) if m else 0.0
        xnorm = max(float(np.max(np.abs(Xb))) for Xb in X)
        if ynorm > 1e12 and dinf < 1e-6 and pobj < -1e10:
            status = "unbounded"
            message = "primal objective diverges to -inf"
            break
        if xnorm > 1e12 and pinf < 1e-6 and dobj > 1e10:
            status = "infeasible"
            message = "dual objective diverges to +inf (the y-side is infeasible)"
            break
        if it > 10 and pinf > 1e-4 and pinf > 50.0 * min_pinf:
            # the primal residual only grows when the Newton systems are
            # solved inaccurately; further iterates cannot be trusted
            status = "numerical-failure"
            message = "primal residual diverging"
            break
        # Schur complement
        M = np.zeros((m, m))
        Sinv = []
        try:
            for b, Xb, Sb in zip(blocks, X, S):
                if isinstance(b, _Dense):
                    Ls = np.linalg.cholesky(Sb)
                    Li = sla.solve_triangular(Ls, np.eye(b.n), lower=True)
                    Si = Li.T @ Li
                    Sinv.append(Si)
                    b.schur(Si, Xb, M)
                else:
                    Sinv.append(1.0 / Sb)
                    b.schur(Xb, Sb, M)
        except np.linalg.LinAlgError:
            status = "numerical-failure"
            message = "slack matrix lost definiteness"
            break
        Mz = M if N is None else N.T @ M @ N
        Mz = 0.5 * (Mz + Mz.T)
        try:
            cho = sla.cho_factor(Mz, lower=True, check_finite=False)
            diag["min_pivot"] = float(np.min(np.diag(cho[0]) ** 2)) if mz else math.nan
            solve = lambda r: sla.cho_solve(cho, r, check_finite=False)  # noqa: E731
        except (np.linalg.LinAlgError, ValueError):
            reg = 1e-14 * max(1.0, float(np.max(np.abs(np.diag(Mz))))) if mz else 0.0
            try:
                cho = sla.cho_factor(Mz + reg * np.eye(mz), lower=True, check_finite=False)
                solve = lambda r: sla.cho_solve(cho, r, check_finite=False)  # noqa: E731
            except (np.linalg.LinAlgError, ValueError):
                lu = sla.lu_factor(Mz + reg * np.eye(mz), check_finite=False)
                solve = lambda r: sla.lu_solve(lu, r, check_finite=False)  # noqa: E731

        def direction(sigma_mu, corr):
            Gsum = np.zeros(m)
            Gs = []
            for idx, (b, Xb, Sb, Si, R) in enumerate(zip(blocks, X, S, Sinv, Rd)):
                if isinstance(b, _Dense):
                    G = sigma_mu * Si - Xb - Xb @ R @ Si
                    if corr is not None:
                        G = G - corr[0][idx] @ corr[1][idx] @ Si
                    G = 0.5 * (G + G.T)
                else:
                    G = sigma_mu * Si - Xb - Xb * R * Si
                    if corr is not None:
                        G = G - corr[0][idx] * corr[1][idx] * Si
                Gs.append(G)
                b.adj(G, Gsum)
            rhs = reduce(Gsum) - rp
            dz = solve(rhs)
            # iterative refinement; the Schur matrix gets ill conditioned near the optimum
            for _ in range(3):
                res = rhs - Mz @ dz
                if not np.linalg.norm(res) > 1e-15 * (1.0 + np.linalg.norm(rhs)):
                    break
                dz = dz + solve(res)
            dy = dz if N is None else N @ dz
            dX, dS = [], []
            for b, Xb, Si, R, G in zip(blocks, X, Sinv, Rd, Gs):
                dSb = b.op(dy) + R
                if isinstance(b, _Dense):
                    dXb = G - Xb @ b.op(dy) @ Si
                    dXb = 0.5 * (dXb + dXb.T)
                else:
                    dXb = G - Xb * b.op(dy) * Si
                dX.append(dXb)
                dS.append(dSb)
            return dz, dX, dS

        def steps(dX, dS):
            ap = min(_max_step(Xb, d, isinstance(b, _Diag)) for b, Xb, d in zip(blocks, X, dX))
            ad = min(_max_step(Sb, d, isinstance(b, _Diag)) for b, Sb, d in zip(blocks, S, dS))
            return ap, ad

        dz_a, dX_a, dS_a = direction(0.0, None)
        ap, ad = steps(dX_a, dS_a)
        ap, ad = min(1.0, ap), min(1.0, ad)
        mu_aff = sum(float(np.sum((Xb + ap * dx) * (Sb + ad * ds)))
                     for Xb, Sb, dx, ds in zip(X, S, dX_a, dS_a)) / ntot
        expon = max(1.0, 3.0 * min(ap, ad) ** 2)
        sigma = min(1.0, (max(mu_aff, 0.0) / mu) ** expon) if mu > 0 else 0.0
        dz, dX, dS = direction(sigma * mu, (dX_a, dS_a))
        ap, ad = steps(dX, dS)
        gamma = 0.9 + 0.09 * min(ap, ad, 1.0)
        ap = min(1.0, gamma * ap)
        ad = min(1.0, gamma * ad)
        if not np.isfinite(ap) or not np.isfinite(ad) or not np.all(np.isfinite(dz)):
            status = "numerical-failure"
            message = "non-finite search direction"
            break
        if max(ap, ad) < 1e-10:
            status = "numerical-failure"
            message = "step length collapsed"
            break
        diag["ap"], diag["ad"] = ap, ad
        if verbose:
            print(f"    steps ap={ap:.3f} ad={ad:.3f} sigma={sigma:.2e}")
        X = [Xb + ap * d for Xb, d in zip(X, dX)]
        S = [Sb + ad * d for Sb, d in zip(S, dS)]
        z = z + ad * dz
    else:
        it = max_iter + 1

    iters = it - 1 if status != "optimal" else it - 1
    if status in ("max-iter", "numerical-failure") and best is not None:
        score, z, X, S, iters_best = best
        near = max(1e-6, 1e2 * tol)
        if score <= near:
            status = "near-optimal"
    y, AX, Rd, rp, pobj, dobj = residuals(z, X, S)
    pinf = float(np.linalg.norm(rp)) / nrm_c
    dinf = math.sqrt(sum(float(np.sum(r * r)) for r in Rd)) / nrm_F0
    gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
    if status == "numerical-failure":
        message += (f" (min Schur pivot {diag['min_pivot']:.2e}, last steps"
                    f" ap={diag['ap']:.3g} ad={diag['ad']:.3g})")
    Xo = [Xb if isinstance(b, _Dense) else np.diag(Xb) for b, Xb in zip(blocks, X)]
    So = [Sb if isinstance(b, _Dense) else np.diag(Sb) for b, Sb in zip(blocks, S)]
    return SdpSolution(status, y, Xo, So, pobj + problem.const, dobj + problem.const, iters,
                       pinf, dinf, gap, message, history)


def trace_bounded(problem: SdpProblem, T: float) -> SdpProblem:
    """Add a variable t >= 0 with t*I in every block and cost T*t.

    On the X-side this is the extra constraint sum_b tr(X_b) <= T, so any
    feasible X of the new problem is feasible for the old one and its
    objective is still a valid bound.  The y-side always has interior
    points, which keeps the iterates bounded on degenerate relaxations."""
    t = problem.m + 1
    blocks = []
    for n, be in zip(problem.block_sizes, problem.blocks):
        r = np.arange(abs(n))
        blocks.append(BlockEntries.from_lists(np.r_[be.k, np.full(abs(n), t)], np.r_[be.i, r],
                                              np.r_[be.j, r], np.r_[be.v, np.ones(abs(n))]))
    blocks.append(BlockEntries.from_lists([t], [0], [0], [1.0]))
    E = sp.hstack([problem.E, sp.csr_matrix((problem.E.shape[0], 1))]).tocsr()
    return SdpProblem(np.r_[problem.c, float(T)], list(problem.block_sizes) + [-1], blocks,
                      E, problem.e.copy(), problem.const)


def check_solution(problem: SdpProblem, y: np.ndarray, X: Optional[Sequence[np.ndarray]] = None) -> Dict[str, float]:
    """Independent residuals of a candidate solution (e.g. from an external
    solver): min eigenvalue of each slack, equality residual, and with X
    the dual residual and duality gap."""
    y = np.asarray(y, dtype=float)
    S = problem.slack(y)
    out = {"primal_objective": float(problem.c @ y) + problem.const,
           "min_eig_S": min(float(np.linalg.eigvalsh(Sb)[0]) for Sb in S) if S else 0.0,
           "eq_residual": float(np.max(np.abs(problem.E @ y - problem.e))) if problem.E.shape[0] else 0.0}
    if X is not None:
        AX = np.zeros(problem.m)
        dobj = 0.0
        for b, Xb in enumerate(X):
            Xb = np.asarray(Xb, dtype=float)
            if Xb.ndim == 1:
                Xb = np.diag(Xb)
            be = problem.blocks[b]
            w = np.where(be.i == be.j, 1.0, 2.0) * be.v * Xb[be.i, be.j]
            np.add.at(AX, be.k[be.k > 0] - 1, w[be.k > 0])
            dobj += float(np.sum(w[be.k == 0]))
        r = problem.c - AX
        if problem.E.shape[0]:
            w_eq, *_ = np.linalg.lstsq(problem.E.T.toarray(), r, rcond=None)
            dobj += float(problem.e @ w_eq)
            r = r - problem.E.T @ w_eq
        out["dual_residual"] = float(np.max(np.abs(r))) if len(r) else 0.0
        out["dual_objective"] = dobj + problem.const
        out["min_eig_X"] = min(float(np.linalg.eigvalsh(np.asarray(Xb) if np.ndim(Xb) == 2 else np.diag(Xb))[0])
                               for Xb in X)
        out["gap"] = out["primal_objective"] - out["dual_objective"]
    return out


# -- SDPA sparse format --------------------------------------------------------

def _fmt(x: float) -> str:
    return "%.17g" % x


def to_sdpa_string(problem: SdpProblem) -> str:
    """SDPA sparse text (entries sorted by (k, block, i, j), 1-based, upper
    triangle, 17 significant digits).  Equality rows become a diagonal
    block of +/- pairs; a comment line records it so that reading the file
    back restores them."""
    sizes = list(problem.block_sizes)
    blocks = list(problem.blocks)
    header = []
    neq = problem.E.shape[0]
    if neq:
        E = problem.E.tocoo()
        k = np.concatenate([E.col + 1, E.col + 1, np.zeros(neq, dtype=np.int64), np.zeros(neq, dtype=np.int64)])
        i = np.concatenate([E.row, E.row + neq, np.arange(neq), np.arange(neq) + neq])
        v = np.concatenate([E.data, -E.data, problem.e, -problem.e])
        blocks.append(BlockEntries.from_lists(k, i, i, v))
        sizes.append(-2 * neq)
        header.append(f"* equality-pairs block {len(sizes)}")
    if problem.const != 0.0:
        header.append(f"* objective-constant {_fmt(problem.const)}")
    lines = list(header)
    lines.append(str(problem.m))
    lines.append(str(len(sizes)))
    lines.append(" ".join(str(s) for s in sizes))
    lines.append(" ".join(_fmt(x) for x in problem.c) if problem.m else "")
    rows = []
    for b, be in enumerate(blocks):
        for k, i, j, v in zip(be.k, be.i, be.j, be.v):
            rows.append((int(k), b + 1, int(i) + 1, int(j) + 1, float(v)))
    rows.sort(key=lambda r: r[:4])
    for k, b, i, j, v in rows:
        lines.append(f"{k} {b} {i} {j} {_fmt(v)}")
    return "\n".join(lines) + "\n"


def export_sdpa(problem: SdpProblem, path: Union[str, os.PathLike]) -> None:
    with open(path, "w") as fh:
        fh.write(to_sdpa_string(problem))


def _clean(line: str) -> str:
    for ch in ",{}()":
        line = line.replace(ch, " ")
    return line.strip()


def from_sdpa_string(text: str) -> SdpProblem:
    lines = text.splitlines()
    eq_block = None
    const = 0.0
    body = []
    for ln in lines:
        s = ln.strip()
        if not s:
            continue
        if s[0] in "*\"":
            parts = s[1:].split()
            if len(parts) == 3 and parts[:2] == ["equality-pairs", "block"]:
                eq_block = int(parts[2])
            elif len(parts) == 2 and parts[0] == "objective-constant":
                const = float(parts[1])
            continue
        body.append(_clean(s))
    if len(body) < 3:
        raise SdpaFormatError("file too short")
    try:
        m = int(body[0].split()[0])
        nb = int(body[1].split()[0])
        sizes = [int(t) for t in body[2].split()]
    except (ValueError, IndexError):
        raise SdpaFormatError("bad header") from None
    if len(sizes) != nb:
        raise SdpaFormatError(f"expected {nb} block sizes, got {len(sizes)}")
    pos = 3
    cvals: List[float] = []
    while len(cvals) < m:
        if pos >= len(body):
            raise SdpaFormatError("objective vector is too short")
        cvals.extend(float(t) for t in body[pos].split())
        pos += 1
    if len(cvals) != m:
        raise SdpaFormatError("objective vector has the wrong length")
    data = [[[], [], [], []] for _ in range(nb)]
    seen = set()
    for ln in body[pos:]:
        tok = ln.split()
        if len(tok) != 5:
            raise SdpaFormatError(f"bad entry line {ln!r}")
        k, b, i, j = (int(t) for t in tok[:4])
        v = float(tok[4])
        if not (0 <= k <= m and 1 <= b <= nb):
            raise SdpaFormatError(f"entry out of range: {ln!r}")
        n = abs(sizes[b - 1])
        if not (1 <= i <= n and 1 <= j <= n):
            raise SdpaFormatError(f"entry index out of range: {ln!r}")
        i, j = min(i, j), max(i, j)
        if (k, b, i, j) in seen:
            raise SdpaFormatError(f"duplicate entry {k} {b} {i} {j}")
        seen.add((k, b, i, j))
        d = data[b - 1]
        d[0].append(k)
        d[1].append(i - 1)
        d[2].append(j - 1)
        d[3].append(v)
    blocks = [BlockEntries.from_lists(*d) for d in data]
    E = e = None
    if eq_block is not None:
        be = blocks.pop(eq_block - 1)
        n2 = -sizes.pop(eq_block - 1)
        neq = n2 // 2
        first = be.i < neq
        rows_k = be.k[first]
        nz = rows_k > 0
        E = sp.csr_matrix((be.v[first][nz], (be.i[first][nz], rows_k[nz] - 1)), shape=(neq, m))
        e = np.zeros(neq)
        z = rows_k == 0
        e[be.i[first][z]] = be.v[first][z]
    return SdpProblem(np.array(cvals), sizes, blocks, E, e, const)


def import_sdpa(path: Union[str, os.PathLike]) -> SdpProblem:
    with open(path) as fh:
        return from_sdpa_string(fh.read())


@dataclass
class ExternalSolution:
    y: np.ndarray
    primal_objective: Optional[float] = None
    dual_objective: Optional[float] = None
    X: Optional[List[np.ndarray]] = None
    phase: str = ""
    status: str = "unchecked"
    residuals: Dict[str, float] = field(default_factory=dict)
    entries: List[Tuple[int, int, int, int, float]] = field(default_factory=list)


def _parse_floats(chunk: str, lineno: int) -> List[float]:
    out = []
    for tok in chunk.replace(",", " ").replace("{", " ").replace("}", " ").split():
        try:
            out.append(float(tok))
        except ValueError:
            raise SdpaFormatError(f"line {lineno}: bad number {tok!r}") from None
    return out


def parse_sdpa_solution(text: str) -> ExternalSolution:
    """Parse SDPA output (``objValPrimal = v``, ``xVec = {...}``, ...) or the
    CSDP ``.sol`` layout (first line y, then ``1|2 b i j v`` rows)."""
    lines = text.splitlines()
    if any("xVec" in ln or "objValPrimal" in ln for ln in lines):
        vals: Dict[str, float] = {}
        y = None
        phase = ""
        i = 0
        while i < len(lines):
            ln = lines[i]
            key, eq, rest = ln.partition("=")
            key = key.strip()
            if eq and key in ("objValPrimal", "objValDual"):
                nums = _parse_floats(rest, i + 1)
                if len(nums) != 1:
                    raise SdpaFormatError(f"line {i + 1}: expected one value for {key}")
                vals[key] = nums[0]
            elif eq and key == "phase.value":
                phase = rest.strip()
            elif eq and key == "xVec":
                buf, start = rest, i
                while "}" not in buf:
                    i += 1
                    if i >= len(lines):
                        raise SdpaFormatError(f"line {i}: xVec starting at line {start + 1} is not closed")
                    buf += " " + lines[i]
                if "{" not in buf:
                    raise SdpaFormatError(f"line {start + 1}: xVec without '{{'")
                y = np.array(_parse_floats(buf[buf.index("{") + 1: buf.index("}")], start + 1))
            i += 1
        if y is None:
            raise SdpaFormatError(f"line {len(lines)}: no xVec found")
        return ExternalSolution(y, vals.get("objValPrimal"), vals.get("objValDual"), None, phase)
    body = [(n + 1, ln) for n, ln in enumerate(lines) if ln.strip()]
    if not body:
        raise SdpaFormatError("line 1: empty solution file")
    y = np.array(_parse_floats(body[0][1], body[0][0]))
    entries = []
    for n, ln in body[1:]:
        t = ln.split()
        if len(t) != 5:
            raise SdpaFormatError(f"line {n}: expected 'matno block i j value'")
        try:
            entries.append((int(t[0]), int(t[1]), int(t[2]), int(t[3]), float(t[4])))
        except ValueError:
            raise SdpaFormatError(f"line {n}: malformed entry") from None
    return ExternalSolution(y, entries=entries)


def import_sdpa_solution(path: Union[str, os.PathLike], problem: Optional[SdpProblem] = None,
                         tol: float = 1e-6) -> ExternalSolution:
    """Read an external solver's solution.  With ``problem`` the residuals
    are recomputed here (the file's own numbers are never trusted): status
    is 'optimal' when everything checks out and 'near-optimal' when the
    reported objective or feasibility disagrees beyond ``tol``."""
    with open(path) as fh:
        sol = parse_sdpa_solution(fh.read())
    if problem is None:
        return sol
    if sol.entries:
        X = [np.zeros((abs(n), abs(n))) for n in problem.block_sizes]
        for mat, b, i, j, v in sol.entries:
            if mat == 2 and 1 <= b <= len(X):
                X[b - 1][i - 1, j - 1] = v
                X[b - 1][j - 1, i - 1] = v
        sol.X = X
    return verify_external(problem, sol, tol)


def verify_external(problem: SdpProblem, sol: ExternalSolution, tol: float = 1e-6) -> ExternalSolution:
    if len(sol.y) != problem.m:
        raise SdpaFormatError(f"solution has {len(sol.y)} values, the problem has {problem.m} variables")
    res = check_solution(problem, sol.y, sol.X)
    sol.residuals = res
    ok = res["min_eig_S"] >= -tol and res["eq_residual"] <= tol
    if sol.primal_objective is not None:
        ok = ok and abs(sol.primal_objective - res["primal_objective"]) <= tol * (1 + abs(res["primal_objective"]))
    if sol.X is not None:
        ok = ok and res["dual_residual"] <= tol and res["min_eig_X"] >= -tol
    sol.status = "optimal" if ok else "near-optimal"
    return sol
