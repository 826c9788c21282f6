"""Upper bounds from local search, and the lower/upper bound sandwich.

The relaxations give lower bounds; any feasible point gives an upper
bound.  ``local_search_upper_bound`` runs a seeded multistart of SLSQP
(with a quadratic-penalty warm start when SLSQP stalls) inside a box and
keeps the best point whose constraint violation is below ``feas_tol``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from .csp import CspProblem
from .poly import Polynomial

CERTIFY_TOL = 1e-5


class SandwichViolation(RuntimeError):
    """A lower bound exceeded an upper bound by more than the tolerance."""

    def __init__(self, lb: float, ub: float, tol: float):
        self.lb, self.ub, self.tol = lb, ub, tol
        super().__init__(f"lower bound {lb:.10g} exceeds upper bound {ub:.10g} by more than {tol:g}")


class CompiledPoly:
    """A polynomial over x_1..x_n evaluated with numpy."""

    def __init__(self, p: Polynomial, n: int):
        terms = list(p.terms.items())
        self.n = n
        self.coef = np.array([float(c) for _, c in terms], dtype=float)
        self.exp = np.zeros((len(terms), n), dtype=np.int64)
        for r, (m, _) in enumerate(terms):
            for v, e in m:
                self.exp[r, v - 1] = e
        used = np.flatnonzero(self.exp.any(axis=0)) if len(terms) else np.zeros(0, dtype=np.int64)
        self.used = used
        self.sub = self.exp[:, used]

    def value(self, x: np.ndarray) -> float:
        if len(self.coef) == 0:
            return 0.0
        xs = x[self.used]
        return float(self.coef @ np.prod(xs[None, :] ** self.sub, axis=1))

    def grad(self, x: np.ndarray) -> np.ndarray:
        g = np.zeros(self.n)
        if len(self.coef) == 0:
            return g
        xs = x[self.used]
        for c, v in enumerate(self.used):
            e = self.sub[:, c]
            mask = e > 0
            if not np.any(mask):
                continue
            sub = self.sub[mask].copy()
            sub[:, c] -= 1
            g[v] = float((self.coef[mask] * e[mask]) @ np.prod(xs[None, :] ** sub, axis=1))
        return g


@dataclass
class OracleResult:
    value: float                 # best feasible objective, inf if none found
    x: Optional[np.ndarray]
    violation: float
    starts: int
    feasible_starts: int
    seed: int

    @property
    def found(self) -> bool:
        return self.x is not None


@dataclass
class SandwichReport:
    lb: float
    ub: float
    gap: float
    certified: bool
    tol: float = 1e-6


class _Compiled:
    def __init__(self, problem: CspProblem):
        n = problem.n
        self.n = n
        self.f = CompiledPoly(problem.objective(), n)
        self.g = [CompiledPoly(q, n) for q in problem.all_ineqs()]
        self.h = [CompiledPoly(q, n) for q in problem.all_eqs()]

    def violation(self, x) -> float:
        v = 0.0
        for q in self.g:
            v = max(v, -q.value(x))
        for q in self.h:
            v = max(v, abs(q.value(x)))
        return v

    def penalty(self, rho):
        def fun(x):
            val = self.f.value(x)
            grad = self.f.grad(x)
            for q in self.g:
                gv = q.value(x)
                if gv < 0:
                    val += rho * gv * gv
                    grad = grad + 2 * rho * gv * q.grad(x)
            for q in self.h:
                hv = q.value(x)
                val += rho * hv * hv
                grad = grad + 2 * rho * hv * q.grad(x)
            return val, grad
        return fun

    def slsqp(self, x0, bounds, maxiter=400):
        cons = [{"type": "ineq", "fun": q.value, "jac": q.grad} for q in self.g]
        cons += [{"type": "eq", "fun": q.value, "jac": q.grad} for q in self.h]
        res = minimize(self.f.value, x0, jac=self.f.grad, method="SLSQP", bounds=bounds,
                       constraints=cons, options={"maxiter": maxiter, "ftol": 1e-14})
        return np.clip(res.x, [b[0] for b in bounds], [b[1] for b in bounds])


def _box(problem: CspProblem, box) -> Tuple[float, float]:
    if box is not None:
        return float(box[0]), float(box[1])
    if problem.box is not None:
        return problem.box
    return (-2.0, 2.0)


def local_search_upper_bound(problem: CspProblem, starts: int = 64, seed: int = 0,
                             box: Optional[Tuple[float, float]] = None,
                             feas_tol: float = 1e-8) -> OracleResult:
    """Best feasible objective value found by a seeded multistart."""
    comp = _Compiled(problem)
    lo, hi = _box(problem, box)
    bounds = [(lo, hi)] * problem.n
    rng = np.random.default_rng(seed)
    best_val, best_x, best_viol, nfeas = math.inf, None, math.inf, 0
    constrained = bool(comp.g or comp.h)
    for _ in range(starts):
        x = rng.uniform(lo, hi, size=problem.n)
        with np.errstate(all="ignore"):
            if constrained:
                cand = comp.slsqp(x, bounds)
                if not comp.violation(cand) <= feas_tol:
                    # penalty continuation, then polish
                    y = x
                    for rho in (1e1, 1e2, 1e3, 1e4, 1e5, 1e6):
                        r = minimize(comp.penalty(rho), y, jac=True, method="L-BFGS-B", bounds=bounds)
                        y = r.x
                    cand = comp.slsqp(y, bounds)
            else:
                r = minimize(lambda z: (comp.f.value(z), comp.f.grad(z)), x, jac=True,
                             method="L-BFGS-B", bounds=bounds, options={"ftol": 1e-15, "gtol": 1e-12})
                cand = r.x
        viol = comp.violation(cand)
        if not viol <= feas_tol:
            continue
        nfeas += 1
        val = comp.f.value(cand)
        if val < best_val:
            best_val, best_x, best_viol = val, cand, viol
    return OracleResult(best_val, best_x, best_viol if best_x is not None else math.inf, starts, nfeas, seed)


def grid_minimize(problem: CspProblem, points: int = 41, box: Optional[Tuple[float, float]] = None,
                  feas_tol: float = 1e-9) -> OracleResult:
    """Exhaustive grid search (small n only), followed by an SLSQP polish
    from the best grid point."""
    if problem.n > 4:
        raise ValueError("grid_minimize is meant for n <= 4")
    comp = _Compiled(problem)
    lo, hi = _box(problem, box)
    axis = np.linspace(lo, hi, points)
    best_val, best_x = math.inf, None
    for pt in itertools.product(axis, repeat=problem.n):
        x = np.array(pt)
        if comp.violation(x) <= feas_tol:
            v = comp.f.value(x)
            if v < best_val:
                best_val, best_x = v, x
    if best_x is not None:
        bounds = [(lo, hi)] * problem.n
        with np.errstate(all="ignore"):
            cand = comp.slsqp(best_x, bounds)
        if comp.violation(cand) <= feas_tol and comp.f.value(cand) < best_val:
            best_val, best_x = comp.f.value(cand), cand
    viol = comp.violation(best_x) if best_x is not None else math.inf
    return OracleResult(best_val, best_x, viol, points ** problem.n, 0, 0)


def compare_bounds(lb: float, ub: float, tol: float = 1e-6, certify_tol: float = CERTIFY_TOL) -> SandwichReport:
    """Check lb <= ub + tol; the pair certifies the optimum when the gap is
    at most ``certify_tol``."""
    if lb > ub + tol:
        raise SandwichViolation(lb, ub, tol)
    gap = ub - lb
    return SandwichReport(lb, ub, gap, gap <= certify_tol, tol)
