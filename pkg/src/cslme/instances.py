"""Built-in test problems and generators.

The small examples ship as ``.popb`` files in ``cslme/data``; the chain
and multi-simplex families are generated here for any size.
"""
from __future__ import annotations

import os
from typing import List

from .csp import Block, CspProblem
from .poly import Polynomial, parse_polynomial
from .problem_file import parse_problem_file

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")


def data_path(name: str) -> str:
    if not name.endswith(".popb"):
        name += ".popb"
    return os.path.join(DATA_DIR, name)


def load(name: str) -> CspProblem:
    """Load a bundled problem, e.g. ``load('ex5_1')``."""
    return parse_problem_file(data_path(name))


def bundled() -> List[str]:
    return sorted(f[:-5] for f in os.listdir(DATA_DIR) if f.endswith(".popb"))


def chain_cliques(N: int, k: int, s: int) -> List[tuple]:
    """I_i = {(N-k)(i-1)+1, ..., (N-k)(i-1)+N}; consecutive cliques share k variables."""
    if not 0 < k < N:
        raise ValueError("need 0 < k < N")
    step = N - k
    return [tuple(range(step * (i - 1) + 1, step * (i - 1) + N + 1)) for i in range(1, s + 1)]


def _local(expr: str, clique) -> Polynomial:
    """Parse ``expr`` written in local names u1..uN and map to the clique."""
    p = parse_polynomial(expr.replace("u", "x"))
    return p.rename({j + 1: v for j, v in enumerate(clique)})


def unconstrained_chain(N: int = 15, k: int = 2, s: int = 10) -> CspProblem:
    """Chain pattern with the quartic block objective on 15 local variables
    (needs N = 15)."""
    if N != 15:
        raise ValueError("this objective is defined for N = 15")
    cl = chain_cliques(N, k, s)
    f = ("u1^2 + u2^2 + u3^2 + u4^2 + u5^2"
         " - 4*((u1*u2)^2 + (u2*u3)^2 + (u3*u4)^2 + (u4*u5)^2 + (u5*u1)^2)"
         " + (u1 + u2 + u3 + u4 + u5 - u6*u11 - u7*u12 - u8*u13 - u9*u14 - u10*u15)^2")
    blocks = [Block(c, _local(f, c), [], []) for c in cl]
    n = cl[-1][-1]
    return CspProblem(n, blocks, name=f"chain_N{N}_k{k}_s{s}", known_min=0.0)


def simplex_chain(N: int = 4, k: int = 1, s: int = 3) -> CspProblem:
    """Small constrained chain: every block is a simplex-type region and
    the block objective is a cubic in the local variables (N = 4, k = 1)."""
    if (N, k) != (4, 1):
        raise ValueError("this objective is defined for N = 4, k = 1")
    cl = chain_cliques(N, k, s)
    blocks = []
    for i, c in enumerate(cl, start=1):
        f = _local("u2*u3*u4 - u2^2 - u3^2 + u1*u4", c)
        g = [_local("1 - u1 - u2 - u3 - u4", c)] + [_local(f"u{j}", c) for j in (2, 3, 4)]
        if i == 1:
            g.append(_local("u1", c))
        blocks.append(Block(c, f, g, []))
    return CspProblem(cl[-1][-1], blocks, name=f"simplex_chain_N{N}_k{k}_s{s}", box=(-2.0, 2.0))


def multi_simplex(s: int = 2) -> CspProblem:
    """Blocks I_i = {9i-8, ..., 9i+1} sharing one variable with the next
    block, each carrying a simplex constraint."""
    blocks = []
    f = "u1*u2 + u3*u4 + u5*u6 + (u7^3 + u8^3 + u9^3 + u7*u8*u9)*u10"
    for i in range(1, s + 1):
        c = tuple(range(9 * i - 8, 9 * i + 2))
        g = [_local("1 - u1 - u2 - u3 - u4 - u5 - u6 - u7 - u8 - u9 - u10", c)]
        if i == 1:
            g.append(_local("u1", c))
        g += [_local(f"u{j}", c) for j in range(2, 11)]
        blocks.append(Block(c, _local(f, c), g, []))
    return CspProblem(9 * s + 1, blocks, name=f"multi_simplex_s{s}", known_min=0.0)
