"""Correlative sparsity: problem container, RIP check, tree construction
and a greedy sparsity detector.

Blocks are numbered from 1, so arcs and overlaps read the same way as
the multiplier names ``nu_i_t_k`` written to files.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .poly import Polynomial, VarTable


class CspError(ValueError):
    """Raised when a problem does not have the declared sparsity pattern."""


@dataclass
class Block:
    clique: Tuple[int, ...]
    objective: Polynomial
    ineqs: List[Polynomial] = field(default_factory=list)
    eqs: List[Polynomial] = field(default_factory=list)

    @property
    def constraints(self) -> List[Polynomial]:
        return list(self.ineqs) + list(self.eqs)


@dataclass
class CspProblem:
    n: int
    blocks: List[Block]
    names: Optional[VarTable] = None
    name: str = ""
    known_min: Optional[float] = None
    box: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        if self.names is None:
            self.names = VarTable.standard(self.n)

    @property
    def s(self) -> int:
        return len(self.blocks)

    @property
    def cliques(self) -> List[Tuple[int, ...]]:
        return [b.clique for b in self.blocks]

    def block(self, i: int) -> Block:
        """Block ``i`` (1-based)."""
        return self.blocks[i - 1]

    def objective(self) -> Polynomial:
        out = Polynomial()
        for b in self.blocks:
            out = out + b.objective
        return out

    def all_ineqs(self) -> List[Polynomial]:
        return [g for b in self.blocks for g in b.ineqs]

    def all_eqs(self) -> List[Polynomial]:
        return [h for b in self.blocks for h in b.eqs]

    def max_degree(self) -> int:
        d = 0
        for b in self.blocks:
            for p in [b.objective] + b.constraints:
                d = max(d, p.degree())
        return d

    def to_float(self) -> "CspProblem":
        blocks = [Block(b.clique, b.objective.to_float(), [g.to_float() for g in b.ineqs],
                        [h.to_float() for h in b.eqs]) for b in self.blocks]
        return CspProblem(self.n, blocks, self.names, self.name, self.known_min, self.box)

    def merged(self) -> "CspProblem":
        """Same problem with the trivial pattern: one block holding everything."""
        blk = Block(tuple(range(1, self.n + 1)), self.objective(), self.all_ineqs(), self.all_eqs())
        return CspProblem(self.n, [blk], self.names, self.name, self.known_min, self.box)


def validate_csp(problem: CspProblem) -> None:
    """Check that the cliques cover [n] and every polynomial of block i
    only involves variables of I_i.  Raises CspError naming the offender."""
    if not problem.blocks:
        raise CspError("problem has no blocks")
    covered = set()
    for i, b in enumerate(problem.blocks, start=1):
        cl = set(b.clique)
        if not cl:
            raise CspError(f"clique {i} is empty")
        if len(cl) != len(b.clique):
            raise CspError(f"clique {i} has repeated variables")
        bad = [v for v in cl if v < 1 or v > problem.n]
        if bad:
            raise CspError(f"clique {i} has variables outside 1..{problem.n}: {sorted(bad)}")
        covered |= cl
        polys = [("objective", 0, b.objective)] + [("ineq", j, g) for j, g in enumerate(b.ineqs, 1)] \
            + [("eq", j, h) for j, h in enumerate(b.eqs, 1)]
        for kind, j, p in polys:
            extra = set(p.variables()) - cl
            if extra:
                name = problem.names.name(min(extra))
                what = "objective" if kind == "objective" else f"{kind} {j}"
                raise CspError(f"block {i} {what} uses {name}, which is not in clique {i}")
    missing = set(range(1, problem.n + 1)) - covered
    if missing:
        raise CspError(f"variables not covered by any clique: {sorted(missing)}")


@dataclass
class RipResult:
    holds: bool
    # witness[i] for i = 1..s-1 (key i): the largest t <= i containing the
    # intersection of I_{i+1} with the earlier cliques, or None on failure
    witness: Dict[int, Optional[int]]
    # failing i -> the intersection no single earlier clique contains
    violations: Dict[int, Tuple[int, ...]]

    def __bool__(self):
        return self.holds


def check_rip(cliques: Sequence[Sequence[int]]) -> RipResult:
    """Running intersection property in the given clique order."""
    witness: Dict[int, Optional[int]] = {}
    violations: Dict[int, Tuple[int, ...]] = {}
    union = set(cliques[0]) if cliques else set()
    sets = [set(c) for c in cliques]
    for i in range(1, len(sets)):
        inter = sets[i] & union
        found = None
        for t in range(i, 0, -1):
            if inter <= sets[t - 1]:
                found = t
                break
        witness[i] = found
        if found is None:
            violations[i] = tuple(sorted(inter))
        union |= sets[i]
    return RipResult(not violations, witness, violations)


@dataclass
class CspTree:
    s: int
    arcs: List[Tuple[int, int]]              # (child, parent), child > parent
    overlaps: Dict[Tuple[int, int], Tuple[int, ...]]

    def parents(self, i: int) -> List[int]:
        return [t for (a, t) in self.arcs if a == i]

    def children(self, i: int) -> List[int]:
        return [a for (a, t) in self.arcs if t == i]

    def overlap(self, i: int, t: int) -> Tuple[int, ...]:
        return self.overlaps[(i, t)]


def build_tree(cliques: Sequence[Sequence[int]]) -> CspTree:
    """Arc set for cliques satisfying RIP: for each i with a nonempty
    intersection with the earlier cliques, link i+1 to the largest valid t."""
    rip = check_rip(cliques)
    if not rip.holds:
        i, inter = next(iter(rip.violations.items()))
        raise CspError(
            f"running intersection fails at clique {i + 1}: {list(inter)} is not contained in any earlier clique")
    sets = [set(c) for c in cliques]
    union = set(sets[0]) if sets else set()
    arcs = []
    overlaps = {}
    for i in range(1, len(sets)):
        inter = sets[i] & union
        if inter:
            t = rip.witness[i]
            arcs.append((i + 1, t))
            overlaps[(i + 1, t)] = tuple(sorted(sets[i] & sets[t - 1]))
        union |= sets[i]
    arcs.sort()
    return CspTree(len(sets), arcs, overlaps)


def _order_for_rip(sets: List[frozenset]) -> Optional[List[frozenset]]:
    """Greedy ordering that keeps RIP along the way; None if stuck."""
    remaining = sorted(sets, key=lambda c: (min(c), sorted(c)))
    order = [remaining.pop(0)]
    union = set(order[0])
    while remaining:
        picked = None
        # prefer cliques connected to what we have, lowest variable first
        for pos, c in enumerate(remaining):
            inter = c & union
            if inter and any(inter <= o for o in order):
                picked = pos
                break
        if picked is None:
            for pos, c in enumerate(remaining):
                if not (c & union):
                    picked = pos
                    break
        if picked is None:
            return None
        c = remaining.pop(picked)
        order.append(c)
        union |= c
    return order


def detect_csp(n: int, objective_terms: Sequence[Polynomial],
               ineqs: Sequence[Polynomial] = (), eqs: Sequence[Polynomial] = (),
               names: Optional[VarTable] = None) -> CspProblem:
    """Build a CspProblem from unstructured data.

    Each objective term and each constraint is kept whole: its support
    becomes a candidate clique, candidates contained in another are merged
    into it, and the rest are ordered greedily for RIP.  When no RIP order
    is found the trivial pattern (a single clique [n]) is returned.
    """
    items = [("f", p) for p in objective_terms] + [("g", g) for g in ineqs] + [("h", h) for h in eqs]
    supports = []
    for _, p in items:
        sup = frozenset(p.variables())
        if any(v < 1 or v > n for v in sup):
            raise CspError(f"polynomial {p} uses variables outside 1..{n}")
        supports.append(sup)
    cands = set(s for s in supports if s)
    covered = set().union(*cands) if cands else set()
    for v in range(1, n + 1):
        if v not in covered:
            cands.add(frozenset([v]))
    maximal = [c for c in cands if not any(c < o for o in cands)]
    order = _order_for_rip(maximal)
    if order is None:
        order = [frozenset(range(1, n + 1))]
    cliques = [tuple(sorted(c)) for c in order]
    blocks = [Block(c, Polynomial(), [], []) for c in cliques]
    for (kind, p), sup in zip(items, supports):
        home = next(i for i, c in enumerate(order) if sup <= c)
        b = blocks[home]
        if kind == "f":
            b.objective = b.objective + p
        elif kind == "g":
            b.ineqs.append(p)
        else:
            b.eqs.append(p)
    return CspProblem(n, blocks, names)
