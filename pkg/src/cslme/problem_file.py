"""Plain-text problem files (``.popb``).

One directive per line, ``#`` starts a comment::

    nvars 6
    clique 1 : 1 2 3
    clique 2 : 3 4 5 6
    obj 1 : x1*x2*x3 - x1^2 - x2^2
    ineq 1 : 1 - x1 - x2 - x3
    eq 2 : x4 - x5^2
    known_min -1
    box -2 2

Extra directives: ``name <text>`` and ``var <k> <name>``, which renames
variable k (reformulated problems use it for ``nu_i_t_k``).  Clique
members may be given by index or by name.
"""
from __future__ import annotations

import os
from fractions import Fraction
from typing import Dict, List, Optional, Tuple, Union

from .csp import Block, CspError, CspProblem, validate_csp
from .poly import PolyError, VarTable, format_coeff, format_polynomial, parse_polynomial


class ProblemFileError(ValueError):
    def __init__(self, msg: str, line: Optional[int] = None, column: Optional[int] = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + msg)


def _number(tok: str, ln: int) -> float:
    try:
        return float(Fraction(tok))
    except (ValueError, ZeroDivisionError):
        raise ProblemFileError(f"bad number {tok!r}", ln) from None


def parse_problem_text(text: str, name: str = "") -> CspProblem:
    lines = []
    for ln, raw in enumerate(text.splitlines(), start=1):
        s = raw.split("#", 1)[0]
        indent = len(s) - len(s.lstrip())
        s = s.strip()
        if s:
            lines.append((ln, s, indent))
    n = None
    renames: Dict[int, str] = {}
    known_min = None
    box = None
    for ln, s, indent in lines:
        key = s.split()[0]
        if key == "nvars":
            parts = s.split()
            if len(parts) != 2 or not parts[1].isdigit() or int(parts[1]) < 1:
                raise ProblemFileError("expected 'nvars <positive int>'", ln)
            if n is not None:
                raise ProblemFileError("nvars given twice", ln)
            n = int(parts[1])
        elif key == "var":
            parts = s.split()
            if len(parts) != 3 or not parts[1].isdigit():
                raise ProblemFileError("expected 'var <index> <name>'", ln)
            renames[int(parts[1])] = parts[2]
        elif key == "name":
            name = s[4:].strip()
        elif key == "known_min":
            parts = s.split()
            if len(parts) != 2:
                raise ProblemFileError("expected 'known_min <value>'", ln)
            known_min = _number(parts[1], ln)
        elif key == "box":
            parts = s.split()
            if len(parts) != 3:
                raise ProblemFileError("expected 'box <lo> <hi>'", ln)
            box = (_number(parts[1], ln), _number(parts[2], ln))
            if not box[0] < box[1]:
                raise ProblemFileError("box needs lo < hi", ln)
    if n is None:
        raise ProblemFileError("nvars missing")
    names = VarTable.standard(n)
    for k, nm in renames.items():
        if not 1 <= k <= n:
            raise ProblemFileError(f"var index {k} outside 1..{n}")
        names.names[k - 1] = nm
    names = VarTable(names.names)
    cliques: Dict[int, Tuple[int, ...]] = {}
    objs: Dict[int, list] = {}
    ineqs: Dict[int, list] = {}
    eqs: Dict[int, list] = {}
    for ln, s, indent in lines:
        key = s.split()[0]
        if key in ("nvars", "var", "name", "known_min", "box"):
            continue
        if key not in ("clique", "obj", "ineq", "eq"):
            raise ProblemFileError(f"unknown directive {key!r}", ln)
        head, sep, rest = s.partition(":")
        if not sep:
            raise ProblemFileError(f"expected '{key} <i> : ...'", ln)
        hp = head.split()
        if len(hp) != 2 or not hp[1].isdigit() or int(hp[1]) < 1:
            raise ProblemFileError(f"expected '{key} <block index> :'", ln)
        i = int(hp[1])
        if key == "clique":
            if i in cliques:
                raise ProblemFileError(f"clique {i} defined twice", ln)
            members = []
            for tok in rest.split():
                if tok.isdigit():
                    members.append(int(tok))
                else:
                    try:
                        members.append(names.index(tok))
                    except PolyError:
                        raise ProblemFileError(f"unknown variable {tok!r}", ln) from None
            if not members:
                raise ProblemFileError(f"clique {i} is empty", ln)
            if len(set(members)) != len(members):
                raise ProblemFileError(f"clique {i} repeats a variable", ln)
            cliques[i] = tuple(sorted(members))
            continue
        try:
            p = parse_polynomial(rest, names)
        except PolyError as e:
            col = None if e.column is None else indent + len(head) + 1 + e.column
            msg = str(e).split(" at column")[0]
            raise ProblemFileError(msg, ln, col) from None
        {"obj": objs, "ineq": ineqs, "eq": eqs}[key].setdefault(i, []).append((ln, p))
    if not cliques:
        raise ProblemFileError("no cliques given")
    s_count = max(cliques)
    if sorted(cliques) != list(range(1, s_count + 1)):
        raise ProblemFileError(f"cliques must be numbered 1..{s_count} without gaps")
    for d in (objs, ineqs, eqs):
        for i, items in d.items():
            if i not in cliques:
                raise ProblemFileError(f"block {i} has no clique", items[0][0])
    blocks = []
    for i in range(1, s_count + 1):
        f = sum((p for _, p in objs.get(i, [])), start=parse_polynomial("0"))
        blocks.append(Block(cliques[i], f, [p for _, p in ineqs.get(i, [])], [p for _, p in eqs.get(i, [])]))
    prob = CspProblem(n, blocks, names, name, known_min, box)
    try:
        validate_csp(prob)
    except CspError as e:
        raise ProblemFileError(str(e)) from None
    return prob


def parse_problem_file(path: Union[str, os.PathLike]) -> CspProblem:
    with open(path) as fh:
        text = fh.read()
    base = os.path.splitext(os.path.basename(str(path)))[0]
    return parse_problem_text(text, name=base)


def format_problem(problem: CspProblem, comment: str = "") -> str:
    out: List[str] = []
    if comment:
        out.extend("# " + ln for ln in comment.splitlines())
    if problem.name:
        out.append(f"name {problem.name}")
    out.append(f"nvars {problem.n}")
    names = problem.names
    for k in range(1, problem.n + 1):
        if names.name(k) != f"x{k}":
            out.append(f"var {k} {names.name(k)}")
    for i, b in enumerate(problem.blocks, start=1):
        out.append(f"clique {i} : " + " ".join(str(v) for v in b.clique))
    for i, b in enumerate(problem.blocks, start=1):
        if not b.objective.is_zero():
            out.append(f"obj {i} : {format_polynomial(b.objective, names)}")
        for g in b.ineqs:
            out.append(f"ineq {i} : {format_polynomial(g, names)}")
        for h in b.eqs:
            out.append(f"eq {i} : {format_polynomial(h, names)}")
    if problem.known_min is not None:
        km = Fraction(problem.known_min).limit_denominator(10 ** 6)
        out.append("known_min " + (format_coeff(km) if float(km) == problem.known_min else repr(problem.known_min)))
    if problem.box is not None:
        out.append(f"box {problem.box[0]!r} {problem.box[1]!r}")
    return "\n".join(out) + "\n"


def write_problem_file(problem: CspProblem, path: Union[str, os.PathLike], comment: str = "") -> None:
    with open(path, "w") as fh:
        fh.write(format_problem(problem, comment))
