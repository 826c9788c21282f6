"""Command line front end: ``cslme <command> FILE ...``.

FILE is a problem file path, or the name of a bundled instance such as
``ex5_1`` / ``ex5_1.popb``.  Tables go to stdout, diagnostics to stderr.
Exit codes: 0 ok, 2 parse/validation error, 3 LME synthesis failure,
4 solver failure, 5 sandwich violation.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
import time
from typing import List, Optional

from . import instances
from .csp import CspError, CspProblem, build_tree, check_rip, validate_csp
from .lme import LmeError, block_lme
from .moment import MomentError, assemble_cs_moment, assemble_dense_moment, min_order, solve_relaxation
from .oracle import CERTIFY_TOL, SandwichViolation, compare_bounds, local_search_upper_bound
from .poly import PolyError, format_polynomial
from .problem_file import ProblemFileError, parse_problem_file, write_problem_file
from .reform import build_reformulation, enumerate_nu, extended_cliques
from .sdp import export_sdpa

EXIT_OK, EXIT_PARSE, EXIT_LME, EXIT_SOLVER, EXIT_SANDWICH = 0, 2, 3, 4, 5

TSV_HEADER = "d\tmode\tLB\tstatus\ttime\tUB\tgap"


class _Exit(Exception):
    def __init__(self, code: int, msg: str):
        super().__init__(msg)
        self.code = code


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def load_problem(arg: str) -> CspProblem:
    """Read FILE, falling back to the bundled instances."""
    path = arg
    if not os.path.exists(path):
        cand = instances.data_path(os.path.basename(arg))
        if os.path.exists(cand):
            path = cand
        else:
            raise _Exit(EXIT_PARSE, f"{arg}: no such file or bundled instance")
    try:
        problem = parse_problem_file(path)
        validate_csp(problem)
    except (ProblemFileError, PolyError, CspError) as e:
        raise _Exit(EXIT_PARSE, f"{arg}: {e}")
    return problem


def _reformulate(problem: CspProblem, mode: str, deg_cap: Optional[int]) -> CspProblem:
    if mode == "none":
        return problem
    try:
        return build_reformulation(problem, mode, deg_cap).problem
    except LmeError as e:
        raise _Exit(EXIT_LME, f"LME synthesis failed: {e}")


def _relaxation(problem: CspProblem, order: Optional[int], dense: bool):
    dmin = min_order(problem)
    d = dmin if order is None else order
    if d < dmin:
        _err(f"order {d} is below the minimal admissible order; using d = {dmin}")
        d = dmin
    try:
        if dense:
            return assemble_dense_moment(problem, d)
        return assemble_cs_moment(problem, d)
    except MomentError as e:
        raise _Exit(EXIT_PARSE, str(e))


def _fmt_num(x: float, digits: int = 8) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    out = f"{x:.{digits}f}"
    return out[1:] if out.startswith("-") and float(out) == 0 else out


# -- commands -----------------------------------------------------------------

def cmd_analyze(args) -> int:
    p = load_problem(args.file)
    rip = check_rip(p.cliques)
    print(f"problem {p.name or args.file}: n = {p.n}, s = {p.s}")
    for i, b in enumerate(p.blocks, start=1):
        print(f"  I_{i} = {list(b.clique)}  (m_{i} = {len(b.ineqs)} inequalities, {len(b.eqs)} equalities)")
    print(f"running intersection: {'holds' if rip.holds else 'fails'}")
    if not rip.holds:
        for i, inter in rip.violations.items():
            print(f"  clique {i + 1}: {list(inter)} is not inside one earlier clique")
        return EXIT_PARSE
    tree = build_tree(p.cliques)
    nus = enumerate_nu(tree, p.n)
    print(f"arcs: {len(tree.arcs)}")
    for (i, t) in tree.arcs:
        print(f"  ({i}, {t})  C = {list(tree.overlap(i, t))}")
    print(f"nu variables: {len(nus)}")
    if nus:
        print("  " + " ".join(u.name for u in nus))
    ext = extended_cliques(p, tree, nus)
    print("extended cliques: " + "  ".join(f"|I^_{i}| = {len(c)}" for i, c in enumerate(ext, start=1)))
    return EXIT_OK


def cmd_lme(args) -> int:
    p = load_problem(args.file)
    failed = False
    for i in range(1, p.s + 1):
        b = p.block(i)
        names = [p.names.name(v) for v in b.clique]
        try:
            lme = block_lme(p, i, args.deg_cap)
        except LmeError as e:
            print(f"block {i}: FAILED ({e})")
            failed = True
            continue
        print(f"block {i}: family {lme.family}, degree {lme.degree}, variables {' '.join(names)}")
        for j in range(lme.L.shape[0]):
            row = ", ".join(format_polynomial(q, p.names) for q in lme.L.rows[j])
            print(f"  L[{j + 1}] = [{row}]")
    if failed:
        _err("LME synthesis failed for at least one block")
        return EXIT_LME
    return EXIT_OK


def cmd_reformulate(args) -> int:
    p = load_problem(args.file)
    q = _reformulate(p, args.mode, args.deg_cap)
    try:
        write_problem_file(q, args.output, comment=f"{args.mode} reformulation of {p.name or args.file}")
    except OSError as e:
        raise _Exit(EXIT_PARSE, f"cannot write {args.output}: {e}")
    print(f"wrote {args.output}: n = {q.n}, s = {q.s}, "
          f"{sum(len(b.ineqs) for b in q.blocks)} inequalities, {sum(len(b.eqs) for b in q.blocks)} equalities")
    return EXIT_OK


def cmd_relax(args) -> int:
    p = load_problem(args.file)
    q = _reformulate(p, args.mode, args.deg_cap)
    r = _relaxation(q, args.order, args.dense)
    sm = r.summary()
    print(f"order d = {r.order}, mode {args.mode}{' (dense)' if args.dense else ''}")
    print(f"moments |Gamma_d| = {sm['moments']} (SDP variables {r.sdp.m})")
    print(f"psd blocks: {len(r.sdp.block_sizes)}, sizes {' '.join(str(abs(n)) + ('d' if n < 0 else '') for n in r.sdp.block_sizes)}")
    print(f"largest block: {sm['largest_block']}")
    print(f"equality rows: {r.n_equality_rows} (after facial reduction {r.sdp.E.shape[0]}, dropped {r.n_face_reduced})")
    return EXIT_OK


def _oracle(p: CspProblem, args):
    box = tuple(args.box) if args.box else None
    return local_search_upper_bound(p, starts=args.oracle_starts, seed=args.seed, box=box)


def cmd_solve(args) -> int:
    p = load_problem(args.file)
    q = _reformulate(p, args.mode, args.deg_cap)
    r = _relaxation(q, args.order, args.dense)
    if args.export_sdpa:
        try:
            export_sdpa(r.sdp, args.export_sdpa)
        except OSError as e:
            raise _Exit(EXIT_SOLVER, f"cannot write {args.export_sdpa}: {e}")
        _err(f"SDPA file written to {args.export_sdpa}")
    rep = solve_relaxation(r, tol=args.tol, max_iter=args.max_iter, mode=args.mode,
                           trace_bound=args.trace_bound)
    line = f"LB = {rep.bound:.6f} ± {CERTIFY_TOL:g}"
    code = EXIT_OK
    if not rep.ok:
        code = EXIT_SOLVER
    ub = None
    if args.oracle_starts > 0:
        ub = _oracle(p, args)
    if ub is not None and ub.found and rep.ok:
        try:
            sw = compare_bounds(rep.bound, ub.value)
        except SandwichViolation as e:
            print(line + ", SANDWICH VIOLATION")
            _err(str(e))
            return EXIT_SANDWICH
        line += ", CERTIFIED" if sw.certified else f", not certified (gap {sw.gap:.2e})"
    print(line)
    print(f"status: {rep.status}" + (f" ({rep.message})" if rep.message else ""))
    if rep.trace_bound is not None:
        print(f"trace bound: sum tr(X) <= {rep.trace_bound:g}")
    print(f"moment value: {rep.primal_objective:.10f}  sos value: {rep.dual_objective:.10f}")
    print(f"residuals: primal {rep.primal_infeasibility:.2e}  dual {rep.dual_infeasibility:.2e}  "
          f"gap {rep.relative_gap:.2e}  iterations {rep.iterations}")
    if ub is not None:
        print(f"oracle UB: {_fmt_num(ub.value)} ({ub.feasible_starts}/{ub.starts} feasible starts, seed {ub.seed})")
    if not args.no_timing:
        print(f"time: {rep.seconds:.2f} s")
    if code != EXIT_OK:
        _err(f"solver did not converge: {rep.status}")
    return code


def _parse_orders(text: str) -> List[int]:
    if ":" in text:
        a, b = text.split(":", 1)
        lo, hi = int(a), int(b)
        if hi < lo:
            raise ValueError("empty order range")
        return list(range(lo, hi + 1))
    return [int(x) for x in text.split(",") if x]


def compare_rows(p: CspProblem, orders: List[int], modes: List[str], args) -> List[List[str]]:
    """One row per (d, mode) cell; the oracle runs once."""
    ub = local_search_upper_bound(p, starts=args.oracle_starts, seed=args.seed,
                                  box=tuple(args.box) if args.box else None)
    ubv = ub.value if ub.found else math.inf
    rows = []
    reformed = {}
    for mode in modes:
        try:
            reformed[mode] = _reformulate(p, mode, args.deg_cap)
        except _Exit as e:
            reformed[mode] = e
    for d in orders:
        for mode in modes:
            q = reformed[mode]
            if isinstance(q, _Exit):
                rows.append([str(d), mode, "-", "lme-failure", "-", _fmt_num(ubv), "-"])
                continue
            t0 = time.perf_counter()
            try:
                r = assemble_dense_moment(q, d) if args.dense else assemble_cs_moment(q, d)
            except MomentError:
                rows.append([str(d), mode, "-", "not-defined", "-", _fmt_num(ubv), "-"])
                continue
            rep = solve_relaxation(r, tol=args.tol, max_iter=args.max_iter, mode=mode,
                                   trace_bound=args.trace_bound)
            secs = time.perf_counter() - t0
            gap = "-"
            if rep.ok and ub.found:
                sw = compare_bounds(rep.bound, ubv)    # raises on a violation
                gap = f"{sw.gap:.2e}"
            tstr = "-" if args.no_timing else f"{secs:.2f}"
            rows.append([str(d), mode, _fmt_num(rep.bound), rep.status, tstr, _fmt_num(ubv), gap])
    return rows


def cmd_compare(args) -> int:
    p = load_problem(args.file)
    try:
        orders = _parse_orders(args.orders)
    except ValueError as e:
        raise _Exit(EXIT_PARSE, f"bad --orders: {e}")
    modes = [m for m in args.modes.split(",") if m]
    for m in modes:
        if m not in ("none", "cslme", "lme"):
            raise _Exit(EXIT_PARSE, f"unknown mode {m!r}")
    try:
        rows = compare_rows(p, orders, modes, args)
    except SandwichViolation as e:
        _err(str(e))
        return EXIT_SANDWICH
    print(TSV_HEADER)
    for r in rows:
        print("\t".join(r))
    return EXIT_OK


# -- argument parsing ---------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cslme", description="Sparse Lagrange multiplier expressions "
                                 "and moment relaxations for polynomial optimization.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common_solver(sp_):
        sp_.add_argument("--dense", action="store_true", help="one clique holding every variable")
        sp_.add_argument("--tol", type=float, default=1e-8)
        sp_.add_argument("--max-iter", type=int, default=200)
        sp_.add_argument("--trace-bound", type=float, default=None, metavar="T",
                         help="add sum tr(X) <= T on the SOS side (for degenerate relaxations)")
        sp_.add_argument("--oracle-starts", type=int, default=32)
        sp_.add_argument("--seed", type=int, default=0)
        sp_.add_argument("--box", type=float, nargs=2, default=None, metavar=("LO", "HI"))
        sp_.add_argument("--no-timing", action="store_true", help="omit wall times (byte-stable output)")

    s = sub.add_parser("analyze", help="csp validation, RIP, tree arcs, nu count")
    s.add_argument("file")
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("lme", help="per-block Lagrange multiplier expressions")
    s.add_argument("file")
    s.add_argument("--deg-cap", type=int, default=None)
    s.set_defaults(func=cmd_lme)

    s = sub.add_parser("reformulate", help="write the reformulated problem")
    s.add_argument("file")
    s.add_argument("--mode", choices=("cslme", "lme"), default="cslme")
    s.add_argument("--deg-cap", type=int, default=None)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_reformulate)

    s = sub.add_parser("relax", help="relaxation sizes")
    s.add_argument("file")
    s.add_argument("--order", type=int, default=None)
    s.add_argument("--mode", choices=("none", "cslme", "lme"), default="cslme")
    s.add_argument("--dense", action="store_true")
    s.add_argument("--deg-cap", type=int, default=None)
    s.set_defaults(func=cmd_relax)

    s = sub.add_parser("solve", help="solve one relaxation")
    s.add_argument("file")
    s.add_argument("--order", type=int, default=None)
    s.add_argument("--mode", choices=("none", "cslme", "lme"), default="cslme")
    s.add_argument("--deg-cap", type=int, default=None)
    s.add_argument("--export-sdpa", default=None, metavar="PATH")
    common_solver(s)
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("compare", help="table of bounds over orders and modes")
    s.add_argument("file")
    s.add_argument("--orders", required=True, help="D1:D2 or a comma list")
    s.add_argument("--modes", default="none,cslme")
    s.add_argument("--deg-cap", type=int, default=None)
    common_solver(s)
    s.set_defaults(func=cmd_compare)
    return ap


def run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_PARSE
    try:
        return args.func(args)
    except _Exit as e:
        _err(str(e))
        return e.code


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
