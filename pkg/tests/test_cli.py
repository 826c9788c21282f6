import hashlib

import pytest

from cslme import cli
from cslme.cli import TSV_HEADER, run
from cslme.instances import load
from cslme.moment import assemble_cs_moment
from cslme.oracle import OracleResult
from cslme.problem_file import parse_problem_file
from cslme.reform import build_reformulation
from cslme.sdp import to_sdpa_string

BAD_LME = """nvars 2
clique 1 : 1 2
obj 1 : x1 + x2
ineq 1 : x1
ineq 1 : -x1
"""


def sdp_hash(sdp):
    return hashlib.sha256(to_sdpa_string(sdp).encode()).hexdigest()


def test_analyze_ex54(capsys):
    assert run(["analyze", "ex5_4.popb"]) == 0
    out = capsys.readouterr().out
    assert "arcs: 4" in out and "nu variables: 8" in out
    assert "running intersection: holds" in out


def test_analyze_bundled_name_without_suffix(capsys):
    assert run(["analyze", "ex5_1"]) == 0
    assert "n = " in capsys.readouterr().out


def test_missing_file(capsys):
    assert run(["analyze", "no_such_problem.popb"]) == 2
    assert "no such file" in capsys.readouterr().err


def test_parse_error_exit_code(tmp_path, capsys):
    f = tmp_path / "bad.popb"
    f.write_text("nvars 2\nclique 1 : 1 2\nobj 1 : x1 +* x2\n")
    assert run(["analyze", str(f)]) == 2
    err = capsys.readouterr().err
    assert "line 3" in err


def test_containment_error(tmp_path, capsys):
    f = tmp_path / "bad.popb"
    f.write_text("nvars 4\nclique 1 : 1 2 3\nobj 1 : x4\n")
    assert run(["relax", str(f)]) == 2


def test_bad_arguments():
    assert run(["solve"]) == 2
    assert run(["frobnicate", "ex5_1"]) == 2


def test_lme_failure_exit_code(tmp_path, capsys):
    f = tmp_path / "sing.popb"
    f.write_text(BAD_LME)
    assert run(["lme", str(f), "--deg-cap", "2"]) == 3
    assert "FAILED" in capsys.readouterr().out
    assert run(["solve", str(f), "--deg-cap", "2"]) == 3


def test_lme_prints_polynomials(capsys):
    assert run(["lme", "ex5_4"]) == 0
    out = capsys.readouterr().out
    assert out.count("block ") == 5 and "L[1]" in out


def test_relax_sizes(capsys):
    assert run(["relax", "ex5_1", "--order", "2", "--mode", "none"]) == 0
    out = capsys.readouterr().out
    assert "order d = 2" in out and "psd blocks" in out


def test_solve_ex51_plain(capsys):
    assert run(["solve", "ex5_1", "--order", "2", "--mode", "none", "--oracle-starts", "8", "--no-timing"]) == 0
    out = capsys.readouterr().out
    first = out.splitlines()[0]
    assert first.startswith("LB = ") and "± 1e-05" in first
    lb = float(first.split()[2].rstrip(","))
    assert -1.001 <= lb <= -1.0 + 1e-6
    assert "status: optimal" in out and "time:" not in out


def test_solve_raises_order_to_minimum(capsys):
    assert run(["solve", "ex5_1", "--order", "1", "--oracle-starts", "0"]) == 0
    assert "minimal admissible order" in capsys.readouterr().err


def test_solver_failure_exit_code(capsys):
    assert run(["solve", "ex5_1", "--order", "2", "--max-iter", "2", "--oracle-starts", "0"]) == 4


def test_sandwich_exit_code(monkeypatch, capsys):
    fake = OracleResult(-5.0, [0.0] * 9, 0.0, 1, 1, 0)
    monkeypatch.setattr(cli, "local_search_upper_bound", lambda *a, **k: fake)
    assert run(["solve", "ex5_1", "--order", "2", "--mode", "none"]) == 5
    assert "SANDWICH VIOLATION" in capsys.readouterr().out
    assert run(["compare", "ex5_1", "--orders", "2", "--modes", "none"]) == 5


def test_export_sdpa(tmp_path, capsys):
    f = tmp_path / "r.dat-s"
    assert run(["solve", "ex5_1", "--order", "2", "--export-sdpa", str(f), "--oracle-starts", "0"]) == 0
    q = build_reformulation(load("ex5_1"), "cslme").problem
    assert f.read_text() == to_sdpa_string(assemble_cs_moment(q, 2).sdp)


def test_compare_tsv(capsys):
    argv = ["compare", "ex5_1", "--orders", "1:2", "--modes", "none,cslme", "--oracle-starts", "8", "--no-timing"]
    assert run(argv) == 0
    out = capsys.readouterr().out
    lines = out.splitlines()
    assert lines[0] == TSV_HEADER
    rows = [ln.split("\t") for ln in lines[1:]]
    assert [(r[0], r[1]) for r in rows] == [("1", "none"), ("1", "cslme"), ("2", "none"), ("2", "cslme")]
    assert rows[1][3] == "not-defined"
    for r in rows:
        assert len(r) == 7
        if r[3] in ("optimal", "near-optimal"):
            assert float(r[2]) <= float(r[5]) + 1e-6
    assert run(argv) == 0
    assert capsys.readouterr().out == out


def test_compare_bad_orders():
    assert run(["compare", "ex5_1", "--orders", "3:2"]) == 2
    assert run(["compare", "ex5_1", "--orders", "2", "--modes", "bogus"]) == 2


@pytest.mark.parametrize("name", ["ex5_1", "ex5_3", "ex5_4"])
def test_reformulate_round_trip(name, tmp_path, capsys):
    out = tmp_path / "ref.popb"
    assert run(["reformulate", name, "--mode", "cslme", "-o", str(out)]) == 0
    q_file = parse_problem_file(out)
    q_mem = build_reformulation(load(name), "cslme").problem
    d = 3 if name == "ex5_3" else 2
    assert sdp_hash(assemble_cs_moment(q_file, d).sdp) == sdp_hash(assemble_cs_moment(q_mem, d).sdp)
