from fractions import Fraction

import pytest
from hypothesis import settings, strategies as st

from cslme.poly import Polynomial

settings.register_profile("ci", deadline=None, derandomize=True)
settings.load_profile("ci")


@st.composite
def monomials(draw, nvars=5, maxdeg=4):
    deg = draw(st.integers(0, maxdeg))
    exps = {}
    for _ in range(deg):
        v = draw(st.integers(1, nvars))
        exps[v] = exps.get(v, 0) + 1
    return tuple(sorted(exps.items()))


@st.composite
def polynomials(draw, nvars=5, maxdeg=4, max_terms=6):
    k = draw(st.integers(0, max_terms))
    terms = {}
    for _ in range(k):
        m = draw(monomials(nvars, maxdeg))
        c = Fraction(draw(st.integers(-9, 9)), draw(st.integers(1, 4)))
        terms[m] = terms.get(m, 0) + c
    return Polynomial(terms)


@pytest.fixture(scope="session")
def ex5_1():
    from cslme.instances import load
    return load("ex5_1")


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=_criterion_key):
            terminalreporter.write_line(line)


def _criterion_key(line):
    tag = line.split()[1].rstrip(":")
    num = int("".join(c for c in tag if c.isdigit()))
    return num, tag
