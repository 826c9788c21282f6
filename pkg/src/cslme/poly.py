"""Sparse multivariate polynomials with exact or floating coefficients.

Variables are positive integers (1-based).  A monomial is a tuple of
``(var, exp)`` pairs sorted by variable with positive exponents; the
empty tuple is the constant monomial.

Coefficients are ``fractions.Fraction`` (exact mode) or ``float``
(numeric mode).  Arithmetic mixing the two produces floats, so exact
results stay exact as long as every operand is exact.
"""
from __future__ import annotations

import re
from fractions import Fraction
from numbers import Rational
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

Monomial = Tuple[Tuple[int, int], ...]
Coeff = Union[Fraction, float]

ONE: Monomial = ()


class PolyError(ValueError):
    def __init__(self, msg: str, column: Optional[int] = None):
        self.column = column    # 1-based position in the parsed text, if known
        super().__init__(msg)


# -- monomial helpers ------------------------------------------------------

def mono_degree(m: Monomial) -> int:
    return sum(e for _, e in m)


def mono_mul(a: Monomial, b: Monomial) -> Monomial:
    if not a:
        return b
    if not b:
        return a
    d = dict(a)
    for v, e in b:
        d[v] = d.get(v, 0) + e
    return tuple(sorted(d.items()))


def mono_vars(m: Monomial) -> Tuple[int, ...]:
    return tuple(v for v, _ in m)


def mono_from_exponents(variables: Sequence[int], exps: Sequence[int]) -> Monomial:
    return tuple(sorted((int(v), int(e)) for v, e in zip(variables, exps) if e))


def grlex_key(m: Monomial):
    """Sort key for graded-lex order with x1 > x2 > ... (ascending)."""
    return (mono_degree(m), tuple((-v, e) for v, e in m))


def monomials_upto(variables: Sequence[int], degree: int) -> List[Monomial]:
    """All monomials in ``variables`` of total degree <= degree, grlex ascending."""
    variables = sorted(variables)
    out: List[Monomial] = [ONE]
    layer: List[Monomial] = [ONE]
    for _ in range(degree):
        nxt = set()
        for m in layer:
            last = m[-1][0] if m else 0
            for v in variables:
                # only extend with vars >= the last one to avoid repeats
                if v < last:
                    continue
                nxt.add(mono_mul(m, ((v, 1),)))
        layer = sorted(nxt, key=grlex_key)
        out.extend(layer)
    return out


def _as_coeff(c):
    if isinstance(c, Fraction):
        return c
    if isinstance(c, bool):
        return Fraction(int(c))
    if isinstance(c, int) or isinstance(c, Rational):
        return Fraction(c)
    return float(c)


# -- polynomial ------------------------------------------------------------

class Polynomial:
    """Immutable sparse polynomial ``{monomial: coefficient}``."""

    __slots__ = ("terms", "_hash")

    def __init__(self, terms: Optional[Mapping[Monomial, Coeff]] = None):
        clean: Dict[Monomial, Coeff] = {}
        if terms:
            for m, c in terms.items():
                c = _as_coeff(c)
                if c != 0:
                    clean[m] = c
        self.terms = clean
        self._hash = None

    # constructors
    @classmethod
    def constant(cls, c) -> "Polynomial":
        return cls({ONE: c})

    @classmethod
    def var(cls, v: int, coeff=1) -> "Polynomial":
        if v < 1:
            raise PolyError(f"variable index must be >= 1, got {v}")
        return cls({((v, 1),): coeff})

    @classmethod
    def _raw(cls, terms: Dict[Monomial, Coeff]) -> "Polynomial":
        p = cls.__new__(cls)
        p.terms = terms
        p._hash = None
        return p

    # basic queries
    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(not m for m in self.terms)

    def is_exact(self) -> bool:
        return all(isinstance(c, Fraction) for c in self.terms.values())

    def degree(self) -> int:
        """Total degree; the zero polynomial has degree 0 by convention."""
        if not self.terms:
            return 0
        return max(mono_degree(m) for m in self.terms)

    def variables(self) -> Tuple[int, ...]:
        s = set()
        for m in self.terms:
            s.update(v for v, _ in m)
        return tuple(sorted(s))

    def constant_term(self) -> Coeff:
        return self.terms.get(ONE, Fraction(0))

    def coeff(self, m: Monomial) -> Coeff:
        return self.terms.get(m, Fraction(0))

    def monomials(self) -> List[Monomial]:
        """Monomials in descending grlex order."""
        return sorted(self.terms, key=grlex_key, reverse=True)

    def max_abs_coeff(self) -> float:
        return max((abs(float(c)) for c in self.terms.values()), default=0.0)

    # arithmetic
    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            return other
        if isinstance(other, (int, float, Fraction, Rational)):
            return Polynomial.constant(other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = dict(self.terms)
        for m, c in other.terms.items():
            s = out.get(m, 0) + c
            if s == 0:
                out.pop(m, None)
            else:
                out[m] = s
        return Polynomial._raw(out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial._raw({m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other + (-self)

    def __mul__(self, other):
        if isinstance(other, (int, float, Fraction, Rational)) and not isinstance(other, Polynomial):
            c0 = _as_coeff(other)
            if c0 == 0:
                return Polynomial()
            return Polynomial._raw({m: c * c0 for m, c in self.terms.items()})
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out: Dict[Monomial, Coeff] = {}
        for ma, ca in self.terms.items():
            for mb, cb in other.terms.items():
                m = mono_mul(ma, mb)
                out[m] = out.get(m, 0) + ca * cb
        return Polynomial({m: c for m, c in out.items()})

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Polynomial):
            if not other.is_constant() or other.is_zero():
                raise PolyError("can only divide by a nonzero constant")
            other = other.constant_term()
        c0 = _as_coeff(other)
        if c0 == 0:
            raise ZeroDivisionError("polynomial division by zero")
        return Polynomial._raw({m: c / c0 for m, c in self.terms.items()})

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise PolyError("only nonnegative integer powers are supported")
        result = Polynomial.constant(1)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            other = self._coerce(other)
            if other is NotImplemented:
                return False
        return self.terms == other.terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self.terms.items()))
        return self._hash

    # calculus / evaluation
    def diff(self, v: int) -> "Polynomial":
        out: Dict[Monomial, Coeff] = {}
        for m, c in self.terms.items():
            for pos, (w, e) in enumerate(m):
                if w == v:
                    nm = m[:pos] + (((w, e - 1),) if e > 1 else ()) + m[pos + 1:]
                    out[nm] = out.get(nm, 0) + c * e
                    break
        return Polynomial(out)

    def gradient(self, variables: Sequence[int]) -> List["Polynomial"]:
        return [self.diff(v) for v in variables]

    def evaluate(self, point):
        """Evaluate at ``point``.

        ``point`` is either a mapping var -> value or a sequence where the
        value of variable ``v`` sits at position ``v - 1``.  Fractions in,
        Fraction out.
        """
        get = point.__getitem__
        if not isinstance(point, Mapping):
            def get(v, _p=point):
                return _p[v - 1]
        total = 0
        for m, c in self.terms.items():
            t = c
            for v, e in m:
                t = t * get(v) ** e
            total = total + t
        return total

    def substitute(self, values: Mapping[int, "Polynomial"]) -> "Polynomial":
        """Replace variables by polynomials (others kept)."""
        out = Polynomial()
        for m, c in self.terms.items():
            t = Polynomial.constant(c)
            for v, e in m:
                if v in values:
                    t = t * values[v] ** e
                else:
                    t = t * Polynomial({((v, e),): 1})
            out = out + t
        return out

    def rename(self, mapping: Mapping[int, int]) -> "Polynomial":
        out: Dict[Monomial, Coeff] = {}
        for m, c in self.terms.items():
            nm = tuple(sorted((mapping.get(v, v), e) for v, e in m))
            out[nm] = out.get(nm, 0) + c
        return Polynomial(out)

    def to_float(self) -> "Polynomial":
        return Polynomial._raw({m: float(c) for m, c in self.terms.items()})

    def scaled(self, s) -> "Polynomial":
        return self * s

    # text
    def to_string(self, names: Optional["VarTable"] = None) -> str:
        return format_polynomial(self, names)

    def __str__(self):
        return format_polynomial(self)

    def __repr__(self):
        return f"Polynomial({format_polynomial(self)!r})"


def const(c) -> Polynomial:
    return Polynomial.constant(c)


def var(v: int) -> Polynomial:
    return Polynomial.var(v)


def as_exact(p: Polynomial) -> Polynomial:
    """Convert float coefficients to the Fractions they represent exactly."""
    return Polynomial({m: Fraction(c) for m, c in p.terms.items()})


# -- variable table --------------------------------------------------------

class VarTable:
    """Names of the variables of one problem, index ``v`` -> ``names[v-1]``."""

    def __init__(self, names: Iterable[str] = ()):
        self.names: List[str] = []
        self._index: Dict[str, int] = {}
        for nm in names:
            self.add(nm)

    @classmethod
    def standard(cls, n: int) -> "VarTable":
        return cls(f"x{i}" for i in range(1, n + 1))

    def add(self, name: str) -> int:
        if name in self._index:
            raise PolyError(f"duplicate variable name {name!r}")
        self.names.append(name)
        self._index[name] = len(self.names)
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise PolyError(f"unknown variable {name!r}") from None

    def name(self, v: int) -> str:
        if 1 <= v <= len(self.names):
            return self.names[v - 1]
        return f"x{v}"

    def __len__(self):
        return len(self.names)

    def __contains__(self, name):
        return name in self._index

    def copy(self) -> "VarTable":
        return VarTable(self.names)

    def __eq__(self, other):
        return isinstance(other, VarTable) and self.names == other.names


# -- formatting and parsing -----------------------------------------------

def format_coeff(c) -> str:
    if isinstance(c, Fraction):
        if c.denominator == 1:
            return str(c.numerator)
        return f"{c.numerator}/{c.denominator}"
    return repr(float(c))


def format_polynomial(p: Polynomial, names: Optional[VarTable] = None) -> str:
    """Deterministic text form, descending grlex; parses back to ``p``."""
    if p.is_zero():
        return "0"
    nm = names.name if names is not None else (lambda v: f"x{v}")
    parts = []
    for i, m in enumerate(p.monomials()):
        c = p.terms[m]
        neg = c < 0
        a = -c if neg else c
        factors = [nm(v) if e == 1 else f"{nm(v)}^{e}" for v, e in m]
        if not factors:
            body = format_coeff(a)
        elif a == 1:
            body = "*".join(factors)
        else:
            body = format_coeff(a) + "*" + "*".join(factors)
        if i == 0:
            parts.append(("-" if neg else "") + body)
        else:
            parts.append((" - " if neg else " + ") + body)
    return "".join(parts)


_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str):
    pos = 0
    toks = []
    while pos < len(text) and text[pos].isspace():
        pos += 1
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise PolyError(f"unexpected character {text[pos]!r} at column {pos + 1}", pos + 1)
        start = m.start(m.lastgroup)
        pos = m.end()
        toks.append((m.lastgroup, m.group(m.lastgroup), start + 1))
        while pos < len(text) and text[pos].isspace():
            pos += 1
    return toks


class _Parser:
    def __init__(self, text, names, exact):
        self.toks = _tokenize(text)
        self.i = 0
        self.names = names
        self.exact = exact
        self.text = text

    def peek(self):
        return self.toks[self.i][:2] if self.i < len(self.toks) else (None, None)

    def take(self):
        t = self.peek()
        self.i += 1
        return t

    def fail(self, msg):
        # column of the token just consumed (or end of text)
        j = min(self.i - 1, len(self.toks) - 1)
        col = self.toks[j][2] if j >= 0 and self.i <= len(self.toks) else len(self.text.rstrip()) + 1
        raise PolyError(f"{msg} at column {col} in {self.text.strip()!r}", col)

    def expr(self):
        kind, val = self.peek()
        sign = 1
        if kind == "op" and val in "+-":
            self.take()
            sign = -1 if val == "-" else 1
        acc = self.term() * sign
        while True:
            kind, val = self.peek()
            if kind == "op" and val in "+-":
                self.take()
                t = self.term()
                acc = acc + t if val == "+" else acc - t
            else:
                return acc

    def term(self):
        acc = self.factor()
        while True:
            kind, val = self.peek()
            if kind == "op" and val in "*/":
                self.take()
                rhs = self.factor()
                if val == "*":
                    acc = acc * rhs
                else:
                    if not rhs.is_constant() or rhs.is_zero():
                        self.fail("division by a non-constant or zero")
                    acc = acc / rhs.constant_term()
            elif kind in ("num", "name") or (kind == "op" and val == "("):
                # implicit multiplication, e.g. "3x1" is not allowed but "3 x1" is
                acc = acc * self.factor()
            else:
                return acc

    def factor(self):
        base = self.atom()
        kind, val = self.peek()
        if kind == "op" and val == "^":
            self.take()
            k2, v2 = self.take()
            if k2 != "num" or not v2.isdigit():
                self.fail("exponent must be a nonnegative integer")
            base = base ** int(v2)
        return base

    def atom(self):
        kind, val = self.take()
        if kind == "num":
            c = Fraction(val) if self.exact else float(val)
            return Polynomial.constant(c)
        if kind == "name":
            if self.names is not None and val in self.names:
                return Polynomial.var(self.names.index(val))
            m = re.fullmatch(r"x(\d+)", val)
            if m and int(m.group(1)) >= 1:
                v = int(m.group(1))
                if self.names is not None and v > len(self.names):
                    self.fail(f"variable {val} out of range")
                return Polynomial.var(v)
            self.fail(f"unknown variable {val!r}")
        if kind == "op" and val == "(":
            e = self.expr()
            k2, v2 = self.take()
            if (k2, v2) != ("op", ")"):
                self.fail("missing ')'")
            return e
        self.fail("unexpected end of expression" if kind is None else f"unexpected token {val!r}")


def parse_polynomial(text: str, names: Optional[VarTable] = None, exact: bool = True) -> Polynomial:
    """Parse a polynomial expression.

    Accepts integers, decimals and ``p/q`` coefficients, variables ``x<k>``
    (or any name registered in ``names``), ``+ - * / ^`` and parentheses.
    """
    if not text or not text.strip():
        raise PolyError("empty polynomial expression")
    p = _Parser(text, names, exact)
    out = p.expr()
    if p.i != len(p.toks):
        p.i += 1
        p.fail(f"trailing input {p.toks[p.i - 1][1]!r}")
    return out


# -- polynomial matrices ---------------------------------------------------

class PolyMatrix:
    """Dense matrix of polynomials (row-major list of lists)."""

    def __init__(self, rows: Sequence[Sequence[Polynomial]]):
        rows = [list(r) for r in rows]
        if rows and any(len(r) != len(rows[0]) for r in rows):
            raise PolyError("ragged PolyMatrix")
        self.rows = rows

    @classmethod
    def zeros(cls, m: int, n: int) -> "PolyMatrix":
        return cls([[Polynomial() for _ in range(n)] for _ in range(m)])

    @classmethod
    def identity(cls, n: int) -> "PolyMatrix":
        return cls([[Polynomial.constant(1) if i == j else Polynomial() for j in range(n)]
                    for i in range(n)])

    @property
    def shape(self) -> Tuple[int, int]:
        return (len(self.rows), len(self.rows[0]) if self.rows else 0)

    def __getitem__(self, ij):
        i, j = ij
        return self.rows[i][j]

    def row(self, i) -> List[Polynomial]:
        return list(self.rows[i])

    def col(self, j) -> List[Polynomial]:
        return [r[j] for r in self.rows]

    def __matmul__(self, other: "PolyMatrix") -> "PolyMatrix":
        m, k = self.shape
        k2, n = other.shape
        if k != k2:
            raise PolyError(f"shape mismatch {self.shape} @ {other.shape}")
        out = []
        for i in range(m):
            ri = self.rows[i]
            row = []
            for j in range(n):
                acc = Polynomial()
                for t in range(k):
                    a = ri[t]
                    if a.terms:
                        b = other.rows[t][j]
                        if b.terms:
                            acc = acc + a * b
                row.append(acc)
            out.append(row)
        return PolyMatrix(out)

    def apply(self, vec: Sequence[Polynomial]) -> List[Polynomial]:
        """Matrix-vector product."""
        m, k = self.shape
        if len(vec) != k:
            raise PolyError("shape mismatch in apply")
        out = []
        for i in range(m):
            acc = Polynomial()
            for a, b in zip(self.rows[i], vec):
                if a.terms and b.terms:
                    acc = acc + a * b
            out.append(acc)
        return out

    def hstack(self, other: "PolyMatrix") -> "PolyMatrix":
        if self.shape[0] != other.shape[0]:
            raise PolyError("row count mismatch in hstack")
        return PolyMatrix([a + b for a, b in zip(self.rows, other.rows)])

    def vstack(self, other: "PolyMatrix") -> "PolyMatrix":
        if self.shape[1] != other.shape[1]:
            raise PolyError("column count mismatch in vstack")
        return PolyMatrix(self.rows + other.rows)

    def transpose(self) -> "PolyMatrix":
        m, n = self.shape
        return PolyMatrix([[self.rows[i][j] for i in range(m)] for j in range(n)])

    def is_identity(self) -> bool:
        m, n = self.shape
        if m != n:
            return False
        one = Polynomial.constant(1)
        return all(self.rows[i][j] == (one if i == j else Polynomial())
                   for i in range(m) for j in range(n))

    def degree(self) -> int:
        return max((p.degree() for r in self.rows for p in r), default=-1)

    def __eq__(self, other):
        return isinstance(other, PolyMatrix) and self.rows == other.rows

    def __repr__(self):
        return "PolyMatrix([" + ", ".join("[" + ", ".join(str(p) for p in r) + "]" for r in self.rows) + "])"
