"""Exact-rational multivariate polynomials on R^d and the expression parser.

Coordinates are 1-based (``x1 .. xd``).  A polynomial is an immutable map
from exponent vectors to :class:`fractions.Fraction` coefficients; zero
coefficients are never stored, so structural equality is polynomial equality.
"""
from __future__ import annotations

import re
from fractions import Fraction
from math import factorial
from typing import Iterable, Iterator, Mapping, Sequence, Union

Scalar = Union[int, Fraction]
Exponent = tuple[int, ...]
MultiIndex = tuple[int, ...]


class ParseError(ValueError):
    """Syntax error in an expression string; ``pos`` is a 0-based offset."""

    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at position {pos})")
        self.pos = pos


def as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(value)
    return Fraction(value)


def multi_index(entries: Iterable[int], dim: int) -> MultiIndex:
    """Canonical (sorted) multi-index; raises if an entry is outside 1..dim."""
    out = tuple(sorted(entries))
    for i in out:
        if not 1 <= i <= dim:
            raise IndexError(f"coordinate index {i} out of range 1..{dim}")
    return out


def mi_counts(K: MultiIndex, dim: int) -> list[int]:
    counts = [0] * dim
    for i in K:
        counts[i - 1] += 1
    return counts


def mi_from_counts(counts: Sequence[int]) -> MultiIndex:
    return tuple(i + 1 for i, c in enumerate(counts) for _ in range(c))


def mi_merge(K: MultiIndex, L: MultiIndex) -> MultiIndex:
    return tuple(sorted(K + L))


class Poly:
    """Polynomial with rational coefficients in ``dim`` variables."""

    __slots__ = ("dim", "terms", "_hash")

    def __init__(self, dim: int, terms: Mapping[Exponent, Scalar] | None = None):
        if dim < 0:
            raise ValueError("dimension must be non-negative")
        self.dim = dim
        clean: dict[Exponent, Fraction] = {}
        if terms:
            for exp, c in terms.items():
                if len(exp) != dim:
                    raise ValueError(f"exponent {exp} does not have length {dim}")
                c = as_fraction(c)
                if c:
                    clean[tuple(exp)] = c
        self.terms = clean
        self._hash = None

    @classmethod
    def _raw(cls, dim: int, terms: dict[Exponent, Fraction]) -> "Poly":
        # trusted constructor: terms already canonical
        p = object.__new__(cls)
        p.dim = dim
        p.terms = terms
        p._hash = None
        return p

    @classmethod
    def const(cls, dim: int, c: Scalar) -> "Poly":
        c = as_fraction(c)
        return cls._raw(dim, {(0,) * dim: c} if c else {})

    @classmethod
    def zero(cls, dim: int) -> "Poly":
        return cls._raw(dim, {})

    @classmethod
    def var(cls, dim: int, i: int) -> "Poly":
        if not 1 <= i <= dim:
            raise IndexError(f"coordinate index {i} out of range 1..{dim}")
        exp = [0] * dim
        exp[i - 1] = 1
        return cls._raw(dim, {tuple(exp): Fraction(1)})

    @classmethod
    def monomial(cls, exp: Sequence[int], coeff: Scalar = 1) -> "Poly":
        return cls(len(exp), {tuple(exp): coeff})

    # -- predicates -------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self) -> bool:
        return bool(self.terms)

    def is_constant(self) -> bool:
        return all(not any(e) for e in self.terms)

    def constant_term(self) -> Fraction:
        return self.terms.get((0,) * self.dim, Fraction(0))

    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=-1)

    def max_abs_coeff(self) -> float:
        return max((abs(float(c)) for c in self.terms.values()), default=0.0)

    # -- arithmetic -------------------------------------------------------
    def _coerce(self, other) -> "Poly":
        if isinstance(other, Poly):
            if other.dim != self.dim:
                raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")
            return other
        if isinstance(other, (int, Fraction)):
            return Poly.const(self.dim, other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = dict(self.terms)
        for e, c in other.terms.items():
            s = out.get(e, 0) + c
            if s:
                out[e] = s
            else:
                out.pop(e, None)
        return Poly._raw(self.dim, out)

    __radd__ = __add__

    def __neg__(self):
        return Poly._raw(self.dim, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c: Scalar) -> "Poly":
        c = as_fraction(c)
        if not c:
            return Poly.zero(self.dim)
        return Poly._raw(self.dim, {e: v * c for e, v in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out: dict[Exponent, Fraction] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                s = out.get(e, 0) + c1 * c2
                if s:
                    out[e] = s
                else:
                    out.pop(e, None)
        return Poly._raw(self.dim, out)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "Poly":
        if not isinstance(k, int) or k < 0:
            raise ValueError("only non-negative integer powers")
        result = Poly.const(self.dim, 1)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.terms == Poly.const(self.dim, other).terms
        if not isinstance(other, Poly):
            return NotImplemented
        return self.dim == other.dim and self.terms == other.terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.dim, frozenset(self.terms.items())))
        return self._hash

    # -- calculus ---------------------------------------------------------
    def partial(self, i: int) -> "Poly":
        if not 1 <= i <= self.dim:
            raise IndexError(f"coordinate index {i} out of range 1..{self.dim}")
        k = i - 1
        out = {}
        for e, c in self.terms.items():
            if e[k]:
                ne = e[:k] + (e[k] - 1,) + e[k + 1:]
                out[ne] = c * e[k]
        return Poly._raw(self.dim, out)

    def apply_multiindex(self, K: Iterable[int]) -> "Poly":
        """Iterated partial derivative ``d_K``; the empty multi-index is the identity."""
        counts = [0] * self.dim
        for i in K:
            if not 1 <= i <= self.dim:
                raise IndexError(f"coordinate index {i} out of range 1..{self.dim}")
            counts[i - 1] += 1
        return self.derive_counts(counts)

    def derive_counts(self, counts: Sequence[int]) -> "Poly":
        if not any(counts):
            return self
        out = {}
        for e, c in self.terms.items():
            coeff = c
            ok = True
            for a, k in zip(e, counts):
                if k > a:
                    ok = False
                    break
                if k:
                    coeff *= factorial(a) // factorial(a - k)
            if ok:
                out[tuple(a - k for a, k in zip(e, counts))] = coeff
        return Poly._raw(self.dim, out)

    def evaluate(self, point: Sequence) -> Fraction:
        total = Fraction(0)
        for e, c in self.terms.items():
            v = c
            for x, a in zip(point, e):
                if a:
                    v *= Fraction(x) ** a
            total += v
        return total

    # -- printing ---------------------------------------------------------
    def sorted_terms(self) -> list[tuple[Exponent, Fraction]]:
        return sorted(self.terms.items(), key=lambda t: (-sum(t[0]), tuple(-a for a in t[0])))

    def __str__(self) -> str:
        return format_poly(self)

    def __repr__(self) -> str:
        return f"Poly({self.dim}, {format_poly(self)!r})"

    def __iter__(self) -> Iterator[tuple[Exponent, Fraction]]:
        return iter(self.terms.items())


def _format_monomial(exp: Exponent) -> str:
    parts = []
    for i, a in enumerate(exp):
        if a == 1:
            parts.append(f"x{i + 1}")
        elif a > 1:
            parts.append(f"x{i + 1}^{a}")
    return "*".join(parts)


def _format_abs_coeff(c: Fraction) -> str:
    return str(abs(c.numerator)) if c.denominator == 1 else f"{abs(c.numerator)}/{c.denominator}"


def format_term(exp: Exponent, c: Fraction) -> tuple[str, str]:
    """Return (sign, body) for a single term, body without sign."""
    sign = "-" if c < 0 else "+"
    mono = _format_monomial(exp)
    if not mono:
        return sign, _format_abs_coeff(c)
    if abs(c) == 1:
        return sign, mono
    return sign, f"{_format_abs_coeff(c)}*{mono}"


def format_poly(p: Poly) -> str:
    if not p.terms:
        return "0"
    out = []
    for k, (e, c) in enumerate(p.sorted_terms()):
        sign, body = format_term(e, c)
        if k == 0:
            out.append(body if sign == "+" else f"-{body}")
        else:
            out.append(f" {sign} {body}")
    return "".join(out)


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(?P<int>\d+)|(?P<var>x\d+)|(?P<dvar>d\d+)|(?P<op>[-+*/^()]))")


def tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, text: str, dim: int):
        self.dim = dim
        self.tokens = tokenize(text)
        self.i = 0

    def peek(self, offset: int = 0):
        return self.tokens[min(self.i + offset, len(self.tokens) - 1)]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, kind: str, value: str | None = None):
        tok = self.take()
        if tok[0] != kind or (value is not None and tok[1] != value):
            want = value or kind
            raise ParseError(f"expected {want!r}, found {tok[1] or 'end of input'!r}", tok[2])
        return tok

    def at_op(self, value: str) -> bool:
        tok = self.peek()
        return tok[0] == "op" and tok[1] == value

    def posint(self) -> int:
        tok = self.expect("int")
        v = int(tok[1])
        if v <= 0:
            raise ParseError("expected a positive integer", tok[2])
        return v

    def atom(self) -> Poly:
        kind, val, pos = self.peek()
        if kind == "int":
            self.take()
            num = int(val)
            if self.at_op("/") and self.peek(1)[0] == "int":
                self.take()
                return Poly.const(self.dim, Fraction(num, self.posint()))
            return Poly.const(self.dim, num)
        if kind == "var":
            self.take()
            idx = int(val[1:])
            if not 1 <= idx <= self.dim:
                raise ParseError(f"coordinate index {idx} exceeds dimension {self.dim}", pos)
            return Poly.var(self.dim, idx)
        if kind == "op" and val == "(":
            self.take()
            p = self.expr()
            self.expect("op", ")")
            return p
        raise ParseError(f"unexpected token {val or 'end of input'!r}", pos)

    def factor(self) -> Poly:
        base = self.atom()
        if self.at_op("^") and self.peek(1)[0] == "int":
            self.take()
            return base ** self.posint()
        return base

    def term(self) -> Poly:
        p = self.factor()
        while self.at_op("*") and self.peek(1)[0] != "dvar":
            self.take()
            p = p * self.factor()
        return p

    def expr(self) -> Poly:
        neg = False
        if self.at_op("-"):
            self.take()
            neg = True
        p = self.term()
        if neg:
            p = -p
        while self.at_op("+") or self.at_op("-"):
            op = self.take()[1]
            t = self.term()
            p = p + t if op == "+" else p - t
        return p


def parse_poly(text: str, dim: int) -> Poly:
    """Parse an expression such as ``"x1*x2 + 3/2"`` into a canonical :class:`Poly`."""
    if dim < 1:
        raise ValueError("dimension must be positive")
    parser = _Parser(text, dim)
    p = parser.expr()
    tok = parser.peek()
    if tok[0] != "end":
        raise ParseError(f"unexpected token {tok[1]!r}", tok[2])
    return p


def poly_partial(p: Poly, i: int) -> Poly:
    return p.partial(i)


def poly_apply_multiindex(p: Poly, K: Iterable[int]) -> Poly:
    return p.apply_multiindex(K)
