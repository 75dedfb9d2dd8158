"""Multivector fields with polynomial coefficients and the Schouten-Nijenhuis bracket.

A grade-``k`` field is stored as ``{(i1 < ... < ik): Poly}`` meaning
``sum X^{i1..ik} d_{i1} ^ ... ^ d_{ik}``.  The skew tensor component for an
arbitrary index tuple is the stored component times the sign of the sorting
permutation (zero on repeated indices), so for ``pi = d1^d2`` we have
``pi^{12} = 1 = -pi^{21}`` and ``{x1, x2} = 1``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

from .poly import ParseError, Poly, _Parser, format_poly
from .series import EpsSeries


def sort_sign(indices: Iterable[int]) -> tuple[int, tuple[int, ...]]:
    """Sign of the permutation sorting ``indices`` and the sorted tuple; sign 0 on repeats."""
    idx = list(indices)
    sign = 1
    # insertion sort, counting transpositions
    for i in range(1, len(idx)):
        j = i
        while j > 0 and idx[j - 1] > idx[j]:
            idx[j - 1], idx[j] = idx[j], idx[j - 1]
            sign = -sign
            j -= 1
    for a, b in zip(idx, idx[1:]):
        if a == b:
            return 0, tuple(idx)
    return sign, tuple(idx)


@dataclass(frozen=True)
class MultiVectorField:
    dim: int
    grade: int
    components: Mapping[tuple[int, ...], Poly] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for idx, p in self.components.items():
            idx = tuple(idx)
            if len(idx) != self.grade:
                raise ValueError(f"component {idx} does not have grade {self.grade}")
            if any(b <= a for a, b in zip(idx, idx[1:])):
                raise ValueError(f"component index {idx} is not strictly increasing")
            if any(not 1 <= i <= self.dim for i in idx):
                raise IndexError(f"component index {idx} out of range for dim {self.dim}")
            if p.dim != self.dim:
                raise ValueError("coefficient dimension mismatch")
            if not p.is_zero():
                clean[idx] = p
        object.__setattr__(self, "components", clean)

    # -- constructors -----------------------------------------------------
    @classmethod
    def zero(cls, dim: int, grade: int) -> "MultiVectorField":
        return cls(dim, grade, {})

    @classmethod
    def function(cls, f: Poly) -> "MultiVectorField":
        return cls(f.dim, 0, {(): f})

    @classmethod
    def from_terms(cls, dim: int, grade: int, terms: Iterable[tuple[Poly, Iterable[int]]]) -> "MultiVectorField":
        """Sum of ``coeff * d_{i1} ^ ... ^ d_{ik}`` with arbitrary index order."""
        acc: dict[tuple[int, ...], Poly] = {}
        for coeff, idx in terms:
            idx = tuple(idx)
            if len(idx) != grade:
                raise ValueError(f"term {idx} does not have grade {grade}")
            sign, key = sort_sign(idx)
            if sign == 0 or coeff.is_zero():
                continue
            c = coeff if sign > 0 else -coeff
            acc[key] = acc[key] + c if key in acc else c
        return cls(dim, grade, acc)

    @classmethod
    def from_matrix(cls, entries) -> "MultiVectorField":
        """Bivector from a skew matrix of Polys/scalars (upper triangle is read)."""
        d = len(entries)
        if any(len(row) != d for row in entries):
            raise ValueError("matrix must be square")
        as_poly = lambda v: v if isinstance(v, Poly) else Poly.const(d, v)
        comps = {}
        for i in range(d):
            if not as_poly(entries[i][i]).is_zero():
                raise ValueError("matrix must be skew-symmetric")
            for j in range(i + 1, d):
                v = as_poly(entries[i][j])
                if v + as_poly(entries[j][i]) != Poly.zero(d):
                    raise ValueError("matrix must be skew-symmetric")
                comps[(i + 1, j + 1)] = v
        return cls(d, 2, comps)

    # -- access -----------------------------------------------------------
    def tensor(self, indices: Iterable[int]) -> Poly:
        sign, key = sort_sign(indices)
        if sign == 0:
            return Poly.zero(self.dim)
        p = self.components.get(key)
        if p is None:
            return Poly.zero(self.dim)
        return p if sign > 0 else -p

    def is_zero(self) -> bool:
        return not self.components

    def as_function(self) -> Poly:
        if self.grade != 0:
            raise ValueError("not a grade-0 field")
        return self.components.get((), Poly.zero(self.dim))

    def is_constant(self) -> bool:
        return all(p.is_constant() for p in self.components.values())

    # -- linear structure -------------------------------------------------
    def _check(self, other: "MultiVectorField") -> None:
        if other.dim != self.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")

    def __add__(self, other: "MultiVectorField") -> "MultiVectorField":
        self._check(other)
        if other.grade != self.grade:
            raise ValueError("cannot add fields of different grades")
        out = dict(self.components)
        for k, p in other.components.items():
            out[k] = out[k] + p if k in out else p
        return MultiVectorField(self.dim, self.grade, out)

    def __neg__(self) -> "MultiVectorField":
        return MultiVectorField(self.dim, self.grade, {k: -p for k, p in self.components.items()})

    def __sub__(self, other: "MultiVectorField") -> "MultiVectorField":
        return self + (-other)

    def scale(self, c) -> "MultiVectorField":
        if isinstance(c, Poly):
            return MultiVectorField(self.dim, self.grade, {k: p * c for k, p in self.components.items()})
        return MultiVectorField(self.dim, self.grade, {k: p.scale(c) for k, p in self.components.items()})

    def __eq__(self, other):
        if not isinstance(other, MultiVectorField):
            return NotImplemented
        return (self.dim, self.grade, self.components) == (other.dim, other.grade, other.components)

    def __hash__(self):
        return hash((self.dim, self.grade, frozenset(self.components.items())))

    def __str__(self) -> str:
        return format_multivector(self)

    def __repr__(self) -> str:
        return f"MultiVectorField({self.dim}, {self.grade}, {format_multivector(self)!r})"

    def wedge(self, other: "MultiVectorField") -> "MultiVectorField":
        return mv_wedge(self, other)


def mv_wedge(X: MultiVectorField, Y: MultiVectorField) -> MultiVectorField:
    X._check(Y)
    terms = []
    for I, a in X.components.items():
        for J, b in Y.components.items():
            terms.append((a * b, I + J))
    return MultiVectorField.from_terms(X.dim, X.grade + Y.grade, terms)


# ---------------------------------------------------------------------------
# Schouten-Nijenhuis bracket
# ---------------------------------------------------------------------------

def _vf_bracket(a: Poly, i: int, b: Poly, j: int) -> list[tuple[Poly, int]]:
    """``[a d_i, b d_j] = a (d_i b) d_j - b (d_j a) d_i``."""
    out = []
    t1 = a * b.partial(i)
    if t1:
        out.append((t1, j))
    t2 = b * a.partial(j)
    if t2:
        out.append((-t2, i))
    return out


def _bracket_monomials(c: Poly, I: tuple[int, ...], e: Poly, J: tuple[int, ...], dim: int):
    """Terms of ``[c d_I, e d_J]`` for k, l >= 1 as (coeff, index tuple) pairs.

    ``c d_I`` is split as ``(c d_{i1}) ^ d_{i2} ^ ...``, likewise for ``e d_J``.
    """
    one = Poly.const(dim, 1)
    k, l = len(I), len(J)
    terms = []
    for p in range(k):
        alpha = c if p == 0 else one
        rest_x = c if p != 0 else one
        for q in range(l):
            beta = e if q == 0 else one
            rest_y = e if q != 0 else one
            sign = -1 if (p + q) % 2 else 1  # (-1)^{(p+1)+(q+1)}
            rest = rest_x * rest_y
            others = I[:p] + I[p + 1:] + J[:q] + J[q + 1:]
            for coeff, idx in _vf_bracket(alpha, I[p], beta, J[q]):
                terms.append(((coeff * rest).scale(sign), (idx,) + others))
    return terms


def _bracket_with_function(c: Poly, I: tuple[int, ...], f: Poly):
    """Terms of ``[c d_I, f] = sum_i (-1)^{k-i} L_{X_i}(f) X_1 ^ .. X_i^ .. ^ X_k``."""
    k = len(I)
    terms = []
    for p in range(k):
        sign = -1 if (k - (p + 1)) % 2 else 1
        coeff = (c * f.partial(I[p])).scale(sign)
        terms.append((coeff, I[:p] + I[p + 1:]))
    return terms


def schouten(X: MultiVectorField, Y: MultiVectorField) -> MultiVectorField:
    """Schouten-Nijenhuis bracket; result has grade ``k + l - 1``."""
    X._check(Y)
    k, l = X.grade, Y.grade
    dim = X.dim
    if k == 0 and l == 0:
        return MultiVectorField.zero(dim, 0)
    grade = k + l - 1
    terms = []
    if l == 0:
        f = Y.as_function()
        for I, c in X.components.items():
            terms.extend(_bracket_with_function(c, I, f))
    elif k == 0:
        # [f, Y] = -(-1)^{(0+1)(l+1)} [Y, f]
        sign = -1 if l % 2 else 1
        return schouten(Y, X).scale(sign)
    else:
        for I, c in X.components.items():
            for J, e in Y.components.items():
                terms.extend(_bracket_monomials(c, I, e, J, dim))
    return MultiVectorField.from_terms(dim, grade, terms)


def jacobiator(pi: MultiVectorField) -> MultiVectorField:
    """``d pi + 1/2 [pi, pi]`` with ``d = 0``: vanishes iff ``pi`` is Poisson."""
    if pi.grade != 2:
        raise ValueError(f"jacobiator needs a bivector, got grade {pi.grade}")
    return schouten(pi, pi).scale(Fraction(1, 2))


def is_poisson(pi: MultiVectorField) -> bool:
    return jacobiator(pi).is_zero()


def poisson_bracket(pi: MultiVectorField, f: Poly, g: Poly) -> Poly:
    """``{f, g} = sum_{i<j} pi^{ij} (d_i f d_j g - d_j f d_i g)``."""
    if pi.grade != 2:
        raise ValueError(f"poisson_bracket needs a bivector, got grade {pi.grade}")
    if f.dim != pi.dim or g.dim != pi.dim:
        raise ValueError("dimension mismatch")
    out = Poly.zero(pi.dim)
    for (i, j), c in pi.components.items():
        out = out + c * (f.partial(i) * g.partial(j) - f.partial(j) * g.partial(i))
    return out


@dataclass(frozen=True)
class FormalBivector:
    """``pi_eps = pi_0 + pi_1 eps + ...`` with bivector coefficients."""

    series: EpsSeries

    def __post_init__(self):
        dims = {c.dim for c in self.series.coeffs}
        if len(dims) != 1:
            raise ValueError("all coefficients must share one dimension")
        if any(c.grade != 2 for c in self.series.coeffs):
            raise ValueError("all coefficients must be bivectors")

    @property
    def order(self) -> int:
        return self.series.order

    def bracket(self, f: EpsSeries, g: EpsSeries) -> EpsSeries:
        """Formal Poisson bracket ``sum_m eps^m sum_{i+j+k=m} {f_j, g_k}_{pi_i}``."""
        N = self.order
        dim = self.series.coeffs[0].dim
        out = []
        for m in range(N + 1):
            acc = Poly.zero(dim)
            for i in range(m + 1):
                for j in range(m - i + 1):
                    acc = acc + poisson_bracket(self.series[i], f[j], g[m - i - j])
            out.append(acc)
        return EpsSeries(N, tuple(out))

    def jacobiator(self) -> EpsSeries:
        """Order-by-order ``1/2 [pi_eps, pi_eps]``."""
        N = self.order
        out = []
        for m in range(N + 1):
            acc = None
            for i in range(m + 1):
                t = schouten(self.series[i], self.series[m - i])
                acc = t if acc is None else acc + t
            out.append(acc.scale(Fraction(1, 2)))
        return EpsSeries(N, tuple(out))


# ---------------------------------------------------------------------------
# text format:  "x3 d1^d2 + x1 d2^d3 + x2 d3^d1"
# ---------------------------------------------------------------------------

class _MVParser(_Parser):
    def wedge(self) -> tuple[int, ...]:
        idx = []
        tok = self.expect("dvar")
        idx.append(self._dindex(tok))
        while self.at_op("^") and self.peek(1)[0] == "dvar":
            self.take()
            idx.append(self._dindex(self.take()))
        return tuple(idx)

    def _dindex(self, tok) -> int:
        i = int(tok[1][1:])
        if not 1 <= i <= self.dim:
            raise ParseError(f"coordinate index {i} exceeds dimension {self.dim}", tok[2])
        return i

    def mv_term(self) -> tuple[Poly, tuple[int, ...]]:
        if self.peek()[0] == "dvar":
            return Poly.const(self.dim, 1), self.wedge()
        coeff = self.term()
        if self.at_op("*") and self.peek(1)[0] == "dvar":
            self.take()
        if self.peek()[0] == "dvar":
            return coeff, self.wedge()
        return coeff, ()

    def mv_expr(self):
        terms = []
        neg = False
        if self.at_op("-"):
            self.take()
            neg = True
        c, idx = self.mv_term()
        terms.append((-c if neg else c, idx, 0))
        while self.at_op("+") or self.at_op("-"):
            _, op, pos = self.take()
            c, idx = self.mv_term()
            terms.append((-c if op == "-" else c, idx, pos))
        return terms


def parse_multivector(text: str, dim: int) -> MultiVectorField:
    """Parse the multivector text format; grade-0 fields are bare polynomials."""
    parser = _MVParser(text, dim)
    terms = parser.mv_expr()
    tok = parser.peek()
    if tok[0] != "end":
        raise ParseError(f"unexpected token {tok[1]!r}", tok[2])
    grade = len(terms[0][1])
    for _, idx, pos in terms:
        if len(idx) != grade:
            raise ParseError("all terms of a multivector field must have the same grade", pos)
    return MultiVectorField.from_terms(dim, grade, [(c, idx) for c, idx, _ in terms])


def format_multivector(X: MultiVectorField) -> str:
    if X.grade == 0:
        return format_poly(X.as_function())
    if not X.components:
        return "0"
    pieces = []
    for idx in sorted(X.components):
        p = X.components[idx]
        wedge = "^".join(f"d{i}" for i in idx)
        if len(p.terms) == 1:
            (e, c), = p.terms.items()
            sign = "-" if c < 0 else "+"
            mono = format_poly(Poly._raw(p.dim, {e: abs(c)}))
            body = wedge if mono == "1" else f"{mono} {wedge}"
        else:
            sign, body = "+", f"({format_poly(p)}) {wedge}"
        pieces.append((sign, body))
    out = []
    for i, (sign, body) in enumerate(pieces):
        out.append((body if sign == "+" else f"-{body}") if i == 0 else f" {sign} {body}")
    return "".join(out)


def bivector_from_text(text: str, dim: int) -> MultiVectorField:
    pi = parse_multivector(text, dim)
    if pi.grade != 2:
        raise ValueError(f"expected a bivector, got grade {pi.grade}")
    return pi


_MATRIX_ROW = re.compile(r"\s*;\s*")


def parse_matrix(text: str) -> list[list[Fraction]]:
    """``"0 1; -1 0"`` -> rational matrix."""
    rows = [r.split() for r in _MATRIX_ROW.split(text.strip()) if r.strip()]
    out = [[Fraction(x) for x in r] for r in rows]
    n = len(out)
    if any(len(r) != n for r in out):
        raise ValueError("matrix must be square")
    return out
