"""Multidifferential operators with polynomial coefficients.

An operator of arity ``a`` is stored as ``{(K_0, ..., K_{a-1}): c}`` meaning
``(f_0, ..., f_{a-1}) -> sum c * d_{K_0} f_0 * ... * d_{K_{a-1}} f_{a-1}``
where each ``K_s`` is a sorted tuple of coordinate indices.  The graded
degree used by the Gerstenhaber bracket is ``arity - 1``; arity 0 operators
are plain functions and appear as images of grade-0 multivector fields.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import factorial
from typing import Iterable, Mapping, Sequence

from .multivector import MultiVectorField, schouten, sort_sign
from .poly import MultiIndex, Poly, format_poly, mi_counts, mi_from_counts, mi_merge, parse_poly
from .series import EpsSeries

Derivs = tuple[MultiIndex, ...]


@dataclass(frozen=True)
class MultiDiffOp:
    dim: int
    arity: int
    terms: Mapping[Derivs, Poly] = field(default_factory=dict)

    def __post_init__(self):
        if self.arity < 0:
            raise ValueError("arity must be non-negative")
        clean = {}
        for derivs, c in self.terms.items():
            if len(derivs) != self.arity:
                raise ValueError(f"term {derivs} does not match arity {self.arity}")
            if c.dim != self.dim:
                raise ValueError("coefficient dimension mismatch")
            if not c.is_zero():
                clean[derivs] = c
        object.__setattr__(self, "terms", clean)

    # -- constructors -----------------------------------------------------
    @classmethod
    def zero(cls, dim: int, arity: int) -> "MultiDiffOp":
        return cls(dim, arity, {})

    @classmethod
    def from_terms(cls, dim: int, arity: int, terms: Iterable[tuple[Poly, Sequence[Iterable[int]]]]) -> "MultiDiffOp":
        acc: dict[Derivs, Poly] = {}
        for c, derivs in terms:
            key = tuple(tuple(sorted(K)) for K in derivs)
            for K in key:
                if any(not 1 <= i <= dim for i in K):
                    raise IndexError(f"derivative index out of range in {key}")
            acc[key] = acc[key] + c if key in acc else c
        return cls(dim, arity, acc)

    @classmethod
    def pointwise(cls, dim: int, arity: int = 2) -> "MultiDiffOp":
        """The product ``f_0 * ... * f_{arity-1}``; arity 1 gives the identity."""
        return cls(dim, arity, {((),) * arity: Poly.const(dim, 1)})

    @classmethod
    def identity(cls, dim: int) -> "MultiDiffOp":
        return cls.pointwise(dim, 1)

    @classmethod
    def function(cls, f: Poly) -> "MultiDiffOp":
        return cls(f.dim, 0, {(): f})

    @classmethod
    def vector_field(cls, components: Mapping[int, Poly], dim: int) -> "MultiDiffOp":
        return cls.from_terms(dim, 1, [(c, [(i,)]) for i, c in components.items()])

    # -- structure --------------------------------------------------------
    @property
    def degree(self) -> int:
        return self.arity - 1

    def is_zero(self) -> bool:
        return not self.terms

    def vanishes_on_constants(self) -> bool:
        return all(all(K for K in derivs) for derivs in self.terms)

    def max_abs_coeff(self) -> float:
        return max((c.max_abs_coeff() for c in self.terms.values()), default=0.0)

    def order(self) -> int:
        """Largest total number of derivatives in a term."""
        return max((sum(len(K) for K in d) for d in self.terms), default=0)

    def _check(self, other: "MultiDiffOp") -> None:
        if other.dim != self.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")

    def __add__(self, other: "MultiDiffOp") -> "MultiDiffOp":
        self._check(other)
        if other.arity != self.arity:
            raise ValueError(f"arity mismatch: {self.arity} vs {other.arity}")
        out = dict(self.terms)
        for k, c in other.terms.items():
            out[k] = out[k] + c if k in out else c
        return MultiDiffOp(self.dim, self.arity, out)

    def __neg__(self) -> "MultiDiffOp":
        return MultiDiffOp(self.dim, self.arity, {k: -c for k, c in self.terms.items()})

    def __sub__(self, other: "MultiDiffOp") -> "MultiDiffOp":
        return self + (-other)

    def scale(self, s) -> "MultiDiffOp":
        if isinstance(s, Poly):
            return MultiDiffOp(self.dim, self.arity, {k: c * s for k, c in self.terms.items()})
        return MultiDiffOp(self.dim, self.arity, {k: c.scale(s) for k, c in self.terms.items()})

    def __eq__(self, other):
        if not isinstance(other, MultiDiffOp):
            return NotImplemented
        return (self.dim, self.arity, self.terms) == (other.dim, other.arity, other.terms)

    def __hash__(self):
        return hash((self.dim, self.arity, frozenset(self.terms.items())))

    def __call__(self, *fs: Poly) -> Poly:
        return op_apply(self, list(fs))

    def __str__(self) -> str:
        return format_op(self)

    def __repr__(self) -> str:
        return f"MultiDiffOp(dim={self.dim}, arity={self.arity}, {format_op(self)!r})"

    def permute_slots(self, perm: Sequence[int]) -> "MultiDiffOp":
        """Operator ``(f_0..) -> self(f_{perm[0]}, f_{perm[1]}, ...)``."""
        if sorted(perm) != list(range(self.arity)):
            raise ValueError("not a permutation of the slots")
        out = {}
        for derivs, c in self.terms.items():
            new = [()] * self.arity
            for s, p in enumerate(perm):
                new[p] = derivs[s]
            out[tuple(new)] = c
        return MultiDiffOp(self.dim, self.arity, out)

    def to_json(self) -> list[dict]:
        return [
            {"coeff": format_poly(c), "derivs": [list(K) for K in derivs]}
            for derivs, c in sorted(self.terms.items())
        ]

    @classmethod
    def from_json(cls, terms: list[dict], dim: int, arity: int) -> "MultiDiffOp":
        parsed = []
        for t in terms:
            derivs = t["derivs"]
            if len(derivs) != arity:
                raise ValueError(f"term {derivs} does not match arity {arity}")
            parsed.append((parse_poly(str(t["coeff"]), dim), derivs))
        return cls.from_terms(dim, arity, parsed)


def format_op(op: MultiDiffOp) -> str:
    if not op.terms:
        return "0"
    pieces = []
    for derivs, c in sorted(op.terms.items()):
        slots = []
        for s, K in enumerate(derivs):
            d = "".join(f"d{i}" for i in K)
            slots.append(f"{d}(f{s})" if d else f"f{s}")
        body = "*".join(slots)
        if len(c.terms) == 1:
            (e, v), = c.terms.items()
            sign = "-" if v < 0 else "+"
            mono = format_poly(Poly._raw(c.dim, {e: abs(v)}))
            text = body if mono == "1" and body else (mono if not body else f"{mono}*{body}")
        else:
            sign = "+"
            text = f"({format_poly(c)})" + (f"*{body}" if body else "")
        pieces.append((sign, text))
    out = []
    for i, (sign, text) in enumerate(pieces):
        out.append((text if sign == "+" else f"-{text}") if i == 0 else f" {sign} {text}")
    return "".join(out)


# ---------------------------------------------------------------------------
# evaluation and composition
# ---------------------------------------------------------------------------

def op_apply(op: MultiDiffOp, fs: Sequence[Poly]) -> Poly:
    if len(fs) != op.arity:
        raise ValueError(f"operator has arity {op.arity}, got {len(fs)} arguments")
    for f in fs:
        if f.dim != op.dim:
            raise ValueError("dimension mismatch")
    caches: list[dict] = [{} for _ in fs]
    out = Poly.zero(op.dim)
    for derivs, c in op.terms.items():
        prod = c
        for s, K in enumerate(derivs):
            d = caches[s].get(K)
            if d is None:
                d = caches[s][K] = fs[s].apply_multiindex(K)
            if d.is_zero():
                prod = None
                break
            prod = prod * d
        if prod is not None:
            out = out + prod
    return out


@lru_cache(maxsize=None)
def _compositions(k: int, parts: int) -> tuple[tuple[tuple[int, ...], int], ...]:
    """Ways to split ``k`` identical derivatives over ``parts`` factors with multinomial weights."""
    out = []
    for cut in itertools.combinations_with_replacement(range(parts), k):
        counts = [0] * parts
        for p in cut:
            counts[p] += 1
        mult = factorial(k)
        for a in counts:
            mult //= factorial(a)
        out.append((tuple(counts), mult))
    return tuple(out)


@lru_cache(maxsize=None)
def leibniz_splits(counts: tuple[int, ...], parts: int) -> tuple[tuple[tuple[tuple[int, ...], ...], int], ...]:
    """Generalized Leibniz rule: ``d^counts (u_0 ... u_{P-1})`` as ``(per-factor counts, multiplicity)``."""
    per_coord = [_compositions(k, parts) for k in counts]
    out = []
    for choice in itertools.product(*per_coord):
        mult = 1
        for _, m in choice:
            mult *= m
        split = tuple(tuple(c[0][p] for c in choice) for p in range(parts))
        out.append((split, mult))
    return tuple(out)


def compose_i(phi: MultiDiffOp, psi: MultiDiffOp, i: int) -> MultiDiffOp:
    """Plug ``psi``'s output into slot ``i`` of ``phi``; arity ``a_phi + a_psi - 1``."""
    phi._check(psi)
    if not 0 <= i < phi.arity:
        raise IndexError(f"slot {i} out of range for arity {phi.arity}")
    dim = phi.dim
    nargs = psi.arity
    acc: dict[Derivs, Poly] = {}
    deriv_cache: dict[tuple, Poly] = {}
    for K, c in phi.terms.items():
        counts = tuple(mi_counts(K[i], dim))
        splits = leibniz_splits(counts, nargs + 1)
        head, tail = K[:i], K[i + 1:]
        for L, e in psi.terms.items():
            for split, mult in splits:
                ck = (L, split[0])
                de = deriv_cache.get(ck)
                if de is None:
                    de = deriv_cache[ck] = e.derive_counts(split[0])
                if de.is_zero():
                    continue
                coeff = (c * de).scale(mult)
                mid = tuple(mi_merge(L[j], mi_from_counts(split[j + 1])) for j in range(nargs))
                key = head + mid + tail
                acc[key] = acc[key] + coeff if key in acc else coeff
    return MultiDiffOp(dim, phi.arity + nargs - 1, acc)


def gerstenhaber_product(phi: MultiDiffOp, psi: MultiDiffOp) -> MultiDiffOp:
    """``phi o psi = sum_i (-1)^{n i} phi o_i psi`` with ``n = deg psi``."""
    n = psi.degree
    out = MultiDiffOp.zero(phi.dim, max(phi.arity + psi.arity - 1, 0))
    for i in range(phi.arity):
        term = compose_i(phi, psi, i)
        out = out + (term if (n * i) % 2 == 0 else -term)
    return out


def gerstenhaber(phi: MultiDiffOp, psi: MultiDiffOp) -> MultiDiffOp:
    """``[phi, psi] = phi o psi - (-1)^{mn} psi o phi``; degree ``m + n``."""
    phi._check(psi)
    m, n = phi.degree, psi.degree
    arity = phi.arity + psi.arity - 1
    if arity < 0:
        return MultiDiffOp.zero(phi.dim, 0)
    a = gerstenhaber_product(phi, psi) if phi.arity else MultiDiffOp.zero(phi.dim, arity)
    b = gerstenhaber_product(psi, phi) if psi.arity else MultiDiffOp.zero(phi.dim, arity)
    return a - b if (m * n) % 2 == 0 else a + b


def hochschild_d(psi: MultiDiffOp) -> MultiDiffOp:
    """``d_m psi = [m, psi]`` with ``m`` the pointwise product."""
    return gerstenhaber(MultiDiffOp.pointwise(psi.dim), psi)


def hochschild_coboundary(psi: MultiDiffOp) -> MultiDiffOp:
    """Standard alternating-sum coboundary.

    ``(delta psi)(f_0..f_a) = f_0 psi(f_1..) + sum_i (-1)^{i+1} psi(.., f_i f_{i+1}, ..)
    + (-1)^{a+1} psi(f_0..f_{a-1}) f_a`` for ``psi`` of arity ``a``; it agrees
    with :func:`hochschild_d` up to the overall sign ``(-1)^{a-1}``.
    """
    dim, a = psi.dim, psi.arity
    terms: list[tuple[Poly, Derivs]] = []
    for L, e in psi.terms.items():
        terms.append((e, ((),) + L))
        for i in range(a):
            sign = 1 if i % 2 else -1
            for split, mult in leibniz_splits(tuple(mi_counts(L[i], dim)), 2):
                key = L[:i] + (mi_from_counts(split[0]), mi_from_counts(split[1])) + L[i + 1:]
                terms.append((e.scale(sign * mult), key))
        terms.append((e if (a + 1) % 2 == 0 else -e, L + ((),)))
    return MultiDiffOp.from_terms(dim, a + 1, terms)


def hkr_u1(X: MultiVectorField) -> MultiDiffOp:
    """``(f_1..f_k) -> 1/k! sum_J X^J d_{j1} f_1 ... d_{jk} f_k`` (skew tensor ``X^J``)."""
    k = X.grade
    if k == 0:
        return MultiDiffOp.function(X.as_function())
    w = Fraction(1, factorial(k))
    terms = []
    for I, c in X.components.items():
        for perm in itertools.permutations(I):
            sign, _ = sort_sign(perm)
            terms.append((c.scale(w * sign), tuple((j,) for j in perm)))
    return MultiDiffOp.from_terms(X.dim, k, terms)


def u1_defect(X: MultiVectorField, Y: MultiVectorField) -> MultiDiffOp:
    """``[U1 X, U1 Y] - U1 [X, Y]``; always Hochschild-closed."""
    if X.grade < 1 or Y.grade < 1:
        raise ValueError("u1_defect needs grades >= 1")
    return gerstenhaber(hkr_u1(X), hkr_u1(Y)) - hkr_u1(schouten(X, Y))


# ---------------------------------------------------------------------------
# star products and gauge operators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StarProduct:
    """``f * g = fg + sum_{k=1..N} eps^k B_k(f, g)``; ``bidiff[k-1] = B_k``."""

    dim: int
    order: int
    bidiff: tuple

    def __post_init__(self):
        object.__setattr__(self, "bidiff", tuple(self.bidiff))
        if len(self.bidiff) != self.order:
            raise ValueError(f"expected {self.order} bidifferential operators, got {len(self.bidiff)}")
        for k, B in enumerate(self.bidiff, start=1):
            if B.arity != 2 or B.dim != self.dim:
                raise ValueError(f"B_{k} must be an arity-2 operator on dimension {self.dim}")
            if not B.vanishes_on_constants():
                raise ValueError(f"B_{k} does not vanish on constants")

    @classmethod
    def pointwise(cls, dim: int, order: int) -> "StarProduct":
        return cls(dim, order, tuple(MultiDiffOp.zero(dim, 2) for _ in range(order)))

    def operators(self) -> list[MultiDiffOp]:
        """``[m, B_1, ..., B_N]``."""
        return [MultiDiffOp.pointwise(self.dim)] + list(self.bidiff)

    def __call__(self, f: Poly, g: Poly) -> EpsSeries:
        return EpsSeries(self.order, tuple(op_apply(B, [f, g]) for B in self.operators()))

    def star(self, F: EpsSeries, G: EpsSeries) -> EpsSeries:
        """Product of two formal series of functions, truncated at ``order``."""
        ops = self.operators()
        out = []
        for total in range(self.order + 1):
            acc = Poly.zero(self.dim)
            for k in range(total + 1):
                for a in range(total - k + 1):
                    acc = acc + op_apply(ops[k], [F[a], G[total - k - a]])
            out.append(acc)
        return EpsSeries(self.order, tuple(out))

    def __eq__(self, other):
        if not isinstance(other, StarProduct):
            return NotImplemented
        return (self.dim, self.order, self.bidiff) == (other.dim, other.order, other.bidiff)

    def __hash__(self):
        return hash((self.dim, self.order, self.bidiff))

    def to_json(self) -> dict:
        return {"dim": self.dim, "order": self.order, "B": [B.to_json() for B in self.bidiff]}

    @classmethod
    def from_json(cls, data: dict) -> "StarProduct":
        dim, order = int(data["dim"]), int(data["order"])
        return cls(dim, order, tuple(MultiDiffOp.from_json(t, dim, 2) for t in data["B"]))


@dataclass(frozen=True)
class GaugeOp:
    """``D = id + sum_{k=1..N} eps^k D_k`` with each ``D_k`` killing constants."""

    dim: int
    order: int
    diffops: tuple

    def __post_init__(self):
        object.__setattr__(self, "diffops", tuple(self.diffops))
        if len(self.diffops) != self.order:
            raise ValueError(f"expected {self.order} operators, got {len(self.diffops)}")
        for k, D in enumerate(self.diffops, start=1):
            if D.arity != 1 or D.dim != self.dim:
                raise ValueError(f"D_{k} must be an arity-1 operator on dimension {self.dim}")
            if not D.vanishes_on_constants():
                raise ValueError(f"D_{k} does not vanish on constants")

    @classmethod
    def identity(cls, dim: int, order: int) -> "GaugeOp":
        return cls(dim, order, tuple(MultiDiffOp.zero(dim, 1) for _ in range(order)))

    def operators(self) -> list[MultiDiffOp]:
        return [MultiDiffOp.identity(self.dim)] + list(self.diffops)

    def apply(self, F: EpsSeries) -> EpsSeries:
        ops = self.operators()
        out = []
        for total in range(self.order + 1):
            acc = Poly.zero(self.dim)
            for k in range(total + 1):
                acc = acc + op_apply(ops[k], [F[total - k]])
            out.append(acc)
        return EpsSeries(self.order, tuple(out))

    def __call__(self, f: Poly) -> EpsSeries:
        return self.apply(EpsSeries.constant(f, self.order))

    def compose(self, other: "GaugeOp") -> "GaugeOp":
        """``self o other`` as formal series of operators."""
        if other.order != self.order or other.dim != self.dim:
            raise ValueError("gauge operators must share dim and order")
        a, b = self.operators(), other.operators()
        out = []
        for k in range(1, self.order + 1):
            acc = MultiDiffOp.zero(self.dim, 1)
            for j in range(k + 1):
                acc = acc + compose_i(a[j], b[k - j], 0)
            out.append(acc)
        return GaugeOp(self.dim, self.order, tuple(out))

    def inverse(self) -> "GaugeOp":
        """Formal inverse: ``E_k = -sum_{j=1..k} D_j o E_{k-j}`` with ``E_0 = id``."""
        ops = self.operators()
        inv = [MultiDiffOp.identity(self.dim)]
        for k in range(1, self.order + 1):
            acc = MultiDiffOp.zero(self.dim, 1)
            for j in range(1, k + 1):
                acc = acc - compose_i(ops[j], inv[k - j], 0)
            inv.append(acc)
        return GaugeOp(self.dim, self.order, tuple(inv[1:]))

    def to_json(self) -> dict:
        return {"dim": self.dim, "order": self.order, "D": [D.to_json() for D in self.diffops]}

    @classmethod
    def from_json(cls, data: dict) -> "GaugeOp":
        dim, order = int(data["dim"]), int(data["order"])
        return cls(dim, order, tuple(MultiDiffOp.from_json(t, dim, 1) for t in data["D"]))


def mc_residual(S: StarProduct) -> EpsSeries:
    """Order-``k`` coefficient of ``d_m B + 1/2 [B, B]`` for ``B = sum_k B_k eps^k``.

    Index 0 holds ``1/2 [m, m] = 0``.  The coefficients are the associator
    operators ``(f*g)*h - f*(g*h)`` order by order.
    """
    ops = S.operators()
    out = []
    half = Fraction(1, 2)
    for k in range(S.order + 1):
        acc = MultiDiffOp.zero(S.dim, 3)
        for i in range(k + 1):
            j = k - i
            if i > j:
                break
            br = gerstenhaber(ops[i], ops[j])
            acc = acc + (br.scale(half) if i == j else br)
        out.append(acc)
    return EpsSeries(S.order, tuple(out))


def associator_ops(S: StarProduct) -> EpsSeries:
    """Associator operator computed directly from partial compositions."""
    ops = S.operators()
    out = []
    for k in range(S.order + 1):
        acc = MultiDiffOp.zero(S.dim, 3)
        for i in range(k + 1):
            acc = acc + compose_i(ops[i], ops[k - i], 0) - compose_i(ops[i], ops[k - i], 1)
        out.append(acc)
    return EpsSeries(S.order, tuple(out))
