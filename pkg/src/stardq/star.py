"""Graph expansion of star products and the checks built around it."""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb, factorial
from typing import Optional, Sequence

import sympy

from .graphs import AdmissibleGraph, assemble_operator, enumerate_graphs
from .multidiff import (GaugeOp, MultiDiffOp, StarProduct, compose_i, gerstenhaber, hkr_u1,
                        hochschild_d, op_apply)
from .multivector import MultiVectorField, jacobiator, parse_multivector, schouten
from .poly import Poly, mi_counts, mi_from_counts, mi_merge
from .series import EpsSeries
from .weights import (MissingWeightError, WeightCache, WeightCacheEntry, WeightEstimate, WeightSource,
                      lemma_weight, mc_weight, rationalize)

log = logging.getLogger(__name__)


class NotPoissonError(ValueError):
    pass


def _as_fraction(w) -> Fraction:
    return w if isinstance(w, Fraction) else Fraction(w)


# ---------------------------------------------------------------------------
# U_n and the star product
# ---------------------------------------------------------------------------

def u_n(xs: Sequence[MultiVectorField], nbar: int, weights: WeightSource,
        skip=None) -> MultiDiffOp:
    """``U_n(xs) = sum over labeled graphs of weight * B_Gamma(xs)`` (arity ``nbar``).

    Air vertex ``v`` carries ``xs[v]``.  ``skip(op)`` may declare an assembled
    operator irrelevant, in which case its weight is never requested.
    """
    n = len(xs)
    grades = [X.grade for X in xs]
    dim = xs[0].dim
    out = MultiDiffOp.zero(dim, nbar)
    for G in enumerate_graphs(n, nbar, sum(grades), grades):
        B = assemble_operator(G, xs)
        if B.is_zero() or (skip is not None and skip(B)):
            continue
        w = weights.weight(G)
        if w == 0:
            continue
        out = out + B.scale(_as_fraction(w))
    return out


def star_expand(pi: MultiVectorField, order: int, weights: WeightSource, force: bool = False) -> StarProduct:
    """``B_n = (2^n / n!) U_n(pi, ..., pi)``, i.e. the expansion of ``U(2 eps pi)``.

    With this scaling ``B_1(f, g) = sum pi^{ij} d_i f d_j g`` is the Poisson
    bracket and constant ``pi`` reproduces the Moyal product for ``alpha = pi``.
    """
    if pi.grade != 2:
        raise ValueError("star_expand needs a bivector field")
    if not force and not jacobiator(pi).is_zero():
        raise NotPoissonError("bivector is not Poisson; pass force=True to expand anyway")
    bidiff = []
    for n in range(1, order + 1):
        U = u_n([pi] * n, 2, weights)
        bidiff.append(U.scale(Fraction(2 ** n, factorial(n))))
    return StarProduct(pi.dim, order, tuple(bidiff))


def moyal(alpha, order: int) -> StarProduct:
    """``B_n(f, g) = (1/n!) sum alpha^{i1 j1} ... alpha^{in jn} d_{i1..in} f d_{j1..jn} g``."""
    d = len(alpha)
    A = [[_as_fraction(Fraction(alpha[i][j])) for j in range(d)] for i in range(d)]
    if any(len(row) != d for row in A):
        raise ValueError("alpha must be square")
    for i in range(d):
        for j in range(d):
            if A[i][j] != -A[j][i]:
                raise ValueError("alpha must be skew-symmetric")
    power: dict = {((), ()): Fraction(1)}
    bidiff = []
    for n in range(1, order + 1):
        nxt: dict = {}
        for (K, L), c in power.items():
            for i in range(d):
                for j in range(d):
                    if A[i][j] == 0:
                        continue
                    key = (tuple(sorted(K + (i + 1,))), tuple(sorted(L + (j + 1,))))
                    nxt[key] = nxt.get(key, 0) + c * A[i][j]
        power = {k: v for k, v in nxt.items() if v != 0}
        scale = Fraction(1, factorial(n))
        bidiff.append(MultiDiffOp(d, 2, {k: Poly.const(d, v * scale) for k, v in power.items()}))
    return StarProduct(d, order, tuple(bidiff))


def assoc_residual(S: StarProduct, f: Poly, g: Poly, h: Poly) -> EpsSeries:
    """``(f * g) * h - f * (g * h)`` truncated at the order of ``S``."""
    N = S.order
    F, G, H = (EpsSeries.constant(p, N) for p in (f, g, h))
    return S.star(S.star(F, G), H) - S.star(F, S.star(G, H))


def gauge_transform(S: StarProduct, D: GaugeOp) -> StarProduct:
    """``f *' g = D^{-1}(D f * D g)`` as operators, order by order."""
    if D.dim != S.dim or D.order != S.order:
        raise ValueError("gauge operator must match the star product's dim and order")
    N = S.order
    Bs = S.operators()
    Ds = D.operators()
    Es = D.inverse().operators()
    # inner[k] = sum_{b+c+e=k} B_b(D_c f, D_e g)
    inner = [MultiDiffOp.zero(S.dim, 2) for _ in range(N + 1)]
    for b, c, e in itertools.product(range(N + 1), repeat=3):
        if b + c + e > N:
            continue
        op = compose_i(compose_i(Bs[b], Ds[c], 0), Ds[e], 1)
        inner[b + c + e] = inner[b + c + e] + op
    out = []
    for k in range(1, N + 1):
        acc = MultiDiffOp.zero(S.dim, 2)
        for a in range(k + 1):
            acc = acc + compose_i(Es[a], inner[k - a], 0)
        out.append(acc)
    return StarProduct(S.dim, N, tuple(out))


# ---------------------------------------------------------------------------
# skew normalization of the first-order term
# ---------------------------------------------------------------------------

class InconsistentExtension(ValueError):
    pass


def symmetric_part(B: MultiDiffOp) -> MultiDiffOp:
    return (B + B.permute_slots([1, 0])).scale(Fraction(1, 2))


def skew_part(B: MultiDiffOp) -> MultiDiffOp:
    return (B - B.permute_slots([1, 0])).scale(Fraction(1, 2))


def coboundary_inverse(Bsym: MultiDiffOp) -> MultiDiffOp:
    """Differential operator ``D`` with ``D(fg) - D(f) g - f D(g) = Bsym(f, g)``.

    Matches coefficients: ``Bsym = sum c^{K,L} d_K f d_L g`` forces
    ``D = sum a^M d_M`` with ``a^{K+L} = c^{K,L} / prod_r binom(K_r + L_r, K_r)``.
    Raises :class:`InconsistentExtension` when two splittings of the same
    ``M`` disagree or a required splitting is missing.
    """
    dim = Bsym.dim
    if not Bsym.vanishes_on_constants():
        raise InconsistentExtension("symmetric part does not vanish on constants")
    a: dict = {}
    for (K, L), c in Bsym.terms.items():
        kc, lc = mi_counts(K, dim), mi_counts(L, dim)
        denom = 1
        for x, y in zip(kc, lc):
            denom *= comb(x + y, x)
        M = mi_merge(K, L)
        val = c.scale(Fraction(1, denom))
        if M in a and a[M] != val:
            raise InconsistentExtension(f"splittings of {M} disagree: {a[M]} vs {val}")
        a[M] = val
    D = MultiDiffOp(dim, 1, {(M,): v for M, v in a.items()})
    check = compose_i(D, MultiDiffOp.pointwise(dim), 0) - compose_i(MultiDiffOp.pointwise(dim), D, 0) \
        - compose_i(MultiDiffOp.pointwise(dim), D, 1)
    if check != Bsym:
        raise InconsistentExtension("symmetric part is not a Hochschild coboundary of a differential operator")
    return D


def extend_on_monomials(Bsym: MultiDiffOp, max_degree: int) -> dict[tuple[int, ...], Poly]:
    """Build ``D(x^e)`` for all monomials up to ``max_degree`` from ``D(x_i) = 0`` and
    ``D(fg) = D(f) g + f D(g) + Bsym(f, g)``, checking every binary grouping agrees."""
    dim = Bsym.dim
    memo: dict[tuple[int, ...], Poly] = {}

    def value(exp: tuple[int, ...]) -> Poly:
        if exp in memo:
            return memo[exp]
        deg = sum(exp)
        if deg <= 1:
            memo[exp] = Poly.zero(dim)
            return memo[exp]
        results = []
        for left in itertools.product(*(range(e + 1) for e in exp)):
            right = tuple(e - l for e, l in zip(exp, left))
            if sum(left) == 0 or sum(right) == 0:
                continue
            f, g = Poly.monomial(left), Poly.monomial(right)
            results.append(value(left) * g + f * value(right) + op_apply(Bsym, [f, g]))
        first = results[0]
        for r in results[1:]:
            if r != first:
                raise InconsistentExtension(f"groupings of x^{exp} give different values")
        memo[exp] = first
        return first

    out = {}
    for deg in range(max_degree + 1):
        for exp in _exponents(dim, deg):
            out[exp] = value(exp)
    return out


def _exponents(dim: int, deg: int):
    for cut in itertools.combinations_with_replacement(range(dim), deg):
        e = [0] * dim
        for c in cut:
            e[c] += 1
        yield tuple(e)


def skew_normalize(S: StarProduct) -> tuple[StarProduct, GaugeOp]:
    """Gauge ``S`` so that ``B_1`` becomes skew; returns the new product and the gauge used."""
    if S.order < 1:
        return S, GaugeOp.identity(S.dim, S.order)
    D1 = coboundary_inverse(symmetric_part(S.bidiff[0]))
    D = GaugeOp(S.dim, S.order, (D1,) + tuple(MultiDiffOp.zero(S.dim, 1) for _ in range(S.order - 1)))
    return gauge_transform(S, D), D


# ---------------------------------------------------------------------------
# formality residuals
# ---------------------------------------------------------------------------

def formality_residual_op(xs: Sequence[MultiVectorField], weights: Optional[WeightSource] = None) -> MultiDiffOp:
    """Left side minus right side of the formality equation for ``n = len(xs)``.

    ``n = 1``: ``[m, U_1 X]``.
    ``n = 2``: ``[m, U_2(X, Y)] + [U_1 X, U_1 Y] - U_1 [X, Y]``.
    Graphs whose operator is Hochschild-closed drop out of ``[m, U_2]`` and
    their weights are never requested.
    """
    m = MultiDiffOp.pointwise(xs[0].dim)
    if len(xs) == 1:
        (X,) = xs
        U1 = u_n([X], X.grade, weights or WeightSource("cache"))
        return gerstenhaber(m, U1)
    if len(xs) == 2:
        X, Y = xs
        if X.grade < 1 or Y.grade < 1:
            raise ValueError("n = 2 residual needs grades >= 1")
        if weights is None:
            raise ValueError("n = 2 residual needs a weight source")
        nbar = X.grade + Y.grade - 2
        U2 = u_n([X, Y], nbar, weights, skip=lambda B: hochschild_d(B).is_zero())
        return gerstenhaber(m, U2) + gerstenhaber(hkr_u1(X), hkr_u1(Y)) - hkr_u1(schouten(X, Y))
    raise ValueError("only n = 1 and n = 2 are supported")


def formality_residual(xs: Sequence[MultiVectorField], fs: Sequence[Poly],
                       weights: Optional[WeightSource] = None) -> Poly:
    return op_apply(formality_residual_op(xs, weights), list(fs))


# ---------------------------------------------------------------------------
# order-2 weights from associativity
# ---------------------------------------------------------------------------

DEFAULT_SOLVE_STRUCTURES = (
    ("x3 d1^d2 + x1 d2^d3 + x2 d3^d1", 3),
    ("x1*x2 d1^d2", 2),
    ("(x1^2 + x2^2) d1^d2", 2),
    ("x1*x2 d1^d2 + x2*x3 d2^d3 - x1*x3 d1^d3", 3),
)


@dataclass
class SolvedWeight:
    representative: AdmissibleGraph
    value: Fraction
    provenance: str
    estimate: WeightEstimate
    members: list = field(default_factory=list)  # (labeled graph, sign)

    @property
    def deviation(self) -> float:
        return abs(float(self.value) - self.estimate.mean)

    def agrees(self, nsigma: float = 3.0) -> bool:
        return self.deviation <= nsigma * self.estimate.stderr + 1e-12

    def entries(self) -> list[WeightCacheEntry]:
        tag = "associativity" if self.provenance == "associativity-solve" else "rationalized-mc"
        if self.provenance == "exact-lemma":
            tag = lemma_weight(self.representative)[1]
        return [WeightCacheEntry(G.key(), self.value * s, self.provenance, tag,
                                 None if self.provenance != "mc" else self.estimate.stderr)
                for G, s in self.members]


def _orbits(graphs: list[AdmissibleGraph]) -> dict[str, tuple[AdmissibleGraph, list]]:
    orbits: dict[str, tuple[AdmissibleGraph, list]] = {}
    for G in graphs:
        sign, rep = G.orbit_representative()
        orbits.setdefault(rep.key(), (rep, []))[1].append((G, sign))
    return orbits


def solve_order2_weights(samples: int = 10**6, seed: int = 42, structures=DEFAULT_SOLVE_STRUCTURES,
                         nsigma: float = 3.0) -> list[SolvedWeight]:
    """Weights of the order-2 graphs (two bivector vertices, two ground vertices).

    Unknown orbit weights enter ``B_2`` linearly; requiring the order-2
    associativity residual to vanish for every structure in ``structures``
    gives a rational linear system.  Directions it leaves free multiply
    Hochschild-closed operators; those are filled with rationalized MC
    estimates (provenance ``mc``).  Every orbit is also estimated by MC so the
    solved values can be cross-checked.
    """
    graphs = enumerate_graphs(2, 2, 4, (2, 2))
    orbits = _orbits(graphs)
    known: dict[str, Fraction] = {}
    unknown: list[str] = []
    for key, (rep, _) in orbits.items():
        lw = lemma_weight(rep)
        if lw is not None:
            known[key] = lw[0]
        else:
            unknown.append(key)
    rows: list[list[Fraction]] = []
    rhs: list[Fraction] = []
    for text, dim in structures:
        pi = parse_multivector(text, dim)
        if not jacobiator(pi).is_zero():
            raise NotPoissonError(f"solve structure {text!r} is not Poisson")
        B1 = assemble_operator(AdmissibleGraph(1, 2, ((1, 2),)), [pi])
        base = gerstenhaber(B1, B1).scale(Fraction(1, 2))
        cols = {}
        for key, (rep, members) in orbits.items():
            op = MultiDiffOp.zero(dim, 2)
            for G, sign in members:
                op = op + assemble_operator(G, [pi, pi]).scale(sign)
            op = hochschild_d(op.scale(2))  # 2^2 / 2!
            if key in known:
                base = base + op.scale(known[key])
            else:
                cols[key] = op
        coords = set(base.terms)
        for op in cols.values():
            coords |= set(op.terms)
        for d in sorted(coords):
            monos = set(base.terms.get(d, Poly.zero(dim)).terms)
            for op in cols.values():
                monos |= set(op.terms.get(d, Poly.zero(dim)).terms)
            for e in sorted(monos):
                row = [cols[k].terms[d].terms.get(e, Fraction(0)) if d in cols[k].terms else Fraction(0)
                       for k in unknown]
                b = -(base.terms[d].terms.get(e, Fraction(0)) if d in base.terms else Fraction(0))
                if any(row) or b:
                    rows.append(row)
                    rhs.append(b)
    estimates = {key: mc_weight(orbits[key][0], samples, seed) for key in orbits}
    solution, pivots = _solve_rational(rows, rhs, len(unknown))
    values: dict[str, tuple[Fraction, str]] = {k: (v, "exact-lemma") for k, v in known.items()}
    free_vals = {}
    for j, key in enumerate(unknown):
        if j not in pivots:
            est = estimates[key]
            r = rationalize(est.mean, est.stderr, nsigma)
            if r is None:
                raise ValueError(f"could not rationalize the MC weight of {key}")
            free_vals[j] = r
            values[key] = (r, "mc")
    for j, (const, deps) in solution.items():
        v = const - sum((c * free_vals[k] for k, c in deps.items()), Fraction(0))
        prov = "associativity-solve" if not deps else "mc"
        values[unknown[j]] = (v, prov)
    out = []
    for key, (rep, members) in orbits.items():
        v, prov = values[key]
        out.append(SolvedWeight(rep, v, prov, estimates[key], members))
    out.sort(key=lambda s: s.representative.key())
    return out


def _solve_rational(rows, rhs, nvars):
    """Reduced row echelon solve; returns ``({pivot: (constant, {free: coeff})}, pivots)``.

    Raises ``ValueError`` when the system is inconsistent.
    """
    if nvars == 0:
        if any(rhs):
            raise ValueError("inconsistent linear system")
        return {}, set()
    M = sympy.Matrix([[sympy.Rational(x.numerator, x.denominator) for x in r]
                      + [sympy.Rational(b.numerator, b.denominator)] for r, b in zip(rows, rhs)])
    R, piv = M.rref()
    if nvars in piv:
        raise ValueError("inconsistent linear system: associativity cannot be satisfied")
    pivots = set(piv)
    out = {}
    for i, j in enumerate(piv):
        const = Fraction(int(R[i, nvars].p), int(R[i, nvars].q))
        deps = {k: Fraction(int(R[i, k].p), int(R[i, k].q)) for k in range(nvars)
                if k not in pivots and R[i, k] != 0}
        out[j] = (const, deps)
    return out, pivots


def solved_cache(solved: list[SolvedWeight]) -> WeightCache:
    cache = WeightCache()
    for s in solved:
        for e in s.entries():
            cache.put(e)
    return cache
