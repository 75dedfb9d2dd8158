"""Acceptance criteria 1-9, each at its stated tolerance.

Every test prints one ``ACCEPTANCE <n>: PASS|FAIL`` line and the terminal
summary lists all verdicts.
"""
import itertools
import random
import time
from fractions import Fraction

from hypothesis import HealthCheck, given, settings, strategies as st

from stardq.graphs import named_graph
from stardq.multidiff import (GaugeOp, MultiDiffOp, StarProduct, gerstenhaber, hkr_u1, hochschild_d, mc_residual,
                              u1_defect)
from stardq.multivector import MultiVectorField, jacobiator, mv_wedge, parse_multivector, poisson_bracket, schouten
from stardq.poly import Poly
from stardq.star import (assoc_residual, extend_on_monomials, formality_residual_op, gauge_transform, moyal,
                         skew_normalize, solve_order2_weights, star_expand, symmetric_part)
from stardq.weights import WeightCache, WeightSource, mc_weight, packaged_cache_path
from stardq.multivector import parse_matrix
from strategies import diffops, fields, graded_fields

SO3 = "x3 d1^d2 + x1 d2^d3 + x2 d3^d1"
SUITE = settings(max_examples=200, derandomize=True, deadline=None,
                 suppress_health_check=[HealthCheck.too_slow, HealthCheck.filter_too_much])


def cached_weights():
    return WeightSource("cache", cache=WeightCache.load(packaged_cache_path()))


def monomials(dim, max_degree):
    for deg in range(max_degree + 1):
        for cut in itertools.combinations_with_replacement(range(dim), deg):
            e = [0] * dim
            for c in cut:
                e[c] += 1
            yield Poly.monomial(e)


# -- 1 ------------------------------------------------------------------------

def test_criterion_1_fan_weights(criterion):
    with criterion(1, "fan weights 1/2 and 1/6 within 3 stderr, stderr <= 0.01, <= 60 s at 1e6 samples"):
        for name, exact in (("fan2", 0.5), ("fan3", 1 / 6)):
            start = time.perf_counter()
            est = mc_weight(named_graph(name), 10 ** 6, 42, gauge="ground")
            elapsed = time.perf_counter() - start
            print(f"  {name}: {est} (exact {exact:.6f}) in {elapsed:.1f} s")
            assert est.stderr <= 0.01
            assert abs(est.mean - exact) <= 3 * est.stderr + 1e-12
            assert elapsed <= 60


# -- 2 ------------------------------------------------------------------------

def _coefficient_gap(A: StarProduct, B: StarProduct) -> float:
    return max((a - b).max_abs_coeff() for a, b in zip(A.bidiff, B.bidiff))


def test_criterion_2_moyal_reproduction(criterion):
    with criterion(2, "constant pi = d1^d2, N = 2: exact in cache mode, within 0.02 in MC mode"):
        pi = parse_multivector("d1^d2", 2)
        reference = moyal(parse_matrix("0 1; -1 0"), 2)
        assert star_expand(pi, 2, cached_weights()) == reference
        mc = star_expand(pi, 2, WeightSource("mc", samples=10 ** 6, seed=42))
        gap = _coefficient_gap(mc, reference)
        print(f"  MC mode: max coefficient gap {gap:.2e}")
        assert gap <= 0.02


# -- 3 ------------------------------------------------------------------------

def test_criterion_3_associativity_order_two(criterion):
    with criterion(3, "so(3) star product associative at eps^1 and eps^2 on monomials of degree <= 2"):
        start = time.perf_counter()
        S = star_expand(parse_multivector(SO3, 3), 2, cached_weights())
        monos = list(monomials(3, 2))
        for f, g, h in itertools.product(monos, repeat=3):
            r = assoc_residual(S, f, g, h)
            assert r[1].is_zero() and r[2].is_zero(), (f, g, h)
        elapsed = time.perf_counter() - start
        print(f"  {len(monos) ** 3} triples in {elapsed:.1f} s")
        assert elapsed <= 300


# -- 4 ------------------------------------------------------------------------

def test_criterion_4_weight_cross_check(criterion):
    with criterion(4, "associativity-solved weights agree with MC within 3 stderr at 1e6 samples"):
        solved = [s for s in solve_order2_weights(samples=10 ** 6, seed=42) if s.provenance == "associativity-solve"]
        assert solved
        for s in solved:
            print(f"  {s.representative.key()}: solved {s.value}, MC {s.estimate}, "
                  f"{s.deviation / s.estimate.stderr:.2f} sigma")
            assert s.agrees(3.0)


# -- 5 ------------------------------------------------------------------------

@st.composite
def schouten_triples(draw):
    dim = draw(st.integers(2, 4))
    return tuple(draw(graded_fields(dim, 3, 2)) for _ in range(3))


@st.composite
def operator_triples(draw):
    dim = draw(st.integers(1, 3))
    arities = draw(st.lists(st.integers(1, 3), min_size=3, max_size=3).filter(lambda a: sum(a) <= 6))
    return tuple(draw(diffops(dim, a, max_order=2, max_degree=2, max_terms=2)) for a in arities)


def _schouten_graded(X, Y):
    # brackets of two functions vanish; their formal grade -1 is represented by None
    return None if X.grade + Y.grade == 0 else schouten(X, Y)


def _add(*terms):
    terms = [t for t in terms if t is not None]
    out = terms[0]
    for t in terms[1:]:
        out = out + t
    return out


@SUITE
@given(schouten_triples())
def test_criterion_5a_schouten(triple):
    X, Y, Z = triple
    x, y, z = X.grade, Y.grade, Z.grade
    # graded skew symmetry
    assert schouten(X, Y) == schouten(Y, X).scale(-(-1) ** ((x + 1) * (y + 1)))
    # Leibniz with respect to the wedge product
    if x + y + z > 0:
        lhs = schouten(X, mv_wedge(Y, Z))
        parts = []
        if x + y > 0:
            parts.append(mv_wedge(schouten(X, Y), Z))
        if x + z > 0:
            parts.append(mv_wedge(Y, schouten(X, Z)).scale((-1) ** ((x - 1) * y)))
        assert lhs == (_add(*parts) if parts else MultiVectorField.zero(X.dim, x + y + z - 1))
    # graded Jacobi in shifted degrees a = x - 1, ...
    a, b, c = x - 1, y - 1, z - 1
    if min(x + y, x + z, y + z) > 0 and x + y + z > 1:
        lhs = schouten(X, schouten(Y, Z))
        rhs = schouten(schouten(X, Y), Z) + schouten(Y, schouten(X, Z)).scale((-1) ** (a * b))
        assert lhs == rhs


@SUITE
@given(operator_triples())
def test_criterion_5b_gerstenhaber(triple):
    P, Q, R = triple
    p, q, r = P.degree, Q.degree, R.degree
    assert gerstenhaber(P, Q) == gerstenhaber(Q, P).scale(-(-1) ** (p * q))
    lhs = gerstenhaber(P, gerstenhaber(Q, R))
    rhs = gerstenhaber(gerstenhaber(P, Q), R) + gerstenhaber(Q, gerstenhaber(P, R)).scale((-1) ** (p * q))
    assert lhs == rhs


@SUITE
@given(st.integers(1, 3).flatmap(lambda d: st.integers(0, 3).flatmap(
    lambda a: diffops(d, a, max_order=2, max_degree=2))))
def test_criterion_5c_d_squared(psi):
    assert hochschild_d(hochschild_d(psi)).is_zero()


def test_criterion_5_dgla_suites(criterion):
    with criterion(5, "Schouten skew/Leibniz/Jacobi, Gerstenhaber skew/Jacobi, d_m^2 = 0 (200 cases each)"):
        test_criterion_5a_schouten()
        test_criterion_5b_gerstenhaber()
        test_criterion_5c_d_squared()


# -- 6 ------------------------------------------------------------------------

def _random_linear(rng, dim=3):
    terms = {(0,) * dim: Fraction(rng.randint(-2, 2))}
    for i in range(dim):
        e = [0] * dim
        e[i] = 1
        terms[tuple(e)] = Fraction(rng.randint(-2, 2))
    return Poly(dim, terms)


def _random_bivectors(count, seed=42):
    """Half generic degree-<=1 bivectors, half of the form pi^{ij} = eps^{ijk} d_k C with C quadratic."""
    rng = random.Random(seed)
    out = []
    for k in range(count):
        if k % 2 == 0:
            comps = {I: _random_linear(rng) for I in ((1, 2), (1, 3), (2, 3))}
        else:
            C = Poly(3, {e: Fraction(rng.randint(-2, 2)) for e in
                         [(2, 0, 0), (0, 2, 0), (0, 0, 2), (1, 1, 0), (1, 0, 1), (0, 1, 1), (1, 0, 0)]})
            comps = {(1, 2): C.partial(3), (1, 3): -C.partial(2), (2, 3): C.partial(1)}
        out.append(MultiVectorField(3, 2, comps))
    return out


def test_criterion_6_maurer_cartan_iff_jacobi(criterion):
    with criterion(6, "50 random R^3 bivectors: jacobiator = 0 iff scalar Jacobi on coordinates"):
        xs = [Poly.var(3, i) for i in (1, 2, 3)]
        zeros = 0
        for pi in _random_bivectors(50):
            b = lambda f, g: poisson_bracket(pi, f, g)
            scalar_ok = all(
                (b(f, b(g, h)) + b(g, b(h, f)) + b(h, b(f, g))).is_zero()
                for f, g, h in itertools.combinations(xs, 3))
            assert jacobiator(pi).is_zero() == scalar_ok
            zeros += scalar_ok
        print(f"  {zeros} Poisson, {50 - zeros} non-Poisson")
        assert 0 < zeros < 50


# -- 7 ------------------------------------------------------------------------

def test_criterion_7_hkr(criterion):
    with criterion(7, "d_m(hkr_u1(X)) = 0 and u1_defect(X, Y) closed on 100+ random cases"):
        hkr_cases = []

        @settings(max_examples=120, derandomize=True, deadline=None)
        @given(st.integers(1, 3).flatmap(lambda d: graded_fields(d, 3, 2)))
        def chain_map(X):
            hkr_cases.append(X)
            assert hochschild_d(hkr_u1(X)).is_zero()

        defect_cases = []

        @settings(max_examples=120, derandomize=True, deadline=None)
        @given(st.integers(1, 2).flatmap(lambda gx: st.integers(1, 2).flatmap(
            lambda gy: st.tuples(fields(3, gx, 2), fields(3, gy, 2)))))
        def defect_closed(pair):
            defect_cases.append(pair)
            assert hochschild_d(u1_defect(*pair)).is_zero()

        chain_map()
        defect_closed()
        print(f"  {len(hkr_cases)} chain-map cases, {len(defect_cases)} defect cases")
        assert len(hkr_cases) >= 100 and len(defect_cases) >= 100


# -- 8 ------------------------------------------------------------------------

def test_criterion_8_gauge_and_skew(criterion):
    with criterion(8, "skew_normalize to degree 4 with grouping independence; gauge then inverse is exact"):
        half = StarProduct(2, 2, (
            MultiDiffOp.from_terms(2, 2, [(Poly.const(2, 1), [(1,), (2,)])]),
            MultiDiffOp.from_terms(2, 2, [(Poly.const(2, Fraction(1, 2)), [(1, 1), (2, 2)])])))
        so3 = star_expand(parse_multivector(SO3, 3), 2, cached_weights())
        D = GaugeOp(3, 2, (
            MultiDiffOp.from_terms(3, 1, [(Poly.var(3, 1), [(2, 3)]), (Poly.const(3, 2), [(1, 1)])]),
            MultiDiffOp.from_terms(3, 1, [(Poly.var(3, 3), [(1, 2, 2)])])))
        gauged = gauge_transform(so3, D)
        assert gauge_transform(gauged, D.inverse()) == so3
        for S in (half, gauged):
            extend_on_monomials(symmetric_part(S.bidiff[0]), 4)
            T, _ = skew_normalize(S)
            B1 = T.bidiff[0]
            assert B1 == B1.permute_slots([1, 0]).scale(-1)
            assert all(c.is_zero() for c in mc_residual(T).coeffs)


# -- 9 ------------------------------------------------------------------------

def test_criterion_9_formality(criterion):
    with criterion(9, "n = 1 residual exactly 0 for grades <= 3; n = 2 residual < 0.05 with MC weights"):
        rng = random.Random(9)
        for grade in range(4):
            for _ in range(5):
                slots = list(itertools.combinations(range(1, 4), grade))
                X = MultiVectorField.from_terms(3, grade, [(_random_linear(rng) * _random_linear(rng), I)
                                                           for I in slots])
                assert formality_residual_op([X]).is_zero()
        X, Y = parse_multivector("x1 d1^d2", 2), parse_multivector("d1^d2", 2)
        R = formality_residual_op([X, Y], WeightSource("mc", samples=10 ** 6, seed=42))
        print(f"  n = 2 max |coefficient| = {R.max_abs_coeff():.2e}")
        assert R.max_abs_coeff() < 0.05
