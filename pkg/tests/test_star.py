import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from stardq.graphs import named_graph
from stardq.multidiff import GaugeOp, MultiDiffOp, StarProduct, compose_i, hkr_u1, mc_residual, op_apply
from stardq.multivector import MultiVectorField, parse_matrix, parse_multivector, poisson_bracket
from stardq.poly import Poly, parse_poly
from stardq.series import EpsSeries
from stardq.star import (InconsistentExtension, NotPoissonError, assoc_residual, coboundary_inverse,
                         extend_on_monomials, formality_residual, formality_residual_op, gauge_transform, moyal,
                         skew_normalize, skew_part, solve_order2_weights, star_expand, symmetric_part, u_n)
from stardq.weights import WeightCache, WeightSource, packaged_cache_path
from strategies import fields, graded_fields

SO3 = "x3 d1^d2 + x1 d2^d3 + x2 d3^d1"


@pytest.fixture(scope="module")
def cached():
    return WeightSource("cache", cache=WeightCache.load(packaged_cache_path()))


@pytest.fixture(scope="module")
def so3_star(cached):
    return star_expand(parse_multivector(SO3, 3), 2, cached)


def monomials(dim, max_degree):
    for deg in range(max_degree + 1):
        for cut in itertools.combinations_with_replacement(range(dim), deg):
            e = [0] * dim
            for c in cut:
                e[c] += 1
            yield Poly.monomial(e)


def op(dim, arity, *terms):
    return MultiDiffOp.from_terms(dim, arity, [(Poly.const(dim, c) if not isinstance(c, Poly) else c, d)
                                               for c, d in terms])


# -- Moyal ---------------------------------------------------------------------

def test_moyal_examples():
    S = moyal(parse_matrix("0 1; -1 0"), 2)
    x1, x2 = Poly.var(2, 1), Poly.var(2, 2)
    assert str(S(x1, x2)) == "x1*x2 + eps"
    assert str(S(x1 * x1, x2 * x2)) == "x1^2*x2^2 + 4*x1*x2*eps + 2*eps^2"
    Z = moyal(parse_matrix("0 0; 0 0"), 3)
    assert all(B.is_zero() for B in Z.bidiff)
    with pytest.raises(ValueError):
        moyal(parse_matrix("0 1; 1 0"), 2)


def test_moyal_is_associative():
    S = moyal(parse_matrix("0 1 0; -1 0 2; 0 -2 0"), 3)
    assert all(c.is_zero() for c in mc_residual(S).coeffs)


# -- star_expand ---------------------------------------------------------------

def test_constant_bivector_first_order(cached):
    S = star_expand(parse_multivector("d1^d2", 2), 1, cached)
    x1, x2 = Poly.var(2, 1), Poly.var(2, 2)
    assert op_apply(S.bidiff[0], [x1, x2]) == Poly.const(2, 1)
    assert op_apply(S.bidiff[0], [x2, x1]) == Poly.const(2, -1)


@pytest.mark.parametrize("matrix", ["0 1; -1 0", "0 1 -2; -1 0 1/2; 2 -1/2 0"])
def test_constant_bivector_matches_moyal(cached, matrix):
    alpha = parse_matrix(matrix)
    pi = MultiVectorField.from_matrix(alpha)
    assert star_expand(pi, 3, cached) == moyal(alpha, 3)


def test_unit_axiom(so3_star):
    one = Poly.const(3, 1)
    for f in monomials(3, 3):
        assert so3_star(one, f) == EpsSeries.constant(f, 2)
        assert so3_star(f, one) == EpsSeries.constant(f, 2)


def test_non_poisson_is_refused(cached):
    pi = parse_multivector("x1 d1^d2 + x2 d2^d3", 3)
    with pytest.raises(NotPoissonError):
        star_expand(pi, 2, cached)
    S = star_expand(pi, 2, cached, force=True)
    R = mc_residual(S)
    assert R[1].is_zero() and not R[2].is_zero()


def test_first_order_recovers_the_bracket(so3_star):
    pi = parse_multivector(SO3, 3)
    B1 = so3_star.bidiff[0]
    assert B1 == hkr_u1(pi).scale(2)
    for f, g in itertools.product(list(monomials(3, 3)), repeat=2):
        comm = so3_star(f, g) - so3_star(g, f)
        assert comm[1] == poisson_bracket(pi, f, g).scale(2)


@pytest.mark.parametrize("text,dim", [(SO3, 3), ("x1*x2 d1^d2", 2), ("(x1^2 + x2^2) d1^d2", 2)])
def test_order_two_associativity(cached, text, dim):
    S = star_expand(parse_multivector(text, dim), 2, cached)
    assert all(c.is_zero() for c in mc_residual(S).coeffs)
    monos = list(monomials(dim, 3 if dim == 2 else 2))
    for f, g, h in itertools.product(monos, repeat=3):
        assert assoc_residual(S, f, g, h).is_zero()


def test_first_order_only_fails_at_second_order():
    pi = parse_multivector(SO3, 3)
    S = StarProduct(3, 2, (hkr_u1(pi).scale(2), MultiDiffOp.zero(3, 2)))
    x = [Poly.var(3, i) for i in (1, 2, 3)]
    worst = [assoc_residual(S, f, g, h) for f, g, h in itertools.product(list(monomials(3, 2)), repeat=3)]
    assert all(r[1].is_zero() for r in worst)
    assert any(not r[2].is_zero() for r in worst)
    assert assoc_residual(S, Poly.const(3, 1), x[0], x[1]).is_zero()


def test_u_n_vanishes_off_the_edge_count(cached):
    # one vector field and two grounds: 1 edge where 2 are needed
    U = u_n([parse_multivector("d1", 2)], 2, cached)
    assert U.arity == 2 and U.is_zero()


# -- gauge transformations --------------------------------------------------

def random_gauge(dim, order):
    D1 = op(dim, 1, (Poly.var(dim, 1), [(2,)]), (Fraction(1, 3), [(1, 2)]))
    D2 = op(dim, 1, (Poly.var(dim, 2), [(1, 1)]))
    return GaugeOp(dim, order, (D1, D2)[:order] + tuple(MultiDiffOp.zero(dim, 1) for _ in range(order - 2)))


def test_gauge_identity_and_inverse(so3_star):
    S = so3_star
    assert gauge_transform(S, GaugeOp.identity(3, 2)) == S
    D = random_gauge(3, 2)
    T = gauge_transform(S, D)
    assert T != S
    assert gauge_transform(T, D.inverse()) == S
    assert all(c.is_zero() for c in mc_residual(T).coeffs)


def test_laplacian_gauge_on_moyal():
    S = moyal(parse_matrix("0 1; -1 0"), 2)
    lap = op(2, 1, (1, [(1, 1)]), (1, [(2, 2)]))
    D = GaugeOp(2, 2, (lap, MultiDiffOp.zero(2, 1)))
    T = gauge_transform(S, D)
    m = MultiDiffOp.pointwise(2)
    coboundary = compose_i(lap, m, 0) - compose_i(m, lap, 0) - compose_i(m, lap, 1)
    assert T.bidiff[0] - S.bidiff[0] == coboundary.scale(-1)
    assert all(c.is_zero() for c in mc_residual(T).coeffs)


# -- skew normalization -------------------------------------------------------

def half_moyal_standard():
    # f * g = sum eps^k / k! d1^k f d2^k g : associative with non-skew B1
    B1 = op(2, 2, (1, [(1,), (2,)]))
    B2 = op(2, 2, (Fraction(1, 2), [(1, 1), (2, 2)]))
    return StarProduct(2, 2, (B1, B2))


def test_skew_normalize_examples():
    S = half_moyal_standard()
    T, D = skew_normalize(S)
    assert D.diffops[0] == op(2, 1, (Fraction(1, 2), [(1, 2)]))
    assert T.bidiff[0] == op(2, 2, (Fraction(1, 2), [(1,), (2,)]), (Fraction(-1, 2), [(2,), (1,)]))
    assert all(c.is_zero() for c in mc_residual(T).coeffs)
    # already skew: nothing to do
    U, E = skew_normalize(T)
    assert U == T and all(d.is_zero() for d in E.diffops)


def test_skew_normalize_bracket_identities():
    T, _ = skew_normalize(half_moyal_standard())
    B = T.bidiff[0]
    b = lambda f, g: op_apply(B, [f, g])
    monos = list(monomials(2, 3))
    for f, g in itertools.product(monos, repeat=2):
        assert b(f, g) == -b(g, f)
    for f, g, h in itertools.product(monos, repeat=3):
        assert b(f, g * h) == b(f, g) * h + g * b(f, h)
        assert b(f, b(g, h)) + b(g, b(h, f)) + b(h, b(f, g)) == Poly.zero(2)


def test_skew_normalize_undoes_a_gauge(so3_star):
    T = gauge_transform(so3_star, random_gauge(3, 2))
    assert symmetric_part(T.bidiff[0]) != MultiDiffOp.zero(3, 2)
    U, D = skew_normalize(T)
    assert symmetric_part(U.bidiff[0]).is_zero()
    assert U.bidiff[0] == so3_star.bidiff[0]
    assert all(c.is_zero() for c in mc_residual(U).coeffs)


def test_extension_on_monomials_is_grouping_independent():
    S = half_moyal_standard()
    Bsym = symmetric_part(S.bidiff[0])
    values = extend_on_monomials(Bsym, 4)
    D1 = coboundary_inverse(Bsym)
    for exp, val in values.items():
        assert val == op_apply(D1, [Poly.monomial(exp)])
    # cubic example: both groupings of x1 * x1 * x2 agree
    x1, x2 = Poly.var(2, 1), Poly.var(2, 2)
    b = lambda f, g: op_apply(Bsym, [f, g])
    left = values[(2, 0)] * x2 + b(x1 * x1, x2)
    right = x1 * values[(1, 1)] + b(x1, x1 * x2)
    assert left == right == values[(2, 1)]


def test_inconsistent_extension_is_reported():
    bad = op(2, 2, (1, [(1, 1), (2, 2)]), (1, [(2, 2), (1, 1)]))
    with pytest.raises(InconsistentExtension):
        coboundary_inverse(bad)
    with pytest.raises(InconsistentExtension):
        extend_on_monomials(bad, 4)


# -- formality residuals ------------------------------------------------------

@settings(max_examples=40)
@given(graded_fields(3))
def test_formality_n1_exact(X):
    assert formality_residual_op([X]).is_zero()


def test_formality_two_vector_fields_exact():
    xi, eta = parse_multivector("x2^2 d1", 3), parse_multivector("x1*x3 d2 + d3", 3)
    assert formality_residual_op([xi, eta], WeightSource("cache", cache=WeightCache())).is_zero()


def test_formality_two_bivectors_exact_with_solved_weights(cached):
    X, Y = parse_multivector("x1 d1^d2", 2), parse_multivector("d1^d2", 2)
    R = formality_residual_op([X, Y], cached)
    assert R.is_zero()
    f = [parse_poly(t, 2) for t in ("x1^2*x2", "x2^2", "x1*x2")]
    assert formality_residual([X, Y], f, cached).is_zero()


def test_formality_mixed_grades_with_mc():
    X, Y = parse_multivector("x1^2 d2", 2), parse_multivector("x1*x2 d1^d2", 2)
    R = formality_residual_op([X, Y], WeightSource("mc", samples=2 ** 16, seed=3))
    assert R.max_abs_coeff() < 0.05


def test_formality_rejects_bad_input():
    with pytest.raises(ValueError):
        formality_residual_op([parse_multivector("x1", 2), parse_multivector("d1", 2)], WeightSource("cache"))
    d = parse_multivector("d1", 2)
    with pytest.raises(ValueError):
        formality_residual_op([d, d, d], WeightSource("cache"))


# -- the order-2 solve --------------------------------------------------------

def test_order_two_solve():
    solved = {s.representative.key(): s for s in solve_order2_weights(samples=2 ** 18, seed=42)}
    lean = solved[named_graph("lean-left").key()]
    assert lean.value == Fraction(-1, 12) and lean.provenance == "associativity-solve"
    assert solved[named_graph("lean-right").key()].value == Fraction(1, 12)
    loop = solved[named_graph("loop").key()]
    assert loop.provenance == "mc" and loop.value == Fraction(-1, 24)
    assert solved[named_graph("double-wedge").key()].value == Fraction(1, 4)
    assert all(s.agrees(4) for s in solved.values())
