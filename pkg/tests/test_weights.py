import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stardq.graphs import AdmissibleGraph, enumerate_graphs, named_graph
from stardq.weights import (ConfigPoint, MissingWeightError, WeightCache, WeightCacheEntry, WeightSource, angle,
                            angle_gradient, known_weight, lemma_entries, lemma_weight, mc_weight, omega_density,
                            packaged_cache_path, rationalize)

SMALL = 2 ** 16


def test_angle_examples():
    assert angle(1j, 2j) == pytest.approx(0.0, abs=1e-12)
    assert angle(1j, 0) == pytest.approx(math.pi)
    # far along the real axis the geodesic becomes vertical again: the angle tends to 0 mod 2 pi
    assert min(angle(1j, 1e9), 2 * math.pi - angle(1j, 1e9)) < 1e-8
    assert angle(1j, -1e9) < 1e-8
    assert angle(1j, 1) == pytest.approx(3 * math.pi / 2)
    assert angle(1j, -1) == pytest.approx(math.pi / 2)
    with pytest.raises(ValueError):
        angle(1j, 1j)
    with pytest.raises(ValueError):
        angle(1.0, 2j)


upper = st.builds(complex, st.floats(-3, 3), st.floats(0.2, 3))
closed = st.one_of(upper, st.floats(-3, 3).map(complex))


@given(upper, closed)
def test_angle_gradient_matches_finite_differences(z1, z2):
    if abs(z1 - z2) < 0.1:
        return
    h = 1e-6
    grad = angle_gradient(np.array([z1]), np.array([z2]))
    moves = [(h, 0), (1j * h, 0), (0, h), (0, 1j * h)]
    if z2.imag == 0:
        moves = moves[:3]  # the second point may not leave the closed half plane
    for g, (d1, d2) in zip(grad, moves):
        plus, minus = angle(z1 + d1, z2 + d2), angle(z1 - d1, z2 - d2)
        diff = (plus - minus + math.pi) % (2 * math.pi) - math.pi
        assert float(g[0]) == pytest.approx(diff / (2 * h), abs=1e-6)


def test_config_point_validation():
    with pytest.raises(ValueError):
        ConfigPoint((0.5 + 0j,), (0.0, 1.0))
    with pytest.raises(ValueError):
        ConfigPoint((1j,), (1.0, 0.0))


def test_omega_density_examples():
    W = named_graph("wedge")
    val = omega_density(W, ConfigPoint((1j,), (0.0, 1.0)), gauge="ground")
    assert math.isfinite(val) and val != 0
    parallel = AdmissibleGraph(1, 2, ((1, 1),))
    assert omega_density(parallel, ConfigPoint((1j,), (0.0, 1.0)), gauge="ground") == 0.0
    bad = AdmissibleGraph(1, 2, ((1,),))
    with pytest.raises(ValueError):
        omega_density(bad, ConfigPoint((1j,), (0.0, 1.0)), gauge="ground")


def test_omega_density_flips_with_star_order():
    G = AdmissibleGraph(2, 2, ((1, 2), (2, 3)))
    H = G.reorder([(1, 0), (0, 1)])
    p = ConfigPoint((0.3 + 1.1j, -0.4 + 0.7j), (-1.0, 0.5))
    assert omega_density(H, p) == pytest.approx(-omega_density(G, p))


def test_wrong_edge_count_is_exactly_zero():
    est = mc_weight(AdmissibleGraph(1, 2, ((1,),)), SMALL, 7)
    assert est.mean == 0 and est.stderr == 0


def test_determinism():
    G = named_graph("lean-left")
    a = mc_weight(G, SMALL, 3)
    b = mc_weight(G, SMALL, 3)
    assert (a.mean, a.stderr) == (b.mean, b.stderr)
    assert mc_weight(G, SMALL, 4).mean != a.mean


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_fans_in_air_gauge(k):
    est = mc_weight(named_graph(f"fan{k}"), SMALL, 1)
    assert est.mean == pytest.approx(1 / math.factorial(k), abs=1e-9 + 5 * est.stderr)


@pytest.mark.parametrize("name,exact", [("wedge", 0.5), ("fan3", 1 / 6)])
def test_ground_gauge_pin_independence(name, exact):
    G = named_graph(name)
    a = mc_weight(G, 2 ** 18, 5, gauge="ground", pins=(0.0, 1.0))
    b = mc_weight(G, 2 ** 18, 5, gauge="ground", pins=(0.0, 2.0))
    assert abs(a.mean - b.mean) <= 3 * math.hypot(a.stderr, b.stderr) + 1e-12
    assert abs(a.mean - exact) <= 4 * a.stderr + 1e-12


@pytest.mark.parametrize("name,exact", [("double-wedge", 0.25), ("lean-left", -1 / 12), ("lean-right", 1 / 12),
                                        ("loop", -1 / 24)])
def test_order_two_shapes(name, exact):
    est = mc_weight(named_graph(name), 2 ** 18, 11)
    assert abs(est.mean - exact) <= 4 * est.stderr


def test_air_and_ground_gauges_agree():
    G = named_graph("lean-left")
    a = mc_weight(G, 2 ** 18, 2, gauge="air")
    b = mc_weight(G, 2 ** 18, 2, gauge="ground")
    assert abs(a.mean - b.mean) <= 4 * math.hypot(a.stderr, b.stderr)


def test_stderr_shrinks_with_samples():
    G = named_graph("lean-right")
    assert mc_weight(G, 2 ** 20, 9).stderr < mc_weight(G, 2 ** 14, 9).stderr


def test_rationalize():
    assert rationalize(0.08331, 1e-4) == Fraction(1, 12)
    assert rationalize(0.5, 0.0) == Fraction(1, 2)
    assert rationalize(math.pi / 10, 1e-9) is None


def test_lemma_and_known_weights():
    assert known_weight(named_graph("wedge")) == Fraction(1, 2)
    assert known_weight(named_graph("fan3")) == Fraction(1, 6)
    assert known_weight(AdmissibleGraph(1, 2, ((2, 1),))) == Fraction(-1, 2)
    assert known_weight(AdmissibleGraph(1, 2, ((1, 1),))) == 0
    assert known_weight(AdmissibleGraph(1, 3, ((1, 2),))) == 0
    assert known_weight(named_graph("double-wedge")) == Fraction(1, 4)
    assert known_weight(named_graph("lean-left"), WeightCache()) is None
    assert lemma_weight(AdmissibleGraph(2, 0, ((1,), (0,))))[1] == "odd-automorphism"


def test_cache_precedence_and_roundtrip(tmp_path):
    key = named_graph("wedge").key()
    cache = WeightCache()
    cache.put(WeightCacheEntry(key, Fraction(1, 2), "exact-lemma", "fan"))
    with pytest.warns(UserWarning):
        msg = cache.put(WeightCacheEntry(key, 0.7, "mc", "rationalized-mc", 1e-3), tolerance=0.05)
    assert msg and cache.get(key).value == Fraction(1, 2)
    assert cache.put(WeightCacheEntry(key, 0.5001, "mc", "rationalized-mc", 1e-3), tolerance=0.05) is None
    assert cache.get(key).provenance == "exact-lemma"
    path = tmp_path / "w.json"
    cache.save(str(path))
    assert WeightCache.load(str(path)).to_json() == cache.to_json()
    with pytest.raises(ValueError):
        WeightCacheEntry(key, Fraction(1, 2), "exact-lemma", None)


def test_lemma_entries_cover_fans():
    keys = {e.key: e.value for e in lemma_entries(4)}
    for k in range(1, 5):
        assert keys[named_graph(f"fan{k}").key()] == Fraction(1, math.factorial(k))


def test_packaged_cache_has_order_two_weights():
    cache = WeightCache.load(packaged_cache_path())
    left = cache.get(named_graph("lean-left").key())
    assert left.value == Fraction(-1, 12) and left.provenance == "associativity-solve"


def test_weight_source_modes():
    lean = named_graph("lean-left")
    with pytest.raises(MissingWeightError):
        WeightSource("cache", cache=WeightCache()).weight(lean)
    hybrid = WeightSource("hybrid", samples=SMALL, seed=1, cache=WeightCache())
    assert abs(hybrid.weight(lean) + 1 / 12) < 0.01
    assert WeightSource("cache", cache=WeightCache()).weight(named_graph("wedge")) == Fraction(1, 2)
    mc = WeightSource("mc", samples=SMALL, seed=1)
    assert isinstance(mc.weight(named_graph("wedge")), float)
    with pytest.raises(ValueError):
        WeightSource("bogus")
