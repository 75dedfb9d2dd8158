"""Graph weights: hyperbolic angle forms integrated over configuration space.

``mc_weight`` returns the weight of a star-ordering class,
``(2 pi)^{-E} * integral of the wedge of edge-angle differentials``, with
edges ordered by source vertex and star position.  Fans evaluate to
``1/nbar!``.  Two gauge-fixed charts of the configuration space are offered:

* ``"air"`` (default): the first air vertex sits at ``i``; all ground
  vertices are free reals (sorted Cauchy draws), the other air vertices free.
  Coordinates ``(x_1, y_1, ..., x_{n-1}, y_{n-1}, t_0, ..., t_{nbar-1})``.
* ``"ground"`` (``nbar >= 2``): the first and last ground vertices are pinned
  at ``pins``; the middle ones are sorted uniforms in between, all air
  vertices free.  Coordinates ``(x_0, y_0, ..., t_1, ..., t_{nbar-2})``
  with the extra orientation sign ``(-1)^{nbar-2}``.

Free air vertices are drawn from a mixture density with ``1/r`` components
centred on every ground vertex and every earlier air vertex plus a heavy
``1/r^3`` tail, which keeps the ratio integrand/density bounded near
collisions and at infinity.
"""
from __future__ import annotations

import itertools
import json
import logging
import math
import os
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from typing import Optional, Union

import numpy as np
from scipy.stats import qmc

from .graphs import AdmissibleGraph, enumerate_graphs

log = logging.getLogger(__name__)

CUTOFF = 1e-12
Number = Union[Fraction, float]

EXACT_PROVENANCES = ("exact-lemma", "associativity-solve")
PROVENANCES = EXACT_PROVENANCES + ("mc",)


# ---------------------------------------------------------------------------
# angle map
# ---------------------------------------------------------------------------

def angle(z1: complex, z2: complex) -> float:
    """``arg((z2 - z1) / (z2 - conj(z1)))`` in ``[0, 2 pi)``."""
    z1, z2 = complex(z1), complex(z2)
    if z1.imag <= 0:
        raise ValueError("first point must lie in the open upper half plane")
    if z2.imag < 0:
        raise ValueError("second point must lie in the closed upper half plane")
    if abs(z2 - z1) < CUTOFF:
        raise ValueError("coincident points")
    a = math.atan2(((z2 - z1) / (z2 - z1.conjugate())).imag, ((z2 - z1) / (z2 - z1.conjugate())).real)
    return a % (2 * math.pi)


def angle_gradient(z1, z2):
    """Partials of the angle w.r.t. ``(x1, y1, x2, y2)``; works on numpy arrays."""
    a = 1.0 / (z2 - z1)
    b = 1.0 / (z2 - np.conj(z1))
    return (
        np.imag(-a) - np.imag(-b),
        np.imag(-1j * a) - np.imag(1j * b),
        np.imag(a) - np.imag(b),
        np.imag(1j * a) - np.imag(1j * b),
    )


# ---------------------------------------------------------------------------
# configurations and the omega density
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConfigPoint:
    air: tuple
    ground: tuple

    def __post_init__(self):
        object.__setattr__(self, "air", tuple(complex(z) for z in self.air))
        object.__setattr__(self, "ground", tuple(float(t) for t in self.ground))
        if any(z.imag <= 0 for z in self.air):
            raise ValueError("air points must have positive imaginary part")
        if any(b <= a for a, b in zip(self.ground, self.ground[1:])):
            raise ValueError("ground points must be strictly ascending")
        pts = list(self.air) + [complex(t) for t in self.ground]
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                if abs(pts[i] - pts[j]) < CUTOFF:
                    raise ValueError("configuration points coincide")


def orientation_sign(nbar: int, gauge: str = "air") -> int:
    if gauge == "ground" and nbar >= 2 and (nbar - 2) % 2:
        return -1
    return 1


def free_dimension(n: int, nbar: int) -> int:
    return 2 * n + nbar - 2


GAUGES = ("air", "ground")


def _coordinate_map(n: int, nbar: int, gauge: str):
    """Vertex -> (coordinate kind, free columns) for a gauge-fixed chart."""

    def air_chart(p):
        if p == 0:
            return "fixed", ()
        if p < n:
            return "xy", (2 * p - 2, 2 * p - 1)
        return "real", (2 * n - 2 + p - n,)

    def ground_chart(p):
        if p < n:
            return "xy", (2 * p, 2 * p + 1)
        g = p - n
        if 1 <= g <= nbar - 2:
            return "real", (2 * n + g - 1,)
        return "fixed", ()

    return air_chart if gauge == "air" else ground_chart


def _check_gauge(n: int, nbar: int, gauge: str) -> None:
    if gauge not in GAUGES:
        raise ValueError(f"unknown gauge {gauge!r}")
    if gauge == "air" and n < 1:
        raise ValueError("the air gauge needs at least one air vertex")
    if gauge == "ground" and nbar < 2:
        raise ValueError("the ground gauge needs at least two ground vertices")


def _gradient_rows(G: AdmissibleGraph, pts: list, D: int, coord_of, batch: int) -> np.ndarray:
    """``(batch, E, D)`` matrix of edge-angle partials with respect to the free coordinates."""
    rows = np.zeros((batch, G.edge_count, D))
    for e, (v, t) in enumerate(G.edges()):
        d1x, d1y, d2x, d2y = angle_gradient(pts[v], pts[t])
        for p, gx, gy in ((v, d1x, d1y), (t, d2x, d2y)):
            kind, cols = coord_of(p)
            if kind == "xy":
                rows[:, e, cols[0]] += gx
                rows[:, e, cols[1]] += gy
            elif kind == "real":
                rows[:, e, cols[0]] += gx
    return rows


def omega_density(G: AdmissibleGraph, p: ConfigPoint, gauge: str = "air") -> float:
    """Determinant of the edge-angle partials at ``p`` in the chart's free coordinates.

    The pinned points of the chosen gauge are read from ``p`` and held
    fixed.  Neither the orientation sign nor any Jacobian is included.
    """
    n, nbar = G.n, G.nbar
    _check_gauge(n, nbar, gauge)
    if len(p.air) != n or len(p.ground) != nbar:
        raise ValueError("configuration does not match the graph")
    D = free_dimension(n, nbar)
    if G.edge_count != D:
        raise ValueError(f"graph has {G.edge_count} edges but the configuration space has dimension {D}")
    if G.has_parallel_edges():
        return 0.0
    if D == 0:
        return 1.0
    pts = [np.array([z]) for z in p.air] + [np.array([complex(t)]) for t in p.ground]
    rows = _gradient_rows(G, pts, D, _coordinate_map(n, nbar, gauge), 1)
    return float(np.linalg.det(rows)[0])


# ---------------------------------------------------------------------------
# Monte Carlo integration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WeightEstimate:
    mean: float
    stderr: float
    samples: int
    seed: int

    def __str__(self) -> str:
        return f"{self.mean:.4f} ± {self.stderr:.2g}"


# mixture weights: global Cayley chart, far tail, local components share the rest
_GLOBAL, _FAR = 0.3, 0.1


def _sample_air(u_sel, u_r, u_t, centers, far_center):
    """Draw one air point per row from the mixture; return ``(z, density)``.

    ``centers`` holds ``(c, radius, is_ground)`` triples of arrays; a ground
    centre spreads over a half disk, an air centre over the disk of radius
    ``Im c`` around it.
    """
    k = len(centers)
    local = (1.0 - _GLOBAL - _FAR) / k if k else 0.0
    w = np.sqrt(u_r) * np.exp(2j * np.pi * u_t)
    z = 1j * (1 + w) / (1 - w)
    far = far_center + np.exp(1j * np.pi * u_t) / np.maximum(u_r, 1e-300) ** 2
    z = np.where((u_sel >= _GLOBAL) & (u_sel < _GLOBAL + _FAR), far, z)
    lo = _GLOBAL + _FAR
    for c, radius, is_ground in centers:
        if is_ground:
            zc = c + radius * u_r * np.exp(1j * np.pi * u_t)
        else:
            zc = c + c.imag * u_r * np.exp(2j * np.pi * u_t)
        z = np.where((u_sel >= lo) & (u_sel < lo + local), zc, z)
        lo += local
    q = _GLOBAL * 4.0 / (np.pi * np.abs(z + 1j) ** 4)
    r = np.abs(z - far_center)
    q = q + _FAR * np.where(r > 1, 1.0 / (2 * np.pi * np.maximum(r, 1.0) ** 2.5), 0.0)
    for c, radius, is_ground in centers:
        r = np.maximum(np.abs(z - c), 1e-300)
        if is_ground:
            radius = np.maximum(radius, 1e-300)
            q = q + local * np.where(r < radius, 1.0 / (np.pi * radius * r), 0.0)
        else:
            q = q + local * np.where(r < c.imag, 1.0 / (2 * np.pi * c.imag * r), 0.0)
    return z, q


def _ground_centers(grounds: list, scales: list) -> list:
    """Two local components per ground vertex: its own scale and the gap to its nearest neighbour."""
    out = [(g, sc, True) for g, sc in zip(grounds, scales)]
    for i, (g, sc) in enumerate(zip(grounds, scales)):
        gap = sc
        for j, h in enumerate(grounds):
            if i != j:
                gap = np.minimum(gap, np.abs(g - h))
        out.append((g, gap, True))
    return out


_CAUCHY = 0.7      # share of the Cauchy law inside the base ground law
_BASE = 0.75       # share of the base law for the second and later grounds
_CLUSTER_POWER = 3  # gap = scale * u^p concentrates new grounds next to old ones


def _base_draw(u: np.ndarray) -> np.ndarray:
    """Mixture of a Cauchy law and a ``|t|^{-3/2}`` tail, by splitting the uniform."""
    a = np.minimum(u / _CAUCHY, 1.0)
    cauchy = np.tan(np.pi * (a - 0.5))
    b = np.clip((u - _CAUCHY) / (1 - _CAUCHY), 0.0, 1.0)
    side = np.where(b < 0.5, -1.0, 1.0)
    v = np.maximum(np.abs(2 * b - 1), 1e-300)
    heavy = side * (v ** -2 - 1)
    return np.where(u < _CAUCHY, cauchy, heavy)


def _base_density(t: np.ndarray) -> np.ndarray:
    return _CAUCHY / (np.pi * (1 + t ** 2)) + (1 - _CAUCHY) * 0.25 * (1 + np.abs(t)) ** -1.5


def _cluster_density(x: np.ndarray, scale: np.ndarray) -> np.ndarray:
    """Density of ``+-scale * u^p`` at offset ``x``."""
    r = np.maximum(np.abs(x) / scale, 1e-300)
    p = _CLUSTER_POWER
    return np.where(r < 1, r ** (1.0 / p - 1) / (2 * p * scale), 0.0)


def _conditional_density(t: np.ndarray, previous: list) -> np.ndarray:
    if not previous:
        return _base_density(t)
    share = (1 - _BASE) / len(previous)
    q = _BASE * _base_density(t)
    for tj in previous:
        q = q + share * _cluster_density(t - tj, np.abs(tj - 1j))
    return q


def _draw_grounds(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sorted ground positions and their density as an unordered set.

    Grounds are drawn one after another; each later ground either follows
    the base law or lands close to an earlier one.  The set density sums the
    sequential density over all orderings.
    """
    N, m = u.shape
    ts: list[np.ndarray] = []
    for k in range(m):
        uk = u[:, k]
        t = _base_draw(np.minimum(uk / (_BASE if k else 1.0), 1.0))
        if k:
            share = (1 - _BASE) / k
            for j, tj in enumerate(ts):
                lo = _BASE + j * share
                w = np.clip((uk - lo) / share, 0.0, 1.0)
                side = np.where(w < 0.5, -1.0, 1.0)
                gap = np.abs(tj - 1j) * np.abs(2 * w - 1) ** _CLUSTER_POWER
                t = np.where((uk >= lo) & (uk < lo + share), tj + side * gap, t)
        ts.append(t)
    q = np.zeros(N)
    for order in itertools.permutations(range(m)):
        qs = np.ones(N)
        for k, idx in enumerate(order):
            qs = qs * _conditional_density(ts[idx], [ts[j] for j in order[:k]])
        q = q + qs
    t = np.sort(np.stack(ts, axis=1), axis=1) if m else np.zeros((N, 0))
    return t, q


def sample_dimension(n: int, nbar: int, gauge: str = "air") -> int:
    """Number of uniforms consumed per sample."""
    return 3 * (n - 1) + nbar if gauge == "air" else 3 * n + nbar - 2


def _integrand(G: AdmissibleGraph, u: np.ndarray, gauge: str, pins: tuple[float, float]) -> np.ndarray:
    """Integrand on the unit cube: ``(2 pi)^{-E} det / density`` with the orientation sign."""
    n, nbar = G.n, G.nbar
    D = free_dimension(n, nbar)
    N = u.shape[0]
    if gauge == "air":
        t, qg = _draw_grounds(u[:, 3 * (n - 1):3 * (n - 1) + nbar])
        grounds = [t[:, i] + 0j for i in range(nbar)]
        jac = 1.0 / qg
        airs = [np.full(N, 1j)]
        scales = [np.abs(g - 1j) for g in grounds]
        first, col, far_center = 1, 0, 0.0
    else:
        lo, hi = pins
        m = nbar - 2
        free = np.sort(u[:, 3 * n:3 * n + m], axis=1) * (hi - lo) + lo
        grounds = [np.full(N, complex(lo))] + [free[:, i] + 0j for i in range(m)] + [np.full(N, complex(hi))]
        jac = np.full(N, (hi - lo) ** m / math.factorial(m))
        airs = []
        scales = [np.full(N, hi - lo) for _ in grounds]
        first, col, far_center = 0, 0, (lo + hi) / 2
    ok = np.ones(N, dtype=bool)
    gcenters = _ground_centers(grounds, scales)
    for _ in range(first, n):
        centers = gcenters + [(a, None, False) for a in airs]
        z, q = _sample_air(u[:, col], u[:, col + 1], u[:, col + 2], centers, far_center)
        inside = z.imag > 0
        ok &= inside
        airs.append(np.where(inside, z, 1j))
        jac = jac / q
        col += 3
    pts = airs + grounds
    rows = _gradient_rows(G, pts, D, _coordinate_map(n, nbar, gauge), N)
    with np.errstate(all="ignore"):
        val = np.linalg.det(rows) * jac / (2 * np.pi) ** D * orientation_sign(nbar, gauge)
        mind = np.full(N, np.inf)
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                mind = np.minimum(mind, np.abs(pts[i] - pts[j]))
    val[~ok | ~np.isfinite(val) | (mind < CUTOFF)] = 0.0
    return val


def mc_weight(G: AdmissibleGraph, samples: int = 10**6, seed: int = 42, *,
              gauge: str = "air", pins: tuple[float, float] = (0.0, 1.0),
              replicates: int = 16, batch: int = 1 << 16) -> WeightEstimate:
    """Randomized quasi-Monte Carlo estimate of the class weight of ``G``.

    ``replicates`` independently scrambled Sobol sequences (seeded from
    ``(seed, replicate)``) of ``2^k >= samples / replicates`` points each;
    the reported standard error is the spread of the replicate means.
    """
    D = free_dimension(G.n, G.nbar)
    if G.edge_count != D or G.has_parallel_edges():
        return WeightEstimate(0.0, 0.0, 0, seed)
    _check_gauge(G.n, G.nbar, gauge)
    if D == 0:
        return WeightEstimate(1.0, 0.0, 1, seed)
    dims = sample_dimension(G.n, G.nbar, gauge)
    per = max(2, -(-samples // replicates))
    k = math.ceil(math.log2(per))
    means = []
    for r in range(replicates):
        rng = np.random.default_rng(np.random.SeedSequence([seed, r]))
        u = qmc.Sobol(dims, scramble=True, seed=rng).random_base2(k)
        total = 0.0
        with np.errstate(all="ignore"):
            for s in range(0, u.shape[0], batch):
                total += float(_integrand(G, u[s:s + batch], gauge, pins).sum())
        means.append(total / u.shape[0])
    arr = np.array(means)
    stderr = float(arr.std(ddof=1) / math.sqrt(replicates)) if replicates > 1 else float("nan")
    return WeightEstimate(float(arr.mean()), stderr, replicates * (1 << k), seed)


def rationalize(mean: float, stderr: float, nsigma: float = 3.0, max_den: int = 1000) -> Optional[Fraction]:
    """Smallest-denominator fraction within ``nsigma * stderr`` of ``mean``."""
    tol = nsigma * stderr
    for q in range(1, max_den + 1):
        p = round(mean * q)
        if abs(p / q - mean) <= tol:
            return Fraction(p, q)
    return None


# ---------------------------------------------------------------------------
# exact values
# ---------------------------------------------------------------------------

def lemma_weight(G: AdmissibleGraph) -> Optional[tuple[Fraction, str]]:
    """Weight fixed by a structural argument, with a short tag naming it."""
    if G.edge_count != G.expected_edge_count:
        return Fraction(0), "edge-count"
    if G.has_parallel_edges():
        return Fraction(0), "parallel-edges"
    sign, srt = G.sorted_stars()
    if G.is_fan():
        return Fraction(sign, math.factorial(G.nbar)), "fan"
    grounds = tuple(range(G.n, G.n + G.nbar))
    if G.nbar == 2 and all(s == grounds for s in srt.stars):
        # the integral factorizes into one wedge per air vertex
        return Fraction(sign, 2 ** G.n), "product-of-wedges"
    if G.n > 1 and G.orbit_representative()[0] == 0:
        return Fraction(0), "odd-automorphism"
    return None


@dataclass
class WeightCacheEntry:
    key: str
    value: Number
    provenance: str
    tag: str = ""
    stderr: Optional[float] = None

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if self.provenance in EXACT_PROVENANCES and not self.tag:
            raise ValueError("exact entries need a tag")

    @property
    def exact(self) -> bool:
        return self.provenance in EXACT_PROVENANCES

    def to_json(self) -> dict:
        v = self.value
        out = {"key": self.key,
               "value": str(v) if isinstance(v, Fraction) else float(v),
               "provenance": self.provenance}
        if self.tag:
            out["tag"] = self.tag
        if self.stderr is not None:
            out["stderr"] = self.stderr
        return out

    @classmethod
    def from_json(cls, d: dict) -> "WeightCacheEntry":
        v = d["value"]
        value = Fraction(v) if isinstance(v, str) else float(v)
        return cls(d["key"], value, d["provenance"], d.get("tag", ""), d.get("stderr"))


class ProvenanceDowngrade(ValueError):
    pass


@dataclass
class WeightCache:
    entries: dict[str, WeightCacheEntry] = field(default_factory=dict)

    def get(self, key: str) -> Optional[WeightCacheEntry]:
        return self.entries.get(key)

    def __contains__(self, key: str) -> bool:
        return key in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def put(self, entry: WeightCacheEntry, tolerance: float = 0.0) -> Optional[str]:
        """Insert ``entry``; exact entries are never replaced by MC ones.

        Returns a warning message when an MC value disagrees with an exact
        entry by more than ``tolerance`` (the exact value is kept).
        """
        old = self.entries.get(entry.key)
        if old is not None and old.exact and not entry.exact:
            if abs(float(old.value) - float(entry.value)) > tolerance:
                msg = (f"MC value {float(entry.value):.6g} for {entry.key} conflicts with exact "
                       f"{old.value}; keeping the exact entry")
                warnings.warn(msg)
                return msg
            return None
        self.entries[entry.key] = entry
        return None

    def to_json(self) -> list[dict]:
        return [self.entries[k].to_json() for k in sorted(self.entries)]

    @classmethod
    def from_json(cls, data: list[dict]) -> "WeightCache":
        c = cls()
        for d in data:
            e = WeightCacheEntry.from_json(d)
            c.entries[e.key] = e
        return c

    @classmethod
    def load(cls, path: str) -> "WeightCache":
        if not os.path.exists(path):
            return cls()
        with open(path) as fh:
            text = fh.read()
        return cls.from_json(json.loads(text)) if text.strip() else cls()

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)
            fh.write("\n")


def packaged_cache_path() -> str:
    return str(resources.files("stardq") / "data" / "weights.json")


def default_cache_path() -> str:
    return os.environ.get("STARDQ_CACHE") or packaged_cache_path()


def known_weight(G: AdmissibleGraph, cache: Optional[WeightCache] = None) -> Optional[Number]:
    """Exact weight from a lemma or from the cache, else ``None``."""
    lw = lemma_weight(G)
    if lw is not None:
        return lw[0]
    if cache is not None:
        sign, _ = G.sorted_stars()
        e = cache.get(G.key())
        if e is not None:
            return e.value * sign
    return None


def lemma_entries(max_nbar: int = 4) -> list[WeightCacheEntry]:
    """Fan entries ``1/nbar!`` and the order-2 product-of-wedges entry."""
    out = []
    for nbar in range(0, max_nbar + 1):
        G = AdmissibleGraph(1, nbar, (tuple(range(1, nbar + 1)),))
        out.append(WeightCacheEntry(G.key(), Fraction(1, math.factorial(nbar)), "exact-lemma", "fan"))
    for G in enumerate_graphs(2, 2, 4, (2, 2)):
        lw = lemma_weight(G)
        if lw is not None:
            out.append(WeightCacheEntry(G.key(), lw[0], "exact-lemma", lw[1]))
    return out


class MissingWeightError(KeyError):
    pass


@dataclass
class WeightSource:
    """Where graph weights come from.

    ``mc``: structural zeros are exact, everything else is sampled.
    ``cache``: lemmas and cache entries only; missing entries raise.
    ``hybrid``: lemmas, then cache, then sampling.
    """

    mode: str = "hybrid"
    samples: int = 10**6
    seed: int = 42
    tolerance: float = 0.05
    cache: Optional[WeightCache] = None
    gauge: str = "air"
    _memo: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.mode not in ("mc", "cache", "hybrid"):
            raise ValueError(f"unknown weight mode {self.mode!r}")

    def estimate(self, G: AdmissibleGraph) -> WeightEstimate:
        """MC estimate, shared by all graphs in one relabeling orbit."""
        sign, rep = G.orbit_representative()
        key = rep.key()
        if key not in self._memo:
            log.info("sampling weight of %s with %d samples", key, self.samples)
            self._memo[key] = mc_weight(rep, self.samples, self.seed, gauge=self.gauge)
        est = self._memo[key]
        return WeightEstimate(sign * est.mean, est.stderr, est.samples, est.seed)

    def weight(self, G: AdmissibleGraph) -> Number:
        lw = lemma_weight(G)
        if self.mode == "mc":
            if lw is not None and lw[0] == 0:
                return lw[0]
            return self.estimate(G).mean
        if lw is not None:
            return lw[0]
        kw = known_weight(G, self.cache)
        if kw is not None:
            return kw
        if self.mode == "cache":
            raise MissingWeightError(f"no cached weight for graph {G.key()}")
        return self.estimate(G).mean
