"""Admissible graphs and the multidifferential operators they encode.

Vertices ``0..n-1`` are air (type I) vertices, ``n..n+nbar-1`` are ground
(type II) vertices.  ``stars[v]`` is the ordered tuple of targets of the
edges leaving air vertex ``v``; edges are ordered by source vertex, then by
position inside the star.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Iterable, Sequence

from .multidiff import MultiDiffOp
from .multivector import MultiVectorField, sort_sign
from .poly import Poly


@dataclass(frozen=True)
class AdmissibleGraph:
    n: int
    nbar: int
    stars: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        stars = tuple(tuple(int(t) for t in s) for s in self.stars)
        object.__setattr__(self, "stars", stars)
        if self.n < 0 or self.nbar < 0:
            raise ValueError("vertex counts must be non-negative")
        if 2 * self.n + self.nbar - 2 < 0:
            raise ValueError("need 2n + nbar - 2 >= 0")
        if len(stars) != self.n:
            raise ValueError(f"expected {self.n} stars, got {len(stars)}")
        total = self.n + self.nbar
        for v, s in enumerate(stars):
            for t in s:
                if not 0 <= t < total:
                    raise ValueError(f"target {t} out of range")
                if t == v:
                    raise ValueError(f"small loop at vertex {v}")

    # -- basic data -------------------------------------------------------
    @property
    def edge_count(self) -> int:
        return sum(len(s) for s in self.stars)

    @property
    def expected_edge_count(self) -> int:
        return 2 * self.n + self.nbar - 2

    def edges(self) -> list[tuple[int, int]]:
        return [(v, t) for v, s in enumerate(self.stars) for t in s]

    def star_sizes(self) -> tuple[int, ...]:
        return tuple(len(s) for s in self.stars)

    def has_parallel_edges(self) -> bool:
        return any(len(set(s)) != len(s) for s in self.stars)

    def is_connected(self) -> bool:
        total = self.n + self.nbar
        if total == 0:
            return False
        parent = list(range(total))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for v, t in self.edges():
            parent[find(v)] = find(t)
        return len({find(a) for a in range(total)}) == 1

    def is_fan(self) -> bool:
        """Single air vertex with an edge to every ground vertex."""
        return self.n == 1 and sorted(self.stars[0]) == list(range(1, 1 + self.nbar))

    def is_ground(self, t: int) -> bool:
        return t >= self.n

    def incoming(self, t: int) -> int:
        return sum(s.count(t) for s in self.stars)

    # -- canonical forms --------------------------------------------------
    def sorted_stars(self) -> tuple[int, "AdmissibleGraph"]:
        """``(sign, G')`` with every star sorted; ``sign`` is the product of sorting signatures (0 on parallel edges)."""
        sign = 1
        stars = []
        for s in self.stars:
            sg, srt = sort_sign(s)
            if sg == 0:
                sg = 1  # parallel edges: keep the order-independent representative
            sign *= sg
            stars.append(tuple(sorted(s)))
        return sign, AdmissibleGraph(self.n, self.nbar, tuple(stars))

    def reorder(self, perms: Sequence[Sequence[int]]) -> "AdmissibleGraph":
        """Reorder each star: new star ``v`` is ``[stars[v][p] for p in perms[v]]``."""
        if len(perms) != self.n:
            raise ValueError("need one permutation per star")
        stars = []
        for s, p in zip(self.stars, perms):
            if sorted(p) != list(range(len(s))):
                raise ValueError("not a permutation of the star")
            stars.append(tuple(s[i] for i in p))
        return AdmissibleGraph(self.n, self.nbar, tuple(stars))

    def relabel(self, perm: Sequence[int]) -> "AdmissibleGraph":
        """Rename air vertex ``v`` to ``perm[v]``; star contents keep their order."""
        if sorted(perm) != list(range(self.n)):
            raise ValueError("not a permutation of the air vertices")
        mp = list(perm) + list(range(self.n, self.n + self.nbar))
        stars = [()] * self.n
        for v, s in enumerate(self.stars):
            stars[perm[v]] = tuple(mp[t] for t in s)
        return AdmissibleGraph(self.n, self.nbar, tuple(stars))

    def reflect(self) -> "AdmissibleGraph":
        """Mirror image under ``z -> -conj(z)``: ground vertices are listed in reverse."""
        mp = list(range(self.n)) + [self.n + self.nbar - 1 - g for g in range(self.nbar)]
        return AdmissibleGraph(self.n, self.nbar, tuple(tuple(mp[t] for t in s) for s in self.stars))

    def orbit_representative(self) -> tuple[int, "AdmissibleGraph"]:
        """Canonical representative under air relabeling and star sorting.

        Returns ``(sign, R)`` such that ``weight(self) = sign * weight(R)``:
        relabeling permutes (x, y) coordinate pairs and whole stars, which
        preserves orientation only when the moved stars have even size, so the
        sign tracks both effects.  The sign is 0 when some relabeling maps the
        graph to itself with an odd total sign: its weight then vanishes.
        """
        reached: dict[str, tuple[int, AdmissibleGraph]] = {}
        odd = False
        for perm in itertools.permutations(range(self.n)):
            g = self.relabel(perm)
            s, srt = g.sorted_stars()
            s *= _block_permutation_sign(self.star_sizes(), perm)
            key = graph_key(srt)
            if key in reached and reached[key][0] != s:
                odd = True
            reached.setdefault(key, (s, srt))
        key = min(reached)
        s, rep = reached[key]
        return (0 if odd else s), rep

    # -- serialization ----------------------------------------------------
    def to_json(self) -> dict:
        return {"n": self.n, "nbar": self.nbar, "stars": [list(s) for s in self.stars]}

    @classmethod
    def from_json(cls, data: dict) -> "AdmissibleGraph":
        return cls(int(data["n"]), int(data["nbar"]), tuple(tuple(s) for s in data["stars"]))

    def key(self) -> str:
        return graph_key(self)


def _block_permutation_sign(sizes: Sequence[int], perm: Sequence[int]) -> int:
    """Sign of the edge-order permutation when star blocks move from ``v`` to ``perm[v]``."""
    order = sorted(range(len(perm)), key=lambda v: perm[v])  # old labels in new order
    seq = []
    offsets = list(itertools.accumulate([0] + list(sizes)))
    for v in order:
        seq.extend(range(offsets[v], offsets[v] + sizes[v]))
    sign, _ = sort_sign(seq)
    return sign


def graph_key(G: AdmissibleGraph) -> str:
    """Whitespace-free JSON with each star sorted ascending."""
    data = {"n": G.n, "nbar": G.nbar, "stars": [sorted(s) for s in G.stars]}
    return json.dumps(data, separators=(",", ":"))


def permutation_sign(G: AdmissibleGraph, star_reordering: Sequence[Sequence[int]]) -> int:
    """Product of the signatures of the per-star reorderings."""
    if len(star_reordering) != G.n:
        raise ValueError("need one permutation per star")
    sign = 1
    for s, p in zip(G.stars, star_reordering):
        if sorted(p) != list(range(len(s))):
            raise ValueError("not a permutation of the star")
        sg, _ = sort_sign(p)
        sign *= sg
    return sign


def _compositions(total: int, parts: int, max_part: int):
    if parts == 0:
        if total == 0:
            yield ()
        return
    for first in range(min(total, max_part) + 1):
        for rest in _compositions(total - first, parts - 1, max_part):
            yield (first,) + rest


def enumerate_graphs(n: int, nbar: int, edge_count: int | None = None,
                     star_sizes: Sequence[int] | None = None) -> list[AdmissibleGraph]:
    """All connected admissible graphs without parallel edges, stars sorted ascending.

    ``edge_count`` defaults to ``2n + nbar - 2``; ``star_sizes`` optionally
    fixes the out-degree of every air vertex.  Output is in lexicographic
    order of the star tuples.
    """
    if n < 0 or nbar < 0 or 2 * n + nbar - 2 < 0:
        return []
    if edge_count is None:
        edge_count = 2 * n + nbar - 2
    total = n + nbar
    if star_sizes is not None:
        if len(star_sizes) != n or sum(star_sizes) != edge_count:
            return []
        size_choices = [tuple(star_sizes)]
    else:
        size_choices = list(_compositions(edge_count, n, total - 1))
    out = []
    for sizes in size_choices:
        options = [list(itertools.combinations([t for t in range(total) if t != v], k))
                   for v, k in enumerate(sizes)]
        for stars in itertools.product(*options):
            G = AdmissibleGraph(n, nbar, tuple(stars))
            if G.is_connected():
                out.append(G)
    out.sort(key=lambda G: G.stars)
    return out


def assemble_operator(G: AdmissibleGraph, xs: Sequence[MultiVectorField]) -> MultiDiffOp:
    """``B_Gamma(xs)``: arity ``nbar`` operator.

    Air vertex ``v`` carries the skew tensor of ``xs[v]`` with one index per
    outgoing edge; every edge ``(v, t)`` with index ``i`` differentiates the
    target (a tensor coefficient or a ground argument) by ``d_i``.  All index
    assignments are summed.
    """
    if len(xs) != G.n:
        raise ValueError(f"graph has {G.n} air vertices, got {len(xs)} fields")
    if G.n == 0:
        raise ValueError("graph has no air vertices")
    dim = xs[0].dim
    for v, X in enumerate(xs):
        if X.dim != dim:
            raise ValueError("dimension mismatch among fields")
        if X.grade != len(G.stars[v]):
            raise ValueError(f"vertex {v} has {len(G.stars[v])} edges but field of grade {X.grade}")
    edges = G.edges()
    E = len(edges)
    acc: dict[tuple, Poly] = {}
    cache: dict[tuple, Poly] = {}
    starts = list(itertools.accumulate([0] + [len(s) for s in G.stars]))
    for idx in itertools.product(range(1, dim + 1), repeat=E):
        incoming: list[list[int]] = [[] for _ in range(G.n + G.nbar)]
        for (v, t), i in zip(edges, idx):
            incoming[t].append(i)
        coeff = None
        for v in range(G.n):
            comp = idx[starts[v]:starts[v + 1]]
            K = tuple(sorted(incoming[v]))
            ck = (v, comp, K)
            c = cache.get(ck)
            if c is None:
                c = cache[ck] = xs[v].tensor(comp).apply_multiindex(K)
            if c.is_zero():
                coeff = None
                break
            coeff = c if coeff is None else coeff * c
        if coeff is None:
            continue
        key = tuple(tuple(sorted(incoming[G.n + g])) for g in range(G.nbar))
        acc[key] = acc[key] + coeff if key in acc else coeff
    return MultiDiffOp(dim, G.nbar, acc)


def labeled_graphs(n: int, nbar: int, star_sizes: Sequence[int]) -> list[AdmissibleGraph]:
    """Graphs entering ``U_n`` for fields of the given grades (air vertex ``v`` gets grade ``star_sizes[v]``)."""
    return enumerate_graphs(n, nbar, sum(star_sizes), star_sizes)


def load_graph(path: str) -> AdmissibleGraph:
    with open(path) as fh:
        return AdmissibleGraph.from_json(json.load(fh))


def named_graph(name: str) -> AdmissibleGraph:
    """Small catalogue: ``wedge``, ``fan<k>``, and the order-2 shapes used in the examples."""
    catalogue = {
        "wedge": AdmissibleGraph(1, 2, ((1, 2),)),
        "double-wedge": AdmissibleGraph(2, 2, ((2, 3), (2, 3))),
        "lean-left": AdmissibleGraph(2, 2, ((1, 2), (2, 3))),
        "lean-right": AdmissibleGraph(2, 2, ((1, 3), (2, 3))),
        "loop": AdmissibleGraph(2, 2, ((1, 2), (0, 3))),
    }
    if name in catalogue:
        return catalogue[name]
    if name.startswith("fan") and name[3:].isdigit():
        k = int(name[3:])
        return AdmissibleGraph(1, k, (tuple(range(1, k + 1)),))
    raise KeyError(f"unknown graph name {name!r}")


def graphs_from_iterable(items: Iterable[dict]) -> list[AdmissibleGraph]:
    return [AdmissibleGraph.from_json(d) for d in items]
