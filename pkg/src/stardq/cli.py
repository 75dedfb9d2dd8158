"""Command-line front end (``stardq``).

Exit codes: 0 success (including "residual is zero" checks), 1 failed check,
2 usage or input errors.
"""
from __future__ import annotations

import argparse
import itertools
import json
import logging
import os
import sys

from .graphs import enumerate_graphs, load_graph, named_graph
from .multidiff import GaugeOp, MultiDiffOp, StarProduct, mc_residual
from .multivector import jacobiator, parse_matrix, parse_multivector
from .poly import ParseError, Poly, parse_poly
from .series import EpsSeries
from .star import (NotPoissonError, assoc_residual, formality_residual_op, gauge_transform, moyal,
                   skew_normalize, solve_order2_weights, star_expand)
from .weights import (MissingWeightError, WeightCache, WeightSource, default_cache_path, known_weight,
                      lemma_entries, mc_weight)

log = logging.getLogger("stardq")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _emit(args, text: str, data) -> None:
    if args.format == "json":
        print(json.dumps(data, indent=1, default=str))
    else:
        print(text)


def _cache_path(args) -> str:
    return args.cache or default_cache_path()


def _weights(args) -> WeightSource:
    cache = WeightCache.load(_cache_path(args))
    return WeightSource(args.weights, samples=args.samples, seed=args.seed,
                        tolerance=args.tolerance, cache=cache, gauge=args.gauge)


def _bivector(args):
    if args.dim is None:
        raise UsageError("--dim is required with --pi")
    pi = parse_multivector(args.pi, args.dim)
    if pi.grade != 2:
        raise UsageError("--pi must be a bivector field")
    return pi


def _load_json(path: str):
    with open(path) as fh:
        return json.load(fh)


def _star_from_args(args) -> StarProduct:
    """A star product from --star FILE, --alpha MATRIX or --pi FIELD."""
    if getattr(args, "star", None):
        return StarProduct.from_json(_load_json(args.star))
    if getattr(args, "alpha", None):
        return moyal(parse_matrix(args.alpha), args.order)
    if getattr(args, "pi", None):
        return star_expand(_bivector(args), args.order, _weights(args), force=args.force)
    raise UsageError("give one of --star, --alpha or --pi")


def _poly_arg(text: str, dim: int) -> Poly:
    return parse_poly(text, dim)


def _series_json(s: EpsSeries) -> list[str]:
    return [str(c) for c in s.coeffs]


def _ops_text(S: StarProduct) -> str:
    return "\n".join(f"B{k}(f0,f1) = {B}" for k, B in enumerate(S.bidiff, start=1))


def _monomials(dim: int, max_degree: int):
    for deg in range(max_degree + 1):
        for cut in itertools.combinations_with_replacement(range(dim), deg):
            e = [0] * dim
            for c in cut:
                e[c] += 1
            yield Poly.monomial(e)


def _series_size(s: EpsSeries) -> float:
    return max((c.max_abs_coeff() for c in s.coeffs), default=0.0)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_graphs(args) -> int:
    sizes = tuple(int(x) for x in args.star_sizes.split(",")) if args.star_sizes else None
    graphs = enumerate_graphs(args.n, args.nbar, args.edges, sizes)
    _emit(args, "\n".join(G.key() for G in graphs) + f"\n# {len(graphs)} graphs",
          [G.to_json() for G in graphs])
    return 0


def cmd_weight(args) -> int:
    if args.graph:
        G = load_graph(args.graph) if os.path.exists(args.graph) else named_graph(args.graph)
    elif args.name:
        G = named_graph(args.name)
    else:
        raise UsageError("give --graph FILE or --name NAME")
    est = mc_weight(G, args.samples, args.seed, gauge=args.gauge)
    exact = known_weight(G, WeightCache.load(_cache_path(args)))
    text = str(est) + (f"  (exact {exact})" if exact is not None else "")
    _emit(args, text, {"key": G.key(), "mean": est.mean, "stderr": est.stderr, "samples": est.samples,
                       "seed": est.seed, "exact": None if exact is None else str(exact)})
    return 0


def cmd_weights_solve(args) -> int:
    solved = solve_order2_weights(args.samples, args.seed)
    lines, data, ok = [], [], True
    for s in solved:
        agree = s.agrees()
        ok &= agree or s.provenance == "exact-lemma"
        lines.append(f"{s.representative.key()}  {s.value}  [{s.provenance}]  mc {s.estimate}  "
                     f"{'ok' if agree else 'MISMATCH'}")
        data.append({"key": s.representative.key(), "value": str(s.value), "provenance": s.provenance,
                     "mc_mean": s.estimate.mean, "mc_stderr": s.estimate.stderr, "agrees": agree})
    if args.write:
        path = _cache_path(args)
        cache = WeightCache.load(path)
        for s in solved:
            for e in s.entries():
                cache.put(e, args.tolerance)
        cache.save(path)
        lines.append(f"wrote {path}")
    _emit(args, "\n".join(lines), data)
    return 0 if ok else 1


def cmd_star(args) -> int:
    S = _star_from_args(args)
    if args.f is not None and args.g is not None:
        s = S(_poly_arg(args.f, S.dim), _poly_arg(args.g, S.dim))
        _emit(args, str(s), _series_json(s))
    else:
        _emit(args, _ops_text(S), S.to_json())
    return 0


def cmd_moyal(args) -> int:
    alpha = parse_matrix(args.alpha)
    if args.dim is not None and args.dim != len(alpha):
        raise UsageError("--dim does not match the size of --alpha")
    S = moyal(alpha, args.order)
    if args.f is not None and args.g is not None:
        s = S(_poly_arg(args.f, S.dim), _poly_arg(args.g, S.dim))
        _emit(args, str(s), _series_json(s))
    else:
        _emit(args, _ops_text(S), S.to_json())
    return 0


def cmd_assoc(args) -> int:
    S = _star_from_args(args)
    if args.f is not None:
        if args.g is None or args.h is None:
            raise UsageError("--f needs --g and --h")
        f, g, h = (_poly_arg(x, S.dim) for x in (args.f, args.g, args.h))
        r = assoc_residual(S, f, g, h)
        size = _series_size(r)
        _emit(args, f"residual = {r}", {"residual": _series_json(r), "max_abs": size})
        return 0 if size <= args.tolerance else 1
    if args.operator:
        R = mc_residual(S)
        size = max(op.max_abs_coeff() for op in R.coeffs)
        text = "\n".join(f"order {k}: {op}" for k, op in enumerate(R.coeffs))
        _emit(args, text, {"orders": [op.to_json() for op in R.coeffs], "max_abs": size})
        return 0 if size <= args.tolerance else 1
    worst, count = 0.0, 0
    monos = list(_monomials(S.dim, args.max_degree))
    for f, g, h in itertools.product(monos, repeat=3):
        worst = max(worst, _series_size(assoc_residual(S, f, g, h)))
        count += 1
    _emit(args, f"checked {count} monomial triples; max |residual coefficient| = {worst:g}",
          {"triples": count, "max_abs": worst})
    return 0 if worst <= args.tolerance else 1


def cmd_jacobi(args) -> int:
    pi = _bivector(args)
    J = jacobiator(pi)
    _emit(args, f"jacobiator = {J}", {"jacobiator": str(J), "poisson": J.is_zero()})
    return 0 if J.is_zero() else 1


def cmd_gauge(args) -> int:
    S = _star_from_args(args)
    D = GaugeOp.from_json(_load_json(args.gauge_file))
    if args.inverse:
        D = D.inverse()
    T = gauge_transform(S, D)
    _emit(args, _ops_text(T), T.to_json())
    return 0


def cmd_skew_normalize(args) -> int:
    if args.b1:
        if args.dim is None:
            raise UsageError("--dim is required with --b1")
        B1 = MultiDiffOp.from_json(json.loads(args.b1), args.dim, 2)
        S = StarProduct(args.dim, 1, (B1,))
    else:
        S = _star_from_args(args)
    T, D = skew_normalize(S)
    text = _ops_text(T) + "\n" + "\n".join(f"D{k}(f0) = {op}" for k, op in enumerate(D.diffops, start=1))
    _emit(args, text, {"star": T.to_json(), "gauge": D.to_json()})
    return 0


def cmd_formality(args) -> int:
    if args.dim is None:
        raise UsageError("--dim is required")
    xs = [parse_multivector(args.x, args.dim)]
    if args.y:
        xs.append(parse_multivector(args.y, args.dim))
    R = formality_residual_op(xs, _weights(args))
    size = R.max_abs_coeff()
    _emit(args, f"max |residual coefficient| = {size:g}", {"max_abs": size, "residual": R.to_json()})
    return 0 if size <= args.tolerance else 1


def cmd_cache_sync(args) -> int:
    path = _cache_path(args)
    cache = WeightCache.load(path)
    warnings_ = []
    for e in lemma_entries(4):
        w = cache.put(e, args.tolerance)
        if w:
            warnings_.append(w)
    if not args.no_solve:
        for s in solve_order2_weights(args.samples, args.seed):
            for e in s.entries():
                w = cache.put(e, args.tolerance)
                if w:
                    warnings_.append(w)
    cache.save(path)
    for w in warnings_:
        print(f"warning: {w}", file=sys.stderr)
    _emit(args, f"{len(cache)} entries in {path}", {"path": path, "entries": len(cache)})
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("text", "json"), default="text")
    common.add_argument("--cache", help="weight cache file (default: $STARDQ_CACHE or the packaged table)")
    common.add_argument("--samples", type=int, default=10**6)
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--tolerance", type=float, default=0.0)
    common.add_argument("--gauge", choices=("air", "ground"), default="air", help="integration chart")
    common.add_argument("--weights", choices=("cache", "mc", "hybrid"), default="hybrid")
    common.add_argument("-v", "--verbose", action="store_true")

    star_in = argparse.ArgumentParser(add_help=False)
    star_in.add_argument("--dim", type=int)
    star_in.add_argument("--pi", help='bivector, e.g. "x3 d1^d2 + x1 d2^d3 + x2 d3^d1"')
    star_in.add_argument("--alpha", help='constant skew matrix, e.g. "0 1; -1 0"')
    star_in.add_argument("--star", help="star product JSON file")
    star_in.add_argument("--order", type=int, default=2)
    star_in.add_argument("--force", action="store_true", help="expand non-Poisson bivectors")

    p = argparse.ArgumentParser(prog="stardq", description="Graph expansions of star products.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("graphs", parents=[common], help="enumerate admissible graphs")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--nbar", type=int, required=True)
    s.add_argument("--edges", type=int)
    s.add_argument("--star-sizes")
    s.set_defaults(fn=cmd_graphs)

    s = sub.add_parser("weight", parents=[common], help="Monte Carlo weight of one graph")
    s.add_argument("--graph", help="graph JSON file or catalogue name")
    s.add_argument("--name", help="wedge, fan<k>, double-wedge, lean-left, lean-right, loop")
    s.set_defaults(fn=cmd_weight)

    s = sub.add_parser("weights-solve", parents=[common], help="order-2 weights from associativity")
    s.add_argument("--write", action="store_true", help="merge the results into the cache")
    s.set_defaults(fn=cmd_weights_solve)

    s = sub.add_parser("star", parents=[common, star_in], help="star product coefficients")
    s.add_argument("--f")
    s.add_argument("--g")
    s.set_defaults(fn=cmd_star)

    s = sub.add_parser("moyal", parents=[common], help="closed-form Moyal product")
    s.add_argument("--dim", type=int)
    s.add_argument("--alpha", required=True)
    s.add_argument("--order", type=int, default=3)
    s.add_argument("--f")
    s.add_argument("--g")
    s.set_defaults(fn=cmd_moyal)

    s = sub.add_parser("assoc", parents=[common, star_in], help="associativity residual")
    s.add_argument("--f")
    s.add_argument("--g")
    s.add_argument("--h")
    s.add_argument("--max-degree", type=int, default=2)
    s.add_argument("--operator", action="store_true", help="report the operator-level residual")
    s.set_defaults(fn=cmd_assoc)

    s = sub.add_parser("jacobi", parents=[common], help="Jacobiator of a bivector")
    s.add_argument("--dim", type=int, required=True)
    s.add_argument("--pi", required=True)
    s.set_defaults(fn=cmd_jacobi)

    s = sub.add_parser("gauge", parents=[common, star_in], help="gauge-transform a star product")
    s.add_argument("--gauge-file", required=True, help="gauge operator JSON {dim, order, D}")
    s.add_argument("--inverse", action="store_true", help="apply the formal inverse instead")
    s.set_defaults(fn=cmd_gauge)

    s = sub.add_parser("skew-normalize", parents=[common, star_in], help="make B1 skew by a gauge")
    s.add_argument("--b1", help="first-order operator as JSON terms (needs --dim)")
    s.set_defaults(fn=cmd_skew_normalize)

    s = sub.add_parser("formality", parents=[common], help="formality residual for one or two fields")
    s.add_argument("--dim", type=int)
    s.add_argument("--x", required=True)
    s.add_argument("--y")
    s.set_defaults(fn=cmd_formality, tolerance=0.05)

    s = sub.add_parser("cache-sync", parents=[common], help="merge exact, solved and MC weights")
    s.add_argument("--no-solve", action="store_true")
    s.set_defaults(fn=cmd_cache_sync, tolerance=0.05)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except (UsageError, ParseError, NotPoissonError, MissingWeightError, ValueError, KeyError,
            IndexError, OSError, json.JSONDecodeError) as exc:
        print(f"stardq: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
