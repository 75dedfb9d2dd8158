"""Solve the order-two weights from associativity, cross-check by Monte Carlo, optionally write a cache.

    python3 scripts/solve_weights.py --samples 1000000 --write weights.json
"""
import argparse

from stardq.star import solve_order2_weights
from stardq.weights import WeightCache, lemma_entries


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--samples", type=int, default=10 ** 6)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--write", help="merge lemma and solved entries into this cache file")
    args = ap.parse_args()
    solved = solve_order2_weights(args.samples, args.seed)
    for s in solved:
        sigma = s.deviation / s.estimate.stderr if s.estimate.stderr else 0.0
        print(f"{s.representative.key():42s} {str(s.value):>6s}  {s.provenance:20s} MC {s.estimate}  "
              f"{sigma:.2f} sigma  orbit size {len(s.members)}")
    if args.write:
        cache = WeightCache.load(args.write)
        for e in lemma_entries(4):
            cache.put(e)
        for s in solved:
            for e in s.entries():
                cache.put(e, 0.05)
        cache.save(args.write)
        print(f"wrote {len(cache)} entries to {args.write}")


if __name__ == "__main__":
    main()
