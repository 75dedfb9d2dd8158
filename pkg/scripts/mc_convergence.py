"""Standard error versus sample count for a few weights, in both integration charts.

    python3 scripts/mc_convergence.py --max-log2 20
"""
import argparse
import csv
import sys

from stardq.graphs import named_graph
from stardq.weights import mc_weight

EXACT = {"fan2": 1 / 2, "fan3": 1 / 6, "double-wedge": 1 / 4, "lean-left": -1 / 12, "loop": -1 / 24}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--min-log2", type=int, default=12)
    ap.add_argument("--max-log2", type=int, default=20)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--out", help="optional CSV file")
    args = ap.parse_args()
    rows = []
    for name, exact in EXACT.items():
        G = named_graph(name)
        for gauge in ("air", "ground"):
            for k in range(args.min_log2, args.max_log2 + 1, 2):
                est = mc_weight(G, 2 ** k, args.seed, gauge=gauge)
                z = (est.mean - exact) / est.stderr if est.stderr else 0.0
                rows.append((name, gauge, 2 ** k, est.mean, est.stderr, z))
                print(f"{name:13s} {gauge:6s} 2^{k:<3d} {est.mean:+.6f} ± {est.stderr:.1e}  z={z:+.2f}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["graph", "gauge", "samples", "mean", "stderr", "z"])
            w.writerows(rows)


if __name__ == "__main__":
    sys.exit(main())
