"""Compare weight estimates across gauge fixings: pinned grounds (0,1) vs (0,2), and air vs ground charts.

    python3 scripts/gauge_comparison.py --samples 1000000
"""
import argparse
import math

from stardq.graphs import named_graph
from stardq.weights import mc_weight


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--samples", type=int, default=2 ** 20)
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()
    for name in ("fan2", "fan3", "double-wedge", "lean-left", "lean-right", "loop"):
        G = named_graph(name)
        a = mc_weight(G, args.samples, args.seed, gauge="ground", pins=(0.0, 1.0))
        b = mc_weight(G, args.samples, args.seed, gauge="ground", pins=(0.0, 2.0))
        c = mc_weight(G, args.samples, args.seed, gauge="air")
        pin_z = (a.mean - b.mean) / math.hypot(a.stderr, b.stderr) if a.stderr or b.stderr else 0.0
        chart_z = (a.mean - c.mean) / math.hypot(a.stderr, c.stderr) if a.stderr or c.stderr else 0.0
        print(f"{name:13s} ground(0,1) {a}  ground(0,2) {b}  air {c}  "
              f"pins z={pin_z:+.2f}  charts z={chart_z:+.2f}")


if __name__ == "__main__":
    main()
