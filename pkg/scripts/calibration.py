"""Check that reported standard errors are honest: z-scores of order-two weights over many seeds.

A well calibrated estimator gives an rms z-score near 1.

    python3 scripts/calibration.py --seeds 8 --samples 1048576
"""
import argparse
import math

from stardq.graphs import named_graph
from stardq.weights import mc_weight

EXACT = {"double-wedge": 1 / 4, "lean-left": -1 / 12, "lean-right": 1 / 12, "loop": -1 / 24}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=8)
    ap.add_argument("--samples", type=int, default=2 ** 20)
    ap.add_argument("--gauge", choices=("air", "ground"), default="air")
    args = ap.parse_args()
    for name, exact in EXACT.items():
        G = named_graph(name)
        zs = []
        for seed in range(args.seeds):
            est = mc_weight(G, args.samples, seed, gauge=args.gauge)
            zs.append((est.mean - exact) / est.stderr)
        rms = math.sqrt(sum(z * z for z in zs) / len(zs))
        print(f"{name:13s} rms z = {rms:.2f}   z = {' '.join(f'{z:+.2f}' for z in zs)}")


if __name__ == "__main__":
    main()
