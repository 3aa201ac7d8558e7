#!/usr/bin/env python3
"""Generate a synthetic income-style demo CSV.

Four regions with gamma-mixture incomes (thousands of currency units),
deliberately uneven sample sizes, suitable for the five-term basis
(1, x, x^2, log x, sqrt x).  See the README for the full workflow.

Run:  python scripts/generate_demo_data.py [out.csv] [--seed 0]
"""

import argparse
import csv

import numpy as np

REGIONS = {
    # label: (mixture weights, shapes, scales, size)
    "north": ((0.7, 0.3), (3.0, 6.0), (5.0, 9.0), 600),
    "east": ((0.6, 0.4), (4.0, 7.0), (6.0, 10.0), 160),
    "south": ((0.5, 0.5), (3.5, 8.0), (5.5, 9.5), 300),
    "west": ((0.8, 0.2), (2.8, 6.5), (4.5, 8.5), 500),
}


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out", nargs="?", default="demo_income.csv")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["region", "income"])
        for label, (weights, shapes, scales, size) in REGIONS.items():
            comp = rng.choice(len(weights), size=size, p=weights)
            draws = rng.gamma(np.take(shapes, comp), np.take(scales, comp))
            for v in draws:
                writer.writerow([label, f"{v:.3f}"])
    print(f"wrote {args.out} ({sum(r[3] for r in REGIONS.values())} rows)")


if __name__ == "__main__":
    main()
