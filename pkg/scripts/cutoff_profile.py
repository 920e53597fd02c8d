"""Lower and upper cutoff-window curves for cycles of growing size.

Usage: python scripts/cutoff_profile.py [--samples N] [--seed S] [--out results/cutoff.csv]
"""

import argparse
import os

from votermix.analysis import cutoff_profile
from votermix.chain_core import build_cycle


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", default="64,256,1024")
    p.add_argument("--alphas", default="-1,-0.5,0,0.5,1,1.5,2")
    p.add_argument("--samples", type=int, default=20_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="results/cutoff_profile.csv")
    args = p.parse_args()
    sizes = [int(v) for v in args.sizes.split(",")]
    alphas = [float(v) for v in args.alphas.split(",")]
    profile = cutoff_profile(build_cycle, sizes, alphas, args.samples, args.seed, os.cpu_count() or 1)
    profile.to_csv(args.out)
    for row in profile.rows:
        print("n={} alpha={:+.2f} {:5s} {:.4f} +- {:.4f}".format(*row[:5]))


if __name__ == "__main__":
    main()
