"""Coalescence times of the dual walks on stars: all lineages versus one pair."""

import argparse

from votermix.chain_core import build_star
from votermix.dual import coalescence_stats


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--sizes", default="10,100,1000")
    p.add_argument("--seeds", type=int, default=500)
    p.add_argument("--horizon", type=float, default=200.0)
    args = p.parse_args()
    print("n,p_all,mean_all_time,mean_pair_time")
    for n in (int(v) for v in args.sizes.split(",")):
        s = coalescence_stats(build_star(n), args.horizon, args.seeds, seed=n)
        print(f"{n},{s.p_all_coalesced:.3f},{s.mean_all_time:.3f},{s.mean_pair_time:.3f}")


if __name__ == "__main__":
    main()
