"""TV from the all-ones state on stars of growing size, plus t_mix(1/4).

Shows that the distance curve barely moves with n, unlike the (1/2) ln n
cutoff seen on transitive graphs.
"""

import argparse

from votermix.star_reduced import t_mix_from_ones, tv_from_all_ones, write_star_csv


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", default="100,1000,10000")
    p.add_argument("--times", default="0.25,0.5,1,1.5,2,3,4,6,10")
    p.add_argument("--out-prefix", default="results/star_")
    args = p.parse_args()
    times = [float(v) for v in args.times.split(",")]
    for n in (int(v) for v in args.sizes.split(",")):
        profile = tv_from_all_ones(n, times)
        write_star_csv(f"{args.out_prefix}{n}.csv", n, profile)
        curve = " ".join(f"{d:.3f}" for _, d in profile)
        print(f"n={n:6d} t_mix(1/4)={t_mix_from_ones(n):.3f} tv: {curve}")


if __name__ == "__main__":
    main()
