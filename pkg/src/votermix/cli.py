"""``votermix`` command line: exact solves, simulation and the verification experiments.

Every subcommand writes CSV (header row, floats at 12 significant digits) to
``--out`` or stdout and prints a one-line summary to stderr.  Exit status is
0 on success, 2 on usage errors and 1 on runtime errors.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import analysis, channels, dual, exact_dist, graphical, ising_bridge, star_reduced
from ._io import write_csv
from .chain_core import build_complete, build_cycle, build_from_file, build_star, stationary_distribution
from .errors import ValidityError, VoterMixError

DEFAULT_SAMPLES = 100_000


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _seed(text):
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned value")
    return value


def _common(p, stochastic=False):
    p.add_argument("--seed", type=_seed, default=0, help="master seed (default 0)")
    p.add_argument("--out", help="CSV output path (default stdout)")
    if stochastic:
        p.add_argument("--samples", type=_positive_int, default=DEFAULT_SAMPLES,
                       help=f"number of samples (default {DEFAULT_SAMPLES})")
        p.add_argument("--threads", type=_positive_int, default=os.cpu_count() or 1,
                       help="worker threads; output does not depend on this (default: all cores)")


def _kernel_args(p):
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--cycle", type=int, metavar="N", help="rate-1 walk on the N-cycle")
    g.add_argument("--star", type=int, metavar="N", help="rate-1 walk on the star with N leaves")
    g.add_argument("--complete", type=int, metavar="N", help="rate-1 walk on the complete graph")
    g.add_argument("--kernel", metavar="FILE", help="chain-spec file with 'sites' and 'rate' lines")


def _kernel(args):
    if args.kernel:
        return build_from_file(args.kernel)
    if args.cycle is not None:
        return build_cycle(args.cycle)
    if args.star is not None:
        return build_star(args.star)
    return build_complete(args.complete)


def _start(text, n):
    if text is None:
        return np.ones(n, dtype=np.uint8)
    if len(text) != n or set(text) - {"0", "1"}:
        raise ValueError(f"--start must be a string of {n} bits")
    return np.array([int(c) for c in text], dtype=np.uint8)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="votermix", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exact", help="exact laws, d(t) profiles and mixing times (n <= 12 for d, t_mix)")
    _kernel_args(p)
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--tmix", type=float, metavar="EPS", help="print t_mix(EPS)")
    mode.add_argument("--times", type=_float_list, help="emit t,d,dbar on this time grid")
    mode.add_argument("--t", type=float, help="emit the law at time T from --start")
    p.add_argument("--start", help="initial bits, site 0 first (default all ones)")
    _common(p)

    p = sub.add_parser("simulate", help="sample configurations at time T or from stationarity")
    _kernel_args(p)
    p.add_argument("--t", type=float, default=1.0, help="horizon (default 1)")
    p.add_argument("--start", help="initial bits, site 0 first (default all ones)")
    p.add_argument("--method", choices=["batch", "forward", "gillespie", "dual", "perfect"],
                   default="batch", help="sampler (default batch; 'perfect' ignores --t)")
    _common(p, stochastic=True)

    p = sub.add_parser("dual-check", help="compare forward runs with the dual on shared events")
    _kernel_args(p)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--start", help="initial bits, site 0 first (default all ones)")
    _common(p, stochastic=True)

    p = sub.add_parser("cutoff-profile", help="lower and upper cutoff-window curves")
    p.add_argument("--family", choices=["cycle", "complete"], default="cycle")
    p.add_argument("--sizes", type=_int_list, required=True)
    p.add_argument("--alphas", type=_float_list, default=[0.0, 1.0, 2.0])
    _common(p, stochastic=True)

    p = sub.add_parser("star", help="reduced star chain: TV from all ones")
    p.add_argument("--n", type=int, required=True, help="number of leaves")
    p.add_argument("--times", type=_float_list, default=[0.5, 1, 2, 4, 10])
    p.add_argument("--tmix", type=float, metavar="EPS", help="also print t_mix(EPS) from all ones")
    _common(p)

    p = sub.add_parser("channel-check", help="exhaustive check of the Y-tree channel")
    p.add_argument("--grid", type=_positive_int, default=5,
                   help="labels k/(2G) for k = 1..G (default 5: 0.1..0.5)")
    _common(p)

    p = sub.add_parser("ising-check", help="heat-bath Ising vs scaled voter generators")
    p.add_argument("--sizes", type=_int_list, default=list(range(3, 11)))
    p.add_argument("--betas", type=_float_list, default=[0.0, 0.25, 0.5, 1.0, 2.0])
    _common(p)

    p = sub.add_parser("bounds", help="evaluate the lower-bound formulas")
    p.add_argument("--n", type=int, help="number of sites (Wilson) or leaves (star)")
    p.add_argument("--q-max", type=float, default=1.0)
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--alpha", type=float)
    p.add_argument("--C", type=float, dest="C")
    _common(p)
    return parser


def _emit(args, header, rows):
    text = write_csv(args.out, header, rows)
    if args.out is None:
        sys.stdout.write(text)


def _summary(msg):
    print(msg, file=sys.stderr)


def cmd_exact(args):
    kernel = _kernel(args)
    if args.tmix is not None:
        value = exact_dist.t_mix_exact(kernel, args.tmix)
        print(f"t_mix({args.tmix:g}) = {value:.12g}")
        if args.out:
            write_csv(args.out, ["quantity", "value"], [("t_mix", value)])
        return
    if args.times is not None:
        rows = exact_dist.d_profile(kernel, args.times)
        _emit(args, ["t", "d", "dbar"], rows)
        _summary(f"d(t) on {len(rows)} times for {kernel.n_sites} sites")
        return
    gen = exact_dist.build_config_generator(kernel)
    if args.t is None:
        law = exact_dist.stationary_of(gen)
        what = "stationary law"
    else:
        eta0 = _start(args.start, kernel.n_sites)
        law = exact_dist.evolve(gen, exact_dist.point_mass(gen.n_states, exact_dist.config_to_index(eta0)), args.t)
        what = f"law at t={args.t:g}"
    _emit(args, ["state_index", "probability"], enumerate(map(float, law)))
    _summary(f"{what} over {gen.n_states} states")


def _simulate(kernel, eta0, t, method, n, seed, threads):
    if method == "batch":
        return analysis.sample_in_chunks(analysis.forward_sampler(kernel, eta0, t), n, seed, threads=threads)
    if method == "perfect":
        return analysis.sample_in_chunks(analysis.stationary_sampler(kernel), n, seed, threads=threads)
    if method == "gillespie":
        return np.array([graphical.gillespie_run(kernel, eta0, t, seed + i) for i in range(n)])
    if method == "forward":
        return np.array([graphical.forward_run(graphical.sample_events(kernel, t, seed + i), eta0)
                         for i in range(n)])
    return np.array([dual.dual_sample_config(dual.sample_dual(kernel, t, seed + i), eta0)
                     for i in range(n)])


def cmd_simulate(args):
    kernel = _kernel(args)
    eta0 = _start(args.start, kernel.n_sites)
    configs = _simulate(kernel, eta0, args.t, args.method, args.samples, args.seed, args.threads)
    if kernel.n_sites > 62:
        pi = stationary_distribution(kernel).pi
        _emit(args, ["sample", "phi"], enumerate(analysis.phi_statistic(pi, configs)))
    else:
        text = graphical.write_samples_csv(args.out, configs)
        if args.out is None:
            sys.stdout.write(text)
    _summary(f"{len(configs)} samples, mean density {configs.mean():.6g}")


def cmd_dual_check(args):
    kernel = _kernel(args)
    eta0 = _start(args.start, kernel.n_sites)
    n = kernel.n_sites
    fwd, dl = [], []
    mismatches = 0
    for i in range(args.samples):
        events = graphical.sample_events(kernel, args.t, args.seed + i)
        a = graphical.forward_run(events, eta0)
        b = dual.dual_sample_config(dual.dual_from_events(events), eta0)
        mismatches += not np.array_equal(a, b)
        fwd.append(a)
        dl.append(b)
    rows = [("samples", args.samples), ("mismatches", mismatches)]
    if n <= exact_dist.MAX_GENERATOR_SITES:
        gen = exact_dist.build_config_generator(kernel)
        exact = exact_dist.evolve(gen, exact_dist.point_mass(gen.n_states, exact_dist.config_to_index(eta0)), args.t)
        rows.append(("tv_forward_exact", exact_dist.tv(graphical.empirical_law(fwd, n), exact)))
        rows.append(("tv_dual_exact", exact_dist.tv(graphical.empirical_law(dl, n), exact)))
    _emit(args, ["quantity", "value"], rows)
    _summary(f"{mismatches} realization mismatches in {args.samples} runs")
    if mismatches:
        raise VoterMixError("dual and forward runs disagree")


def cmd_cutoff_profile(args):
    family = build_cycle if args.family == "cycle" else build_complete
    profile = analysis.cutoff_profile(family, args.sizes, args.alphas, args.samples,
                                      args.seed, args.threads)
    text = profile.to_csv(args.out)
    if args.out is None:
        sys.stdout.write(text)
    _summary(f"{len(profile.rows)} profile rows for sizes {args.sizes}")


def cmd_star(args):
    profile = star_reduced.tv_from_all_ones(args.n, args.times)
    text = star_reduced.write_star_csv(args.out, args.n, profile)
    if args.out is None:
        sys.stdout.write(text)
    if args.tmix is not None:
        print(f"t_mix({args.tmix:g}) from all ones = {star_reduced.t_mix_from_ones(args.n, args.tmix):.12g}")
    _summary(f"star n={args.n}: tv at t={profile[-1][0]:g} is {profile[-1][1]:.6g}")


def cmd_channel_check(args):
    values = [0.5 * (k + 1) / args.grid for k in range(args.grid)]
    rows = channels.channel_grid_check(values)
    text = channels.write_channel_csv(args.out, rows)
    if args.out is None:
        sys.stdout.write(text)
    worst = max(r[4] for r in rows)
    print(f"max error {worst:.3g} over {len(rows)} label triples")


def cmd_ising_check(args):
    rows = ising_bridge.equivalence_grid(args.sizes, args.betas)
    text = ising_bridge.write_ising_csv(args.out, rows)
    if args.out is None:
        sys.stdout.write(text)
    print(f"max discrepancy {max(r[2] for r in rows):.3g} over {len(rows)} (n, beta) pairs")


def cmd_bounds(args):
    items = []
    if args.alpha is not None:
        items.append(("wilson_formula", analysis.wilson_formula(args.q_max, args.rho, args.alpha)))
        if args.n is not None:
            inp = analysis.WilsonBoundInput(args.n, args.q_max, args.rho, args.alpha)
            items.append(("wilson_time", inp.t))
            try:
                items.append(("wilson_lower_bound", analysis.wilson_lower_bound(inp)))
                items.append(("wilson_valid", 1))
            except ValidityError:
                items.append(("wilson_valid", 0))
    if args.C is not None:
        items.append(("star_lower_bound", analysis.star_lower_bound(args.C)))
        if args.n is not None:
            items.append(("star_time", analysis.star_time(args.n, args.C)))
            try:
                analysis.star_lower_bound(args.C, args.n)
                items.append(("star_valid", 1))
            except ValidityError:
                items.append(("star_valid", 0))
    if not items:
        raise ValueError("give --alpha (Wilson bound) and/or --C (star bound)")
    _emit(args, ["quantity", "value"], items)
    _summary(", ".join(f"{k}={v:.6g}" for k, v in items))


COMMANDS = {
    "exact": cmd_exact,
    "simulate": cmd_simulate,
    "dual-check": cmd_dual_check,
    "cutoff-profile": cmd_cutoff_profile,
    "star": cmd_star,
    "channel-check": cmd_channel_check,
    "ising-check": cmd_ising_check,
    "bounds": cmd_bounds,
}


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        COMMANDS[args.command](args)
    except (VoterMixError, ValueError, OSError) as exc:
        print(f"votermix {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
