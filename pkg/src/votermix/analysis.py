"""Mixing lower bounds as formulas, projected-statistic TV estimates and cutoff profiles."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ._io import write_csv
from .chain_core import RateKernel, stationary_distribution
from .errors import ValidityError
from .exact_dist import all_configs, build_config_generator, evolve, hypercube_tv_exact
from .graphical import perfect_stationary_batch, simulate_batch

MIN_SAMPLES = 1000
EXACT_BIN_LIMIT = 4096
N_EQUAL_BINS = 256
BOOTSTRAP_RESAMPLES = 200
CHUNK_SIZE = 10_000

_BOOTSTRAP_TAG = 0xB007
_CHUNK_TAG = 0xC0DE


def derive_seed(seed: int, *tags: int) -> int:
    """Child seed for a labelled sub-task; independent of thread count and call order."""
    ss = np.random.SeedSequence([int(seed) & (2**64 - 1), *tags])
    return int(ss.generate_state(1, np.uint64)[0])


# --- bound formulas -------------------------------------------------------

@dataclass(frozen=True)
class WilsonBoundInput:
    n_sites: int
    q_max: float
    rho: float
    alpha: float

    @property
    def t(self) -> float:
        return 0.5 * math.log(self.n_sites) - self.alpha


def wilson_formula(q_max: float, rho: float, alpha: float) -> float:
    """``0.7 e^{2a} / (16 (1 + q_max)^2 rho^2 + 0.7 e^{2a})`` with no range checks."""
    num = 0.7 * math.exp(2.0 * alpha)
    return num / (16.0 * (1.0 + q_max) ** 2 * rho**2 + num)


def wilson_lower_bound(inp: WilsonBoundInput) -> float:
    """TV lower bound from all ones at time ``(1/2) ln n - alpha``; valid for ``alpha, t >= 1``."""
    if inp.alpha < 1:
        raise ValidityError(f"bound needs alpha >= 1, got {inp.alpha}")
    if inp.t < 1:
        raise ValidityError(f"bound needs t = ln(n)/2 - alpha >= 1, got {inp.t:.6g}")
    return wilson_formula(inp.q_max, inp.rho, inp.alpha)


def phi_statistic(pi, eta) -> float:
    """``2 sum_x eta(x) pi(x) - 1``; ``eta`` may be one configuration or rows of them."""
    pi = np.asarray(pi, dtype=float)
    eta = np.asarray(eta)
    if eta.shape[-1] != len(pi):
        raise ValueError(f"length mismatch: {eta.shape[-1]} sites vs {len(pi)} weights")
    out = 2.0 * (eta @ pi) - 1.0
    return float(out) if out.ndim == 0 else out


def _check_halves(A, B):
    A, B = list(A), list(B)
    if len(A) != len(B):
        raise ValueError(f"leaf sets must have equal size, got {len(A)} and {len(B)}")
    if set(A) & set(B):
        raise ValueError("leaf sets must be disjoint")
    return np.asarray(A, dtype=int), np.asarray(B, dtype=int)


def star_phi(A, B, eta):
    """``sum_A eta - sum_B eta``; ``eta`` may be one configuration or rows of them."""
    A, B = _check_halves(A, B)
    eta = np.asarray(eta, dtype=np.int64)
    out = eta[..., A].sum(axis=-1) - eta[..., B].sum(axis=-1)
    return int(out) if out.ndim == 0 else out


def star_time(n: int, C: float) -> float:
    return 0.25 * (math.log(n) - C)


def star_lower_bound(C: float, n: int | None = None) -> float:
    """``e^C / (48 + e^C)``; when ``n`` is given, checks ``n >= 3`` and ``t > 0``."""
    if n is not None:
        if n < 3:
            raise ValidityError(f"bound needs n >= 3 leaves, got {n}")
        if star_time(n, C) <= 0:
            raise ValidityError(f"bound needs t = (ln n - C)/4 > 0, got C={C} for n={n}")
    return 1.0 / (48.0 * math.exp(-C) + 1.0)


def exact_phi_decay_error(kernel: RateKernel, times: Sequence[float]) -> float:
    """Max over starts and times of ``|E_eta[Phi(eta_t)] - e^{-t} Phi(eta)|``, exactly."""
    pi = stationary_distribution(kernel).pi
    configs = all_configs(kernel.n_sites)
    phi = phi_statistic(pi, configs)
    gen = build_config_generator(kernel)
    worst = 0.0
    for t in times:
        laws = evolve(gen, np.eye(gen.n_states), t)
        worst = max(worst, float(np.abs(laws @ phi - math.exp(-t) * phi).max()))
    return worst


# --- projected TV ---------------------------------------------------------

def _bin_codes(a: np.ndarray, b: np.ndarray):
    both = np.concatenate([a, b])
    values = np.unique(both)
    if len(values) <= EXACT_BIN_LIMIT:
        codes = np.searchsorted(values, both)
        n_bins = len(values)
    else:
        lo, hi = float(both.min()), float(both.max())
        width = (hi - lo) / N_EQUAL_BINS
        codes = np.minimum(((both - lo) / width).astype(np.int64), N_EQUAL_BINS - 1)
        n_bins = N_EQUAL_BINS
    return codes[: len(a)], codes[len(a):], n_bins


def _binned_tv(ca, cb, n_bins):
    pa = np.bincount(ca, minlength=n_bins) / len(ca)
    pb = np.bincount(cb, minlength=n_bins) / len(cb)
    return 0.5 * float(np.abs(pa - pb).sum())


def projected_tv_from_values(values_a, values_b, seed: int = 0) -> tuple[float, float]:
    """Plug-in TV between the empirical laws of two statistic samples, with bootstrap stderr.

    TV between pushforwards never exceeds TV between the underlying laws, and
    coarse binning only merges mass, so up to sampling error the estimate is
    a lower bound on the configuration-level distance.
    """
    a = np.asarray(values_a, dtype=float).ravel()
    b = np.asarray(values_b, dtype=float).ravel()
    if min(len(a), len(b)) < MIN_SAMPLES:
        raise ValueError(f"need at least {MIN_SAMPLES} samples per side, got {len(a)} and {len(b)}")
    ca, cb, n_bins = _bin_codes(a, b)
    estimate = _binned_tv(ca, cb, n_bins)
    rng = np.random.default_rng(derive_seed(seed, _BOOTSTRAP_TAG))
    boots = np.empty(BOOTSTRAP_RESAMPLES)
    for i in range(BOOTSTRAP_RESAMPLES):
        boots[i] = _binned_tv(ca[rng.integers(0, len(ca), len(ca))],
                              cb[rng.integers(0, len(cb), len(cb))], n_bins)
    return estimate, float(boots.std(ddof=1))


Sampler = Callable[[int, int], np.ndarray]


def sample_in_chunks(sampler: Sampler, n_samples: int, seed: int, tag: int = 0,
                     threads: int = 1) -> np.ndarray:
    """Run ``sampler(m, seed)`` over fixed-size chunks and concatenate in chunk order.

    Chunk seeds depend only on ``(seed, tag, chunk index)``, so the output is
    identical for every thread count.
    """
    sizes = [min(CHUNK_SIZE, n_samples - s) for s in range(0, n_samples, CHUNK_SIZE)]
    seeds = [derive_seed(seed, _CHUNK_TAG, tag, i) for i in range(len(sizes))]
    if threads <= 1 or len(sizes) == 1:
        parts = [sampler(m, s) for m, s in zip(sizes, seeds)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(sampler, sizes, seeds))
    return np.concatenate(parts)


def projected_tv_estimate(statistic: Callable[[np.ndarray], np.ndarray], sampler_a: Sampler,
                          sampler_b: Sampler, n_samples: int, seed: int = 0,
                          threads: int = 1) -> tuple[float, float]:
    """Lower-bound estimate of TV between two laws through a real statistic.

    Samplers take ``(count, seed)`` and return configurations as rows;
    ``statistic`` maps such rows to reals.
    """
    if n_samples < MIN_SAMPLES:
        raise ValueError(f"need at least {MIN_SAMPLES} samples, got {n_samples}")
    va = statistic(sample_in_chunks(sampler_a, n_samples, seed, 1, threads))
    vb = statistic(sample_in_chunks(sampler_b, n_samples, seed, 2, threads))
    return projected_tv_from_values(va, vb, seed)


def forward_sampler(kernel: RateKernel, eta0, t: float) -> Sampler:
    return lambda m, s: simulate_batch(kernel, eta0, t, m, s)


def stationary_sampler(kernel: RateKernel) -> Sampler:
    return lambda m, s: perfect_stationary_batch(kernel, m, s)


# --- cutoff profiles ------------------------------------------------------

PROFILE_HEADER = ["n", "alpha", "side", "estimate", "stderr", "n_samples"]


@dataclass
class CutoffProfile:
    """Lower side: estimated TV from all ones at ``(1/2) ln n - alpha``.
    Upper side: hypercube bound at ``(1/2) ln n + alpha`` (stderr 0).
    """

    window: float = 1.0
    rows: list = field(default_factory=list)

    def add(self, n, alpha, side, estimate, stderr, n_samples):
        if stderr < 0 or not 0 <= estimate <= 1:
            raise ValueError("estimates must lie in [0, 1] with non-negative stderr")
        self.rows.append((n, alpha, side, estimate, stderr, n_samples))

    def side(self, name: str) -> list:
        return [r for r in self.rows if r[2] == name]

    def to_csv(self, path=None) -> str:
        return write_csv(path, PROFILE_HEADER, self.rows)


def cutoff_profile(family: Callable[[int], RateKernel], sizes: Sequence[int],
                   alphas: Sequence[float], n_samples: int, seed: int = 0,
                   threads: int = 1) -> CutoffProfile:
    profile = CutoffProfile()
    for n in sizes:
        kernel = family(n)
        pi = stationary_distribution(kernel).pi
        ones = np.ones(kernel.n_sites, dtype=np.uint8)
        stat = lambda c: phi_statistic(pi, c)
        stationary_phi = None
        for alpha in alphas:
            t = 0.5 * math.log(kernel.n_sites) - alpha
            if t >= 0:
                if stationary_phi is None:
                    stationary_phi = stat(sample_in_chunks(stationary_sampler(kernel), n_samples,
                                                           derive_seed(seed, n), 2, threads))
                sub = derive_seed(seed, n, int(round(alpha * 1e6)) & 0xFFFFFFFF)
                va = stat(sample_in_chunks(forward_sampler(kernel, ones, t), n_samples, sub, 1, threads))
                est, se = projected_tv_from_values(va, stationary_phi, sub)
                profile.add(kernel.n_sites, alpha, "lower", est, se, n_samples)
            up = hypercube_tv_exact(kernel.n_sites, 0.5 * math.log(kernel.n_sites) + alpha)
            profile.add(kernel.n_sites, alpha, "upper", up, 0.0, 0)
    return profile


def write_bounds_csv(path, items) -> str:
    return write_csv(path, ["quantity", "value"], items)
