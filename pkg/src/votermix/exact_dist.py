"""Exact laws of the noisy voter process on {0,1}^S for small S.

State encoding: site ``i`` is bit ``i``, so ``index = sum_i eta(i) 2**i``.
Distributions are plain 1-D float arrays indexed this way.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.integrate
import scipy.linalg
import scipy.sparse
from scipy.stats import binom

from ._io import write_csv
from ._uniformize import Uniformizer
from .chain_core import RateKernel
from .errors import CapacityError

MAX_GENERATOR_SITES = 20
MAX_PROFILE_SITES = 12
DENSE_STATE_LIMIT = 4096
TMIX_TOL = 1e-4


@dataclass(frozen=True)
class ConfigGenerator:
    n_sites: int
    matrix: scipy.sparse.csr_matrix
    lam: float
    _uniformizer: Uniformizer = field(repr=False, compare=False)

    @property
    def n_states(self) -> int:
        return 1 << self.n_sites


def config_to_index(eta) -> int:
    return int(sum(int(b) << i for i, b in enumerate(eta)))


def index_to_config(index: int, n_sites: int) -> np.ndarray:
    return np.array([(index >> i) & 1 for i in range(n_sites)], dtype=np.uint8)


def all_configs(n_sites: int) -> np.ndarray:
    """``(2**n, n)`` array of bits; row ``s`` is the configuration with index ``s``."""
    states = np.arange(1 << n_sites)
    return ((states[:, None] >> np.arange(n_sites)) & 1).astype(np.uint8)


def flip_rates(kernel: RateKernel, configs: np.ndarray) -> np.ndarray:
    """Per-site flip rates ``1/2 + sum_y q(x,y) 1{eta(y) != eta(x)}`` for each row."""
    q = kernel.rate_matrix().toarray()
    configs = np.asarray(configs, dtype=np.int8)
    rates = np.empty(configs.shape, dtype=float)
    for x in range(kernel.n_sites):
        disagree = configs != configs[:, [x]]
        rates[:, x] = 0.5 + disagree @ q[x]
    return rates


def build_config_generator(kernel: RateKernel) -> ConfigGenerator:
    n = kernel.n_sites
    if n > MAX_GENERATOR_SITES:
        raise CapacityError(
            f"exact generator limited to {MAX_GENERATOR_SITES} sites, got {n}"
        )
    configs = all_configs(n)
    rates = flip_rates(kernel, configs)
    states = np.arange(1 << n)
    rows = np.repeat(states, n)
    cols = (states[:, None] ^ (1 << np.arange(n))).ravel()
    off = scipy.sparse.csr_matrix(
        (rates.ravel(), (rows, cols)), shape=(1 << n, 1 << n)
    )
    G = (off - scipy.sparse.diags(rates.sum(axis=1))).tocsr()
    lam = n * (1.0 + kernel.q_max)
    return ConfigGenerator(n, G, lam, Uniformizer(G, lam))


def point_mass(n_states: int, index: int) -> np.ndarray:
    p = np.zeros(n_states)
    p[index] = 1.0
    return p


def evolve(gen: ConfigGenerator, initial, t: float) -> np.ndarray:
    """Law at time ``t``; ``initial`` may be one distribution or rows of them."""
    if t < 0:
        raise ValueError(f"time must be >= 0, got {t}")
    initial = np.asarray(initial, dtype=float)
    if initial.shape[-1] != gen.n_states:
        raise ValueError(f"expected distributions of length {gen.n_states}")
    return gen._uniformizer.step(initial.T, t).T


def stationary_of(gen: ConfigGenerator) -> np.ndarray:
    N = gen.n_states
    if N <= DENSE_STATE_LIMIT:
        A = gen.matrix.T.toarray()
        A[-1, :] = 1.0
        b = np.zeros(N)
        b[-1] = 1.0
        mu = scipy.linalg.solve(A, b)
    else:
        # hypercube comparison gives TV <= n e^{-t}; this horizon leaves < e^{-35}
        horizon = math.log(gen.n_sites) + 35.0
        mu = evolve(gen, np.full(N, 1.0 / N), horizon)
    mu = np.clip(mu, 0.0, None)
    return mu / mu.sum()


def stationary_residual(gen: ConfigGenerator, mu) -> float:
    return float(np.abs(gen.matrix.T @ np.asarray(mu)).max())


def tv(p, r) -> float:
    p = np.asarray(p, dtype=float)
    r = np.asarray(r, dtype=float)
    if p.shape != r.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {r.shape}")
    return float(0.5 * np.abs(p - r).sum())


def _pairwise_max_tv(rows: np.ndarray, block: int = 256) -> float:
    best = 0.0
    for i in range(0, len(rows), block):
        a = rows[i : i + block]
        for j in range(i, len(rows), block):
            b = rows[j : j + block]
            d = 0.5 * np.abs(a[:, None, :] - b[None, :, :]).sum(axis=2)
            best = max(best, float(d.max()))
    return best


class _ProfileState:
    """All ``2**n`` time-t laws, advanced incrementally in time."""

    def __init__(self, kernel: RateKernel):
        if kernel.n_sites > MAX_PROFILE_SITES:
            raise CapacityError(
                f"d(t) enumeration limited to {MAX_PROFILE_SITES} sites, got {kernel.n_sites}"
            )
        self.gen = build_config_generator(kernel)
        self.mu = stationary_of(self.gen)
        self.t = 0.0
        self.laws = np.eye(self.gen.n_states)

    def laws_at(self, t: float) -> np.ndarray:
        if t < self.t:
            raise ValueError("times must be visited in increasing order")
        return evolve(self.gen, self.laws, t - self.t)

    def advance(self, t: float, laws: np.ndarray | None = None):
        self.laws = self.laws_at(t) if laws is None else laws
        self.t = t

    def d(self, laws: np.ndarray) -> float:
        return float((0.5 * np.abs(laws - self.mu).sum(axis=1)).max())


def d_profile(kernel: RateKernel, t_grid) -> list[tuple[float, float, float]]:
    """``(t, d(t), dbar(t))`` with maxima over all initial states and all pairs."""
    state = _ProfileState(kernel)
    out = []
    for t in sorted(float(t) for t in t_grid):
        state.advance(t)
        out.append((t, state.d(state.laws), _pairwise_max_tv(state.laws)))
    return out


def _bisect_decreasing(state, value_at, eps, tol, t_hi=1.0):
    """First time a non-increasing ``value_at`` drops to ``eps``, via bracket growth."""
    t_lo = 0.0
    while True:
        laws = state.laws_at(t_hi)
        if value_at(laws) <= eps:
            break
        state.advance(t_hi, laws)
        t_lo, t_hi = t_hi, 2.0 * t_hi
    while t_hi - t_lo > tol:
        mid = 0.5 * (t_lo + t_hi)
        laws = state.laws_at(mid)
        if value_at(laws) <= eps:
            t_hi = mid
        else:
            state.advance(mid, laws)
            t_lo = mid
    return 0.5 * (t_lo + t_hi)


def t_mix_exact(kernel: RateKernel, eps: float = 0.25, tol: float = TMIX_TOL) -> float:
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    state = _ProfileState(kernel)
    if state.d(state.laws) <= eps:
        return 0.0
    return _bisect_decreasing(state, state.d, eps, tol)


def hypercube_tv_exact(n: int, t: float) -> float:
    """TV at time ``t`` between the all-ones and all-zeros starts when ``q = 0``.

    Sites keep their start value with probability ``p = (1 + e^{-t}) / 2``
    independently, and the likelihood ratio only depends on the number of
    ones, so the answer is the TV between Bin(n, p) and Bin(n, 1 - p).
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if t < 0:
        raise ValueError(f"time must be >= 0, got {t}")
    p = 0.5 * (1.0 + math.exp(-t))
    k = np.arange(n + 1)
    a = binom.pmf(k, n, p)
    b = binom.pmf(k, n, 1.0 - p)
    return float(min(1.0, 0.5 * np.abs(a - b).sum()))


def dgm_limit(alpha: float) -> float:
    """``(4 / sqrt(pi)) * integral_0^{e^-alpha / sqrt 8} exp(-u^2) du``."""
    upper = math.exp(-alpha) / math.sqrt(8.0)
    if upper == 0.0:
        return 0.0
    value, _ = scipy.integrate.quad(lambda u: math.exp(-u * u), 0.0, upper,
                                    epsabs=1e-13, epsrel=1e-13)
    return 4.0 / math.sqrt(math.pi) * value


def write_distribution_csv(path, probs) -> str:
    return write_csv(path, ["state_index", "probability"], enumerate(map(float, probs)))


def write_profile_csv(path, profile) -> str:
    return write_csv(path, ["t", "d", "dbar"], profile)
