"""Heat-bath Ising dynamics on the cycle and its match with a time-scaled noisy voter model.

Spins map to bits by ``+1 <-> 1`` and ``-1 <-> 0``, so the state indexing is
the same as in :mod:`votermix.exact_dist`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse

from ._io import write_csv
from .chain_core import RateKernel
from .errors import CapacityError, InvalidSizeError
from .exact_dist import all_configs, build_config_generator

MAX_ISING_SITES = 14
MAX_EQUIVALENCE_SITES = 12


@dataclass(frozen=True)
class IsingCycleParams:
    n: int
    beta: float

    def __post_init__(self):
        if self.n < 3:
            raise InvalidSizeError(f"cycle needs n >= 3, got {self.n}")
        if self.beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")

    @property
    def voter_rate(self) -> float:
        """Copy rate to each neighbor, ``(e^{4 beta} - 1) / 4``."""
        return math.expm1(4 * self.beta) / 4

    @property
    def theta_scale(self) -> float:
        """Time change ``2 / (1 + e^{4 beta})``."""
        return 2.0 / (1.0 + math.exp(4 * self.beta))


def bits_to_spins(bits) -> np.ndarray:
    return 2 * np.asarray(bits, dtype=np.int64) - 1


def spin_flip_rates(spins: np.ndarray, beta: float) -> np.ndarray:
    """Heat-bath rate ``1 / (1 + exp(2 beta s(x) (s(x-1) + s(x+1))))`` per site and row."""
    neigh = np.roll(spins, 1, axis=-1) + np.roll(spins, -1, axis=-1)
    return 1.0 / (1.0 + np.exp(2.0 * beta * spins * neigh))


def ising_generator(n: int, beta: float) -> scipy.sparse.csr_matrix:
    IsingCycleParams(n, beta)
    if n > MAX_ISING_SITES:
        raise CapacityError(f"Ising generator limited to {MAX_ISING_SITES} sites, got {n}")
    spins = bits_to_spins(all_configs(n))
    rates = spin_flip_rates(spins, beta)
    states = np.arange(1 << n)
    rows = np.repeat(states, n)
    cols = (states[:, None] ^ (1 << np.arange(n))).ravel()
    off = scipy.sparse.csr_matrix((rates.ravel(), (rows, cols)), shape=(1 << n, 1 << n))
    return (off - scipy.sparse.diags(rates.sum(axis=1))).tocsr()


def voter_cycle_kernel(n: int, rate: float) -> RateKernel:
    rates = {}
    for x in range(n):
        rates[(x, (x + 1) % n)] = rates.get((x, (x + 1) % n), 0.0) + rate
        rates[(x, (x - 1) % n)] = rates.get((x, (x - 1) % n), 0.0) + rate
    return RateKernel(n, rates)


def verify_equivalence(n: int, beta: float) -> float:
    """Max entrywise ``|theta G_voter - G_ising|`` over the full state space."""
    params = IsingCycleParams(n, beta)
    if n > MAX_EQUIVALENCE_SITES:
        raise CapacityError(f"equivalence check limited to {MAX_EQUIVALENCE_SITES} sites, got {n}")
    voter = build_config_generator(voter_cycle_kernel(n, params.voter_rate)).matrix
    diff = params.theta_scale * voter - ising_generator(n, beta)
    return float(abs(diff).max()) if diff.nnz else 0.0


def detailed_balance_error(n: int, beta: float) -> float:
    """Max over single flips of ``|w(s) rate(s -> s') - w(s') rate(s' -> s)|`` for the Gibbs weights.

    Weights ``exp(beta sum_x s(x) s(x+1))`` are normalized, so the error is
    on the probability-flux scale.
    """
    spins = bits_to_spins(all_configs(n))
    energy = beta * (spins * np.roll(spins, -1, axis=1)).sum(axis=1)
    w = np.exp(energy - energy.max())
    w /= w.sum()
    rates = spin_flip_rates(spins, beta)
    worst = 0.0
    for x in range(n):
        partner = np.arange(1 << n) ^ (1 << x)
        flux = w * rates[:, x]
        worst = max(worst, float(np.abs(flux - flux[partner]).max()))
    return worst


def equivalence_grid(ns=range(3, 11), betas=(0.0, 0.25, 0.5, 1.0, 2.0)):
    return [(n, b, verify_equivalence(n, b)) for n, b in itertools.product(ns, betas)]


def write_ising_csv(path, rows) -> str:
    return write_csv(path, ["n", "beta", "discrepancy"], rows)
