"""Lumped chain ``(center value, number of leaves at 1)`` for the star.

The star kernel has ``q(center, leaf) = 1/n`` and ``q(leaf, center) = 1``.
From ``(c, k)`` the rates are

* ``(0, k) -> (1, k)`` at ``1/2 + k/n`` and ``(1, k) -> (0, k)`` at ``1/2 + (n-k)/n``,
* a leaf at 0 flips up at ``1/2`` (``+1`` if ``c = 1``), a leaf at 1 flips down
  at ``1/2`` (``+1`` if ``c = 0``).

States are indexed ``c * (n + 1) + k``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from ._io import write_csv
from ._uniformize import Uniformizer
from .errors import InvalidSizeError

TMIX_TOL = 1e-3


def _check_n(n: int):
    if n < 2:
        raise InvalidSizeError(f"star needs at least 2 leaves, got {n}")
    if n % 2:
        warnings.warn(f"odd leaf count {n}: the two leaf halves have unequal size", stacklevel=3)


def state_index(n: int, c: int, k: int) -> int:
    return c * (n + 1) + k


def reduced_generator(n: int) -> scipy.sparse.csr_matrix:
    _check_n(n)
    rows, cols, vals = [], [], []

    def add(src, dst, rate):
        if rate > 0:
            rows.append(src)
            cols.append(dst)
            vals.append(rate)

    for k in range(n + 1):
        s0, s1 = state_index(n, 0, k), state_index(n, 1, k)
        add(s0, s1, 0.5 + k / n)
        add(s1, s0, 0.5 + (n - k) / n)
        if k < n:
            add(s0, s0 + 1, 0.5 * (n - k))
            add(s1, s1 + 1, 1.5 * (n - k))
        if k > 0:
            add(s0, s0 - 1, 1.5 * k)
            add(s1, s1 - 1, 0.5 * k)
    N = 2 * (n + 1)
    off = scipy.sparse.csr_matrix((vals, (rows, cols)), shape=(N, N))
    return (off - scipy.sparse.diags(np.asarray(off.sum(axis=1)).ravel())).tocsr()


@dataclass
class ReducedStar:
    """Reduced chain for a star with ``n`` leaves, with a cached uniformizer."""

    n: int

    def __post_init__(self):
        self.generator = reduced_generator(self.n)
        self._uniformizer = Uniformizer(self.generator)

    @property
    def n_states(self) -> int:
        return 2 * (self.n + 1)

    def all_ones(self) -> np.ndarray:
        p = np.zeros(self.n_states)
        p[state_index(self.n, 1, self.n)] = 1.0
        return p

    def evolve(self, initial, t: float) -> np.ndarray:
        return self._uniformizer.step(np.asarray(initial, dtype=float), t)

    def stationary(self) -> np.ndarray:
        # balance equations with the last one replaced by normalization
        A = scipy.sparse.vstack([self.generator.T.tocsr()[:-1],
                                 scipy.sparse.csr_matrix(np.ones((1, self.n_states)))])
        b = np.zeros(self.n_states)
        b[-1] = 1.0
        mu = np.clip(scipy.sparse.linalg.spsolve(A.tocsc(), b), 0.0, None)
        return mu / mu.sum()


def reduced_evolve(n: int, initial, t: float) -> np.ndarray:
    return ReducedStar(n).evolve(initial, t)


def reduced_stationary(n: int) -> np.ndarray:
    return ReducedStar(n).stationary()


def tv_from_all_ones(n: int, t_grid) -> list[tuple[float, float]]:
    """``(t, TV(law from all ones, stationary))`` along an increasing grid."""
    chain = ReducedStar(n)
    mu = chain.stationary()
    law, now = chain.all_ones(), 0.0
    out = []
    for t in sorted(float(t) for t in t_grid):
        law = chain.evolve(law, t - now)
        now = t
        out.append((t, float(0.5 * np.abs(law - mu).sum())))
    return out


def t_mix_from_ones(n: int, eps: float = 0.25, tol: float = TMIX_TOL) -> float:
    """First time the distance from the all-ones start drops to ``eps``."""
    chain = ReducedStar(n)
    mu = chain.stationary()

    def dist(p):
        return 0.5 * np.abs(p - mu).sum()

    law, t_lo = chain.all_ones(), 0.0
    if dist(law) <= eps:
        return 0.0
    t_hi = 1.0
    while True:
        nxt = chain.evolve(law, t_hi - t_lo)
        if dist(nxt) <= eps:
            break
        law, t_lo, t_hi = nxt, t_hi, 2.0 * t_hi
    while t_hi - t_lo > tol:
        mid = 0.5 * (t_lo + t_hi)
        nxt = chain.evolve(law, mid - t_lo)
        if dist(nxt) <= eps:
            t_hi = mid
        else:
            law, t_lo = nxt, mid
    return 0.5 * (t_lo + t_hi)


def project_config(eta) -> tuple[int, int]:
    """``(center value, number of leaves at 1)`` of a star configuration (center = site 0)."""
    eta = np.asarray(eta)
    return int(eta[0]), int(eta[1:].sum())


def write_star_csv(path, n: int, profile) -> str:
    return write_csv(path, ["n", "t", "tv"], ((n, t, d) for t, d in profile))


# --- exact sampling of (center, ones among leaves 1..n/2, ones among the rest) ---

def _leaf_step(rng, k_ones, n_half, c, dt):
    """Binomial update of independent leaves over a stretch with the center fixed at ``c``."""
    pi1 = 0.75 if c else 0.25
    decay = math.exp(-2.0 * dt)
    stay = pi1 + (1 - pi1) * decay
    rise = pi1 * (1 - decay)
    return rng.binomial(k_ones, stay) + rng.binomial(n_half - k_ones, rise)


def sample_split_star(n: int, c: int, k_a: int, k_b: int, t: float, rng) -> tuple[int, int, int]:
    """Exact draw of ``(c, k_A, k_B)`` at time ``t`` from the given start.

    The center changes only at its own events, which form a rate-2 Poisson
    process independent of the leaves: half rerandomize it, half copy a
    uniform leaf.  Between center events each leaf is an independent
    two-state chain with rates depending on the center, so the leaf counts
    move by binomial thinning.
    """
    n_a = n // 2
    n_b = n - n_a
    now = 0.0
    while True:
        dt = rng.exponential(0.5)
        step = min(dt, t - now)
        k_a = _leaf_step(rng, k_a, n_a, c, step)
        k_b = _leaf_step(rng, k_b, n_b, c, step)
        now += step
        if now >= t:
            return c, int(k_a), int(k_b)
        if rng.random() < 0.5:
            c = int(rng.random() < 0.5)
        else:
            c = int(rng.random() * n < k_a + k_b)


def sample_split_stationary(n: int, rng, mu: np.ndarray | None = None) -> tuple[int, int, int]:
    """Stationary ``(c, k_A, k_B)``: reduced stationary law lifted by a hypergeometric split.

    Given ``(c, k)`` the stationary law is exchangeable in the leaves, so the
    ones are spread uniformly over the two halves.
    """
    if mu is None:
        mu = reduced_stationary(n)
    idx = int(rng.choice(len(mu), p=mu))
    c, k = divmod(idx, n + 1)
    n_a = n // 2
    k_a = int(rng.hypergeometric(n_a, n - n_a, k)) if k else 0
    return c, k_a, k - k_a


def split_star_batch(n: int, start: tuple[int, int, int], t: float, m: int, seed: int) -> np.ndarray:
    """``m`` independent draws of ``(c, k_A, k_B)`` at time ``t`` as an ``(m, 3)`` array."""
    rng = np.random.default_rng(seed)
    return np.array([sample_split_star(n, *start, t, rng) for _ in range(m)], dtype=np.int64)


def split_stationary_batch(n: int, m: int, seed: int, mu: np.ndarray | None = None) -> np.ndarray:
    """``m`` stationary draws of ``(c, k_A, k_B)`` as an ``(m, 3)`` array."""
    rng = np.random.default_rng(seed)
    if mu is None:
        mu = reduced_stationary(n)
    c, k = np.divmod(rng.choice(len(mu), size=m, p=mu), n + 1)
    n_a = n // 2
    k_a = rng.hypergeometric(n_a, n - n_a, np.maximum(k, 1)) * (k > 0)
    return np.column_stack([c, k_a, k - k_a]).astype(np.int64)
