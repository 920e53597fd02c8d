"""Transient distributions of finite CTMCs by uniformization.

Distributions are carried as columns: with ``P = I + G / lam`` the law at time
``t`` is ``sum_k Pois(k; lam t) (P^T)^k p0``.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse
from scipy.stats import poisson

TAIL_MASS = 1e-13


def poisson_window(mean: float, tail: float = TAIL_MASS) -> tuple[int, np.ndarray]:
    """Return ``(lo, weights)`` covering Poisson(mean) up to ``tail`` mass on each side."""
    if mean == 0.0:
        return 0, np.ones(1)
    lo = int(poisson.ppf(tail, mean))
    hi = int(poisson.isf(tail, mean)) + 1
    lo = max(lo - 1, 0)
    k = np.arange(lo, hi + 1)
    return lo, poisson.pmf(k, mean)


class Uniformizer:
    """Applies ``exp(t G)`` to column distributions for a fixed generator ``G``."""

    def __init__(self, generator: scipy.sparse.spmatrix, lam: float | None = None):
        G = scipy.sparse.csr_matrix(generator)
        exit_rates = -G.diagonal()
        if lam is None:
            lam = float(exit_rates.max())
        if lam <= 0:
            lam = 1.0
        if lam < exit_rates.max() * (1 - 1e-12):
            raise ValueError("uniformization constant below the largest exit rate")
        self.lam = float(lam)
        n = G.shape[0]
        self.PT = (scipy.sparse.identity(n, format="csr") + G.T / self.lam).tocsr()

    def step(self, v: np.ndarray, t: float) -> np.ndarray:
        if t < 0:
            raise ValueError(f"time must be >= 0, got {t}")
        v = np.asarray(v, dtype=float)
        if t == 0:
            return v.copy()
        lo, weights = poisson_window(self.lam * t)
        hi = lo + len(weights) - 1
        out = np.zeros_like(v)
        x = v.copy()
        for k in range(hi + 1):
            if k >= lo:
                out += weights[k - lo] * x
            if k < hi:
                x = self.PT @ x
        np.clip(out, 0.0, None, out=out)
        out /= out.sum(axis=0, keepdims=True)
        return out
