"""Voting mechanisms: site-level rate kernels and their stationary data.

A :class:`RateKernel` holds the rates ``q(x, y)`` of a continuous-time Markov
chain on sites ``0..n-1``.  Sites are dense integers; for the star the centre
is site 0 and the leaves are ``1..n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.csgraph
import scipy.sparse.linalg

from .errors import ChainSpecError, InvalidSizeError, ReducibleKernelError

DENSE_SOLVE_LIMIT = 512
STATIONARY_RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class RateKernel:
    """Sparse rates ``q(x, y)`` with ``x != y`` on ``n_sites`` sites."""

    n_sites: int
    rates: Mapping[tuple[int, int], float]
    exit_rates: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n_sites < 1:
            raise InvalidSizeError(f"n_sites must be positive, got {self.n_sites}")
        clean = {}
        exit_rates = np.zeros(self.n_sites)
        for (x, y), r in self.rates.items():
            x, y, r = int(x), int(y), float(r)
            if not (0 <= x < self.n_sites and 0 <= y < self.n_sites):
                raise ValueError(f"site pair ({x}, {y}) out of range for {self.n_sites} sites")
            if x == y:
                raise ValueError(f"self-rate at site {x}")
            if not math.isfinite(r) or r < 0:
                raise ValueError(f"rate q({x},{y}) = {r} must be finite and >= 0")
            if r == 0.0:
                continue
            clean[(x, y)] = r
        # exit rates summed in sorted order so they are reproducible bit-for-bit
        for (x, _), r in sorted(clean.items()):
            exit_rates[x] += r
        exit_rates.setflags(write=False)
        object.__setattr__(self, "rates", MappingProxyType(dict(sorted(clean.items()))))
        object.__setattr__(self, "exit_rates", exit_rates)

    def exit_rate(self, x: int) -> float:
        return float(self.exit_rates[x])

    @property
    def q_max(self) -> float:
        return float(self.exit_rates.max())

    def rate(self, x: int, y: int) -> float:
        return self.rates.get((x, y), 0.0)

    def out_edges(self) -> list[list[tuple[int, float]]]:
        """Per-site lists of ``(target, rate)``, targets ascending."""
        out = [[] for _ in range(self.n_sites)]
        for (x, y), r in self.rates.items():
            out[x].append((y, r))
        return out

    def rate_matrix(self) -> scipy.sparse.csr_matrix:
        """Off-diagonal rates as a CSR matrix (no diagonal)."""
        if not self.rates:
            return scipy.sparse.csr_matrix((self.n_sites, self.n_sites))
        xs, ys = zip(*self.rates.keys())
        return scipy.sparse.csr_matrix(
            (list(self.rates.values()), (xs, ys)), shape=(self.n_sites, self.n_sites)
        )

    def generator(self) -> scipy.sparse.csr_matrix:
        """Site generator ``Q`` with ``Q(x, x) = -q(x)``."""
        return (self.rate_matrix() - scipy.sparse.diags(self.exit_rates)).tocsr()

    def is_irreducible(self) -> bool:
        if self.n_sites == 1:
            return True
        n_comp, _ = scipy.sparse.csgraph.connected_components(
            self.rate_matrix(), directed=True, connection="strong"
        )
        return n_comp == 1


@dataclass(frozen=True)
class StationaryInfo:
    pi: np.ndarray
    pi_max: float
    pi_min: float
    rho: float
    residual: float


def build_cycle(n: int) -> RateKernel:
    """Rate-1 random walk on Z/nZ: ``q(x, x +- 1) = 1/2``."""
    if n < 3:
        raise InvalidSizeError(f"cycle needs n >= 3, got {n}")
    rates = {}
    for x in range(n):
        rates[(x, (x + 1) % n)] = 0.5
        rates[(x, (x - 1) % n)] = 0.5
    return RateKernel(n, rates)


def build_star(n: int) -> RateKernel:
    """Rate-1 random walk on the n-star; centre is site 0, leaves 1..n."""
    if n < 2:
        raise InvalidSizeError(f"star needs n >= 2 leaves, got {n}")
    rates = {}
    for leaf in range(1, n + 1):
        rates[(0, leaf)] = 1.0 / n
        rates[(leaf, 0)] = 1.0
    return RateKernel(n + 1, rates)


def build_complete(n: int) -> RateKernel:
    """Rate-1 random walk on the complete graph K_n."""
    if n < 2:
        raise InvalidSizeError(f"complete graph needs n >= 2, got {n}")
    r = 1.0 / (n - 1)
    return RateKernel(n, {(x, y): r for x in range(n) for y in range(n) if x != y})


def multiply_rates(kernel: RateKernel, c: float) -> RateKernel:
    if not (math.isfinite(c) and c >= 0):
        raise ValueError(f"scale factor must be finite and >= 0, got {c}")
    return RateKernel(kernel.n_sites, {k: v * c for k, v in kernel.rates.items()})


def relabel(kernel: RateKernel, perm: Sequence[int]) -> RateKernel:
    """Kernel with site ``x`` renamed to ``perm[x]``."""
    perm = [int(p) for p in perm]
    if sorted(perm) != list(range(kernel.n_sites)):
        raise ValueError("perm must be a permutation of the sites")
    return RateKernel(
        kernel.n_sites, {(perm[x], perm[y]): r for (x, y), r in kernel.rates.items()}
    )


def parse_chain_spec(text: str) -> RateKernel:
    """Parse the ``sites <n>`` / ``rate <x> <y> <value>`` text format."""
    n_sites = None
    rates: dict[tuple[int, int], float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].split()
        if not line:
            continue
        key, args = line[0], line[1:]
        if key == "sites":
            if n_sites is not None:
                raise ChainSpecError("duplicate 'sites' line", lineno)
            if len(args) != 1:
                raise ChainSpecError("expected 'sites <n>'", lineno)
            try:
                n_sites = int(args[0])
            except ValueError:
                raise ChainSpecError(f"bad site count {args[0]!r}", lineno) from None
            if n_sites < 1:
                raise ChainSpecError(f"site count must be positive, got {n_sites}", lineno)
        elif key == "rate":
            if n_sites is None:
                raise ChainSpecError("'rate' before 'sites'", lineno)
            if len(args) != 3:
                raise ChainSpecError("expected 'rate <x> <y> <value>'", lineno)
            try:
                x, y, value = int(args[0]), int(args[1]), float(args[2])
            except ValueError:
                raise ChainSpecError(f"cannot parse {' '.join(args)!r}", lineno) from None
            if not (0 <= x < n_sites and 0 <= y < n_sites):
                raise ChainSpecError(f"site out of range 0..{n_sites - 1}", lineno)
            if x == y:
                raise ChainSpecError("self-rates are not allowed", lineno)
            if not math.isfinite(value) or value < 0:
                raise ChainSpecError(f"rate must be finite and >= 0, got {value}", lineno)
            if (x, y) in rates:
                raise ChainSpecError(f"duplicate entry for ({x}, {y})", lineno)
            rates[(x, y)] = value
        else:
            raise ChainSpecError(f"unknown directive {key!r}", lineno)
    if n_sites is None:
        raise ChainSpecError("missing 'sites' line")
    return RateKernel(n_sites, rates)


def build_from_file(path: str | Path) -> RateKernel:
    return parse_chain_spec(Path(path).read_text())


def format_chain_spec(kernel: RateKernel) -> str:
    lines = [f"sites {kernel.n_sites}"]
    lines += [f"rate {x} {y} {r!r}" for (x, y), r in kernel.rates.items()]
    return "\n".join(lines) + "\n"


def stationary_residual(kernel: RateKernel, pi) -> float:
    pi = np.asarray(pi, dtype=float)
    return float(np.abs(kernel.generator().T @ pi).max())


def _solve_stationary(kernel: RateKernel) -> np.ndarray:
    n = kernel.n_sites
    if n == 1:
        return np.ones(1)
    A = kernel.generator().T.tolil()
    # replace one balance equation by the normalisation constraint
    A[n - 1, :] = np.ones(n)
    b = np.zeros(n)
    b[-1] = 1.0
    if n <= DENSE_SOLVE_LIMIT:
        pi = scipy.linalg.solve(A.toarray(), b)
    else:
        pi = scipy.sparse.linalg.spsolve(A.tocsc(), b)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def stationary_distribution(kernel: RateKernel, pi=None) -> StationaryInfo:
    """Stationary law of the site chain together with ``rho = pi_max / pi_min``.

    Reducible kernels have no unique stationary law; for them the caller must
    pass an explicit ``pi``, which is checked for stationarity.
    """
    if pi is None:
        if not kernel.is_irreducible():
            raise ReducibleKernelError(
                "kernel is reducible; supply an explicit stationary pi"
            )
        pi = _solve_stationary(kernel)
    else:
        pi = np.asarray(pi, dtype=float)
        if pi.shape != (kernel.n_sites,):
            raise ValueError(f"pi must have length {kernel.n_sites}")
        if (pi < 0).any() or abs(pi.sum() - 1.0) > 1e-12:
            raise ValueError("pi must be a probability vector")
    residual = stationary_residual(kernel, pi)
    if residual > STATIONARY_RESIDUAL_TOL:
        raise ValueError(f"pi is not stationary (residual {residual:.3g})")
    pi = pi.copy()
    pi.setflags(write=False)
    pi_max, pi_min = float(pi.max()), float(pi.min())
    rho = pi_max / pi_min if pi_min > 0 else math.inf
    return StationaryInfo(pi, pi_max, pi_min, rho, residual)


def random_irreducible_kernel(n: int, seed: int, density: float = 0.5) -> RateKernel:
    """Random kernel containing a directed Hamiltonian cycle, hence irreducible."""
    rng = np.random.default_rng(seed)
    if n == 1:
        return RateKernel(1, {})
    order = rng.permutation(n)
    rates = {}
    for i in range(n):
        rates[(int(order[i]), int(order[(i + 1) % n]))] = float(rng.uniform(0.2, 2.0))
    for x in range(n):
        for y in range(n):
            if x != y and (x, y) not in rates and rng.random() < density:
                rates[(x, y)] = float(rng.uniform(0.05, 2.0))
    return RateKernel(n, rates)
