"""Graphical representation of the noisy voter model and simulators built on it.

Every site ``x`` carries two independent Poisson streams on ``(0, t]``:
voting times (rate ``q(x)``, each with a target ``y`` drawn with probability
``q(x, y) / q(x)``) and rerandomization times (rate 1, each with a fair bit).
Streams are drawn from counter-based substreams keyed by the master seed, so
a given ``(seed, site, kind)`` always yields the same stream regardless of how
many other streams are generated or in which order.

Configurations are ``uint8`` arrays of 0/1 indexed by site.
"""

from __future__ import annotations

import copy
import threading
from dataclasses import dataclass

import numpy as np

from ._io import write_csv
from .chain_core import RateKernel

VOTE, RERAND = 0, 1
PERFECT_START_HORIZON = 4.0
_TIE_KIND = 2
_SEGMENT_KIND_BASE = 16
_EMPTY_INT = np.empty(0, dtype=np.int64)


_local = threading.local()


class _Substreams:
    """Philox generator repositioned per ``(site, kind)`` substream.

    The key is the master seed and the counter's high words hold
    ``(site, kind)``, so substreams never overlap.  One bit generator per
    thread is reused; only its state is rewritten.
    """

    def __init__(self, seed: int):
        if not hasattr(_local, "bg"):
            _local.bg = np.random.Philox(key=0)
            _local.gen = np.random.Generator(_local.bg)
            _local.template = _local.bg.state
        self._bg, self._gen = _local.bg, _local.gen
        self._state = copy.deepcopy(_local.template)
        self._state["state"]["key"][:] = (int(seed) & (2**64 - 1), 0)

    def get(self, site: int, kind: int) -> np.random.Generator:
        state = self._state
        state["state"]["counter"][:] = (0, 0, site, kind)
        self._bg.state = state
        return self._gen


def _poisson_stream(gen, rate, t):
    if rate <= 0 or t <= 0:
        return np.empty(0)
    k = gen.poisson(rate * t)
    return np.sort(t * (1.0 - gen.random(k)))  # values in (0, t]


@dataclass(frozen=True)
class GraphicalEvents:
    horizon: float
    n_sites: int
    seed: int
    vote_times: tuple
    vote_targets: tuple
    rerand_times: tuple
    rerand_bits: tuple

    def n_votes(self) -> int:
        return int(sum(len(v) for v in self.vote_times))

    def n_rerands(self) -> int:
        return int(sum(len(v) for v in self.rerand_times))

    def merged(self):
        """All events in forward time order as ``(time, site, kind, aux)`` arrays."""
        times = np.concatenate(self.vote_times + self.rerand_times)
        n_v = [len(v) for v in self.vote_times]
        n_r = [len(v) for v in self.rerand_times]
        sites = np.concatenate([np.repeat(np.arange(self.n_sites), n_v),
                                np.repeat(np.arange(self.n_sites), n_r)])
        kinds = np.repeat([VOTE, RERAND], [sum(n_v), sum(n_r)])
        aux = np.concatenate(self.vote_targets + self.rerand_bits).astype(np.int64)
        order = np.argsort(times, kind="stable")
        return times[order], sites[order], kinds[order], aux[order]


def _vote_stream(gen, targets, cum, rate, t):
    times = _poisson_stream(gen, rate, t)
    if len(times) == 0:
        return times, _EMPTY_INT
    picks = np.searchsorted(cum, gen.random(len(times)), side="right")
    return times, targets[np.minimum(picks, len(targets) - 1)]


def _rerand_stream(gen, t):
    times = _poisson_stream(gen, 1.0, t)
    return times, gen.integers(0, 2, size=len(times)).astype(np.int64)


def _site_choice_tables(kernel: RateKernel):
    """Per-site ``(targets, cumulative probabilities)``, cached on the kernel."""
    cached = kernel.__dict__.get("_choice_tables")
    if cached is not None:
        return cached
    tables = []
    for edges in kernel.out_edges():
        if edges:
            ys, rs = zip(*edges)
            rs = np.asarray(rs)
            tables.append((np.asarray(ys, dtype=np.int64), np.cumsum(rs / rs.sum())))
        else:
            tables.append((_EMPTY_INT, np.empty(0)))
    object.__setattr__(kernel, "_choice_tables", tables)
    return tables


def _break_ties(streams: _Substreams, vote_times, rerand_times, t):
    """Redraw the later copy of any repeated timestamp until all are distinct."""
    lists = list(vote_times) + list(rerand_times)
    rounds = 0
    while True:
        allt = np.concatenate(lists) if lists else np.empty(0)
        if len(np.unique(allt)) == len(allt):
            return
        entries = sorted(
            (v, li, i) for li, arr in enumerate(lists) for i, v in enumerate(arr.tolist())
        )
        later = [(li, i) for (v0, _, _), (v, li, i) in zip(entries, entries[1:]) if v == v0]
        if not later:
            return
        gen = streams.get(rounds, _TIE_KIND)
        rounds += 1
        for li, i in later:
            lists[li][i] = t * (1.0 - gen.random())
        # targets/bits are i.i.d. marks, so re-sorting times alone keeps the law
        for li in {li for li, _ in later}:
            lists[li].sort()


def sample_events(kernel: RateKernel, t: float, seed: int, rerand_seed: int | None = None) -> GraphicalEvents:
    """Draw all voting and rerandomization streams on ``(0, t]``.

    ``rerand_seed`` keys the rerandomization streams separately; by default
    they share the master seed.  Holding the voting streams fixed while
    varying ``rerand_seed`` resamples marks conditionally on the arrows.
    """
    if t < 0:
        raise ValueError(f"horizon must be >= 0, got {t}")
    streams = _Substreams(seed)
    rstreams = streams if rerand_seed is None else _Substreams(rerand_seed)
    tables = _site_choice_tables(kernel)
    vt, vy, rt, rb = [], [], [], []
    for x in range(kernel.n_sites):
        times, targets = _vote_stream(streams.get(x, VOTE), *tables[x], kernel.exit_rate(x), t)
        vt.append(times)
        vy.append(targets)
        times, bits = _rerand_stream(rstreams.get(x, RERAND), t)
        rt.append(times)
        rb.append(bits)
    _break_ties(streams, vt, rt, t)
    return GraphicalEvents(float(t), kernel.n_sites, int(seed), tuple(vt), tuple(vy), tuple(rt), tuple(rb))


def forward_run(events: GraphicalEvents, eta0) -> np.ndarray:
    eta = np.array(eta0, dtype=np.uint8).tolist()
    if len(eta) != events.n_sites:
        raise ValueError("initial configuration has the wrong length")
    _, sites, kinds, aux = events.merged()
    for x, kind, a in zip(sites.tolist(), kinds.tolist(), aux.tolist()):
        eta[x] = eta[a] if kind == VOTE else a
    return np.array(eta, dtype=np.uint8)


def event_log_csv(events: GraphicalEvents, path=None) -> str:
    times, sites, kinds, aux = events.merged()
    names = {VOTE: "vote", RERAND: "rerand"}
    rows = ((s, names[k], tm, a) for tm, s, k, a in zip(times, sites.tolist(), kinds.tolist(), aux.tolist()))
    return write_csv(path, ["site", "kind", "time", "aux"], rows)


def gillespie_run(kernel: RateKernel, eta0, t: float, seed: int) -> np.ndarray:
    """Direct-method simulation of the single-site flip rates."""
    if t < 0:
        raise ValueError(f"time must be >= 0, got {t}")
    n = kernel.n_sites
    eta = np.array(eta0, dtype=np.uint8).tolist()
    if len(eta) != n:
        raise ValueError("initial configuration has the wrong length")
    out = kernel.out_edges()
    into = [[] for _ in range(n)]
    for x, edges in enumerate(out):
        for y, _ in edges:
            into[y].append(x)

    def rate(x):
        return 0.5 + sum(r for y, r in out[x] if eta[y] != eta[x])

    rates = [rate(x) for x in range(n)]
    rng = np.random.default_rng(seed)
    now = 0.0
    while True:
        total = sum(rates)
        now += rng.exponential(1.0 / total)
        if now > t:
            break
        target = rng.random() * total
        x = 0
        acc = rates[0]
        while acc <= target and x < n - 1:
            x += 1
            acc += rates[x]
        eta[x] ^= 1
        rates[x] = rate(x)
        for z in into[x]:
            rates[z] = rate(z)
    return np.array(eta, dtype=np.uint8)


def perfect_stationary_sample(kernel: RateKernel, seed: int) -> np.ndarray:
    """Exact draw from the stationary law by running the dual backward.

    Lineages start at every site at backward time 0 and follow arrows in
    reverse; a lineage takes the bit of the first rerandomization mark it
    meets.  Backward time is covered in segments ``(0, 4], (4, 8], (8, 16], ...``
    whose streams are fixed by ``(seed, site, segment)``, so extending the
    horizon never redraws events already used.
    """
    n = kernel.n_sites
    streams = _Substreams(seed)
    tables = _site_choice_tables(kernel)
    occupants = {x: [x] for x in range(n)}
    out = np.zeros(n, dtype=np.uint8)
    lo, hi, segment = 0.0, PERFECT_START_HORIZON, 0
    while occupants:
        width = hi - lo
        times, sites, kinds, aux = [], [], [], []
        for x in range(n):
            vt, vy = _vote_stream(streams.get(x, _SEGMENT_KIND_BASE + 2 * segment),
                                  *tables[x], kernel.exit_rate(x), width)
            rt, rb = _rerand_stream(streams.get(x, _SEGMENT_KIND_BASE + 2 * segment + 1), width)
            times += [vt, rt]
            sites += [np.full(len(vt), x), np.full(len(rt), x)]
            kinds += [np.full(len(vt), VOTE), np.full(len(rt), RERAND)]
            aux += [vy, rb]
        times = np.concatenate(times)
        order = np.argsort(times, kind="stable")
        sites = np.concatenate(sites)[order].tolist()
        kinds = np.concatenate(kinds)[order].tolist()
        aux = np.concatenate(aux)[order].tolist()
        for x, kind, a in zip(sites, kinds, aux):
            group = occupants.pop(x, None)
            if group is None:
                continue
            if kind == RERAND:
                out[group] = a
                if not occupants:
                    break
            else:
                occupants.setdefault(a, []).extend(group)
        lo, hi, segment = hi, 2 * hi, segment + 1
    return out


# -- vectorised batch samplers ------------------------------------------------

def _uniformized_tables(kernel: RateKernel):
    """Per-site option tables for uniformized updates at total rate ``n (1 + q_max)``.

    Option codes: ``-2`` rerandomize, ``-1`` no-op, ``y >= 0`` copy site ``y``.
    """
    n = kernel.n_sites
    scale = 1.0 + kernel.q_max
    edges = kernel.out_edges()
    width = 2 + max((len(e) for e in edges), default=0)
    cum = np.ones((n, width))
    codes = np.full((n, width), -1, dtype=np.int64)
    for x, e in enumerate(edges):
        probs = [1.0 / scale] + [r / scale for _, r in e]
        codes[x, 0] = -2
        codes[x, 1 : 1 + len(e)] = [y for y, _ in e]
        c = np.cumsum(probs)
        cum[x, : len(c)] = c
    return cum, codes


def _draw_options(rng, cum, codes, m):
    n = cum.shape[0]
    x = rng.integers(0, n, size=m)
    u = rng.random(m)
    j = (u[:, None] >= cum[x]).sum(axis=1)
    j = np.minimum(j, cum.shape[1] - 1)
    return x, codes[x, j]


def simulate_batch(kernel: RateKernel, eta0, t: float, n_samples: int, seed: int) -> np.ndarray:
    """``n_samples`` independent exact draws of the time-``t`` configuration.

    Uses uniformization: a Poisson number of update attempts, each at a
    uniform site, which rerandomizes, copies a target, or does nothing.
    """
    if t < 0:
        raise ValueError(f"time must be >= 0, got {t}")
    n = kernel.n_sites
    rng = np.random.default_rng(seed)
    eta = np.tile(np.asarray(eta0, dtype=np.uint8), (n_samples, 1))
    counts = rng.poisson(n * (1.0 + kernel.q_max) * t, size=n_samples)
    order = np.argsort(-counts, kind="stable")
    counts = counts[order]
    cum, codes = _uniformized_tables(kernel)
    rows_all = np.arange(n_samples)
    m = n_samples
    for k in range(int(counts.max(initial=0))):
        while m > 0 and counts[m - 1] <= k:
            m -= 1
        rows = rows_all[:m]
        x, code = _draw_options(rng, cum, codes, m)
        bits = rng.integers(0, 2, size=m, dtype=np.uint8)
        vote = code >= 0
        rr = code == -2
        eta[rows[vote], x[vote]] = eta[rows[vote], code[vote]]
        eta[rows[rr], x[rr]] = bits[rr]
    result = np.empty_like(eta)
    result[order] = eta
    return result


def perfect_stationary_batch(kernel: RateKernel, n_samples: int, seed: int) -> np.ndarray:
    """``n_samples`` exact stationary draws via the coalescing dual, vectorised.

    Only the embedded jump chain of the backward dynamics matters, so no
    times are drawn.  Each replica tracks which lineage cluster sits at every
    site; clusters merge on arrows and are resolved by rerandomization marks.
    """
    n = kernel.n_sites
    rng = np.random.default_rng(seed)
    cum, codes = _uniformized_tables(kernel)
    cluster_at = np.tile(np.arange(n, dtype=np.int64), (n_samples, 1))
    parent = cluster_at.copy()
    value = np.full((n_samples, n), -1, dtype=np.int8)
    remaining = np.full(n_samples, n, dtype=np.int64)
    live = np.arange(n_samples)
    step = 0
    while len(live):
        m = len(live)
        x, code = _draw_options(rng, cum, codes, m)
        bits = rng.integers(0, 2, size=m, dtype=np.int8)
        c = cluster_at[live, x]
        occupied = c >= 0
        rr = occupied & (code == -2)
        r_rows = live[rr]
        value[r_rows, c[rr]] = bits[rr]
        cluster_at[r_rows, x[rr]] = -1
        remaining[r_rows] -= 1
        mv = occupied & (code >= 0)
        m_rows, m_src, m_dst, m_c = live[mv], x[mv], code[mv], c[mv]
        d = cluster_at[m_rows, m_dst]
        empty = d < 0
        cluster_at[m_rows[empty], m_dst[empty]] = m_c[empty]
        merge = ~empty
        parent[m_rows[merge], m_c[merge]] = d[merge]
        remaining[m_rows[merge]] -= 1
        cluster_at[m_rows, m_src] = -1
        step += 1
        if step % 16 == 0 or m < 64:
            live = live[remaining[live] > 0]
    roots = np.tile(np.arange(n, dtype=np.int64), (n_samples, 1))
    rows = np.arange(n_samples)[:, None]
    while True:
        nxt = parent[rows, roots]
        if np.array_equal(nxt, roots):
            break
        roots = nxt
    return value[rows, roots].astype(np.uint8)


def configs_to_indices(configs) -> list[int]:
    configs = np.asarray(configs, dtype=np.int64)
    if configs.shape[1] <= 62:
        return (configs << np.arange(configs.shape[1])).sum(axis=1).tolist()
    return [int("".join(map(str, row[::-1].tolist())), 2) for row in configs]


def empirical_law(configs, n_sites: int) -> np.ndarray:
    idx = np.asarray(configs_to_indices(configs))
    return np.bincount(idx, minlength=1 << n_sites) / len(idx)


def write_samples_csv(path, configs) -> str:
    return write_csv(path, ["sample", "state_index"], enumerate(configs_to_indices(configs)))
