"""Backward lineages of the graphical construction and their coalescence forest.

Backward time ``s`` corresponds to forward time ``t - s``.  The dual is read
off the same :class:`GraphicalEvents` as the forward run, so the duality
identity holds realization by realization, not only in law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._io import write_csv
from .chain_core import RateKernel
from .channels import NoisyTree, flip_prob_from_duration, leaf_likelihoods
from .exact_dist import tv
from .graphical import RERAND, GraphicalEvents, _site_choice_tables, sample_events

MAX_FOREST_LAW_SITES = 12


@dataclass
class _Lineage:
    born: float  # backward time the lineage starts (0 for a site, merge time otherwise)
    history: list  # [(s, location)] starting at (born, start location)
    children: tuple = ()
    site: int | None = None
    merged_at: float | None = None
    parent: int | None = None
    unresolved: list | None = None


@dataclass(frozen=True)
class DualTrace:
    """Lineage paths with their first rerandomization marks.

    ``paths[x]`` lists ``(s, location)`` jump points of the lineage of site
    ``x``, starting at ``(0, x)``.  ``rerand_time[x]`` is the backward time of
    the first rerandomization met, or ``None`` when the lineage reaches
    time 0 untouched, in which case ``rerand_bit[x]`` is ``None`` too.
    """

    horizon: float
    n_sites: int
    events: GraphicalEvents
    paths: tuple
    rerand_time: tuple
    rerand_bit: tuple
    lineages: tuple

    def location(self, x: int, s: float) -> int:
        """Position ``B^{x,t}_s`` of the lineage from ``x`` at backward time ``s``."""
        loc = x
        for when, where in self.paths[x]:
            if when > s:
                break
            loc = where
        return loc

    def endpoint(self, x: int) -> int:
        return self.paths[x][-1][1]

    def rerandomized(self, x: int) -> bool:
        return self.rerand_time[x] is not None

    def lineage_at(self, x: int, s: float) -> int:
        """Id of the lineage carrying site ``x`` at backward time ``s``; merged lineages share ids."""
        cid = x
        while self.lineages[cid].parent is not None and self.lineages[cid].merged_at <= s:
            cid = self.lineages[cid].parent
        return cid

    def root_id(self, x: int) -> int:
        cid = x
        while self.lineages[cid].parent is not None:
            cid = self.lineages[cid].parent
        return cid


def dual_from_events(events: GraphicalEvents) -> DualTrace:
    t = events.horizon
    n = events.n_sites
    lineages = [_Lineage(0.0, [(0.0, x)], site=x, unresolved=[x]) for x in range(n)]
    at = {x: x for x in range(n)}  # location -> live lineage id
    e = [None] * n
    z = [None] * n
    times, sites, kinds, aux = events.merged()
    for u, w, kind, a in zip(times[::-1].tolist(), sites[::-1].tolist(),
                             kinds[::-1].tolist(), aux[::-1].tolist()):
        cid = at.get(w)
        if cid is None:
            continue
        s = t - u
        lin = lineages[cid]
        if kind == RERAND:
            for x in lin.unresolved:
                e[x], z[x] = s, a
            lin.unresolved = []
            continue
        del at[w]
        other = at.get(a)
        if other is None:
            lin.history.append((s, a))
            at[a] = cid
            continue
        new_id = len(lineages)
        merged = _Lineage(s, [(s, a)], children=(cid, other),
                          unresolved=lin.unresolved + lineages[other].unresolved)
        for c in (cid, other):
            lineages[c].merged_at = s
            lineages[c].parent = new_id
            lineages[c].unresolved = []
        lineages.append(merged)
        at[a] = new_id

    paths = []
    for x in range(n):
        path, cid = [], x
        while cid is not None:
            for point in lineages[cid].history:
                if not path or path[-1][1] != point[1]:
                    path.append(point)
            cid = lineages[cid].parent
        paths.append(tuple(path))
    return DualTrace(t, n, events, tuple(paths), tuple(e), tuple(z), tuple(lineages))


def sample_dual(kernel: RateKernel, t: float, seed: int) -> DualTrace:
    return dual_from_events(sample_events(kernel, t, seed))


def dual_sample_config(trace: DualTrace, eta0) -> np.ndarray:
    """``eta_t(x) = Z(x, t)`` if the lineage was rerandomized, else ``eta0`` at its endpoint."""
    eta0 = np.asarray(eta0, dtype=np.uint8)
    if len(eta0) != trace.n_sites:
        raise ValueError("initial configuration has the wrong length")
    return np.array([trace.rerand_bit[x] if trace.rerandomized(x) else eta0[trace.endpoint(x)]
                     for x in range(trace.n_sites)], dtype=np.uint8)


@dataclass(frozen=True)
class ForestNode:
    site: int
    time: float  # forward time
    parent: int | None
    kind: str  # "leaf", "branch" or "root"


@dataclass(frozen=True)
class CoalescenceForest:
    """Nodes with forward times; edge durations are ``child.time - parent.time``."""

    horizon: float
    n_sites: int
    nodes: tuple
    roots: tuple  # node index of each tree's root
    leaf_node: tuple  # node index of each site's leaf

    def duration(self, i: int) -> float:
        node = self.nodes[i]
        return node.time - self.nodes[node.parent].time

    def tree_of(self) -> list[int]:
        """Tree index for every node."""
        root_pos = {r: k for k, r in enumerate(self.roots)}
        out = []
        for i in range(len(self.nodes)):
            j = i
            while self.nodes[j].parent is not None:
                j = self.nodes[j].parent
            out.append(root_pos[j])
        return out

    def tree_sites(self) -> list[list[int]]:
        owner = self.tree_of()
        groups = [[] for _ in self.roots]
        for x, leaf in enumerate(self.leaf_node):
            groups[owner[leaf]].append(x)
        return groups

    def as_noisy_tree(self, k: int) -> NoisyTree:
        """Tree ``k`` with edge flips ``(1 - e^{-duration}) / 2``; labels are node indices."""
        owner = self.tree_of()
        members = sorted((i for i in range(len(self.nodes)) if owner[i] == k),
                         key=lambda i: (self.nodes[i].time, i))
        pos = {i: j for j, i in enumerate(members)}
        parents = tuple(-1 if self.nodes[i].parent is None else pos[self.nodes[i].parent]
                        for i in members)
        thetas = tuple(0.0 if self.nodes[i].parent is None
                       else flip_prob_from_duration(self.duration(i)) for i in members)
        return NoisyTree(parents, thetas, tuple(members))


def extract_forest(trace: DualTrace) -> CoalescenceForest:
    t = trace.horizon
    nodes = []
    node_of = {}
    for cid, lin in enumerate(trace.lineages):
        kind = "leaf" if lin.site is not None else "branch"
        node_of[cid] = len(nodes)
        nodes.append([lin.history[0][1], t - lin.born, None, kind])
    roots = []
    for cid, lin in enumerate(trace.lineages):
        if lin.parent is None:
            roots.append(len(nodes))
            nodes[node_of[cid]][2] = len(nodes)
            nodes.append([lin.history[-1][1], 0.0, None, "root"])
        else:
            nodes[node_of[cid]][2] = node_of[lin.parent]
    frozen = tuple(ForestNode(*nd) for nd in nodes)
    return CoalescenceForest(t, trace.n_sites, frozen, tuple(roots),
                             tuple(node_of[x] for x in range(trace.n_sites)))


def tree_indexed_sample(forest: CoalescenceForest, root_bits, seed: int) -> np.ndarray:
    """Run the retain-or-rerandomize chain down the forest from the given root bits.

    Along an edge of duration ``d`` the child copies its parent with
    probability ``(1 + e^{-d}) / 2``.  ``root_bits[k]`` is the value at tree
    ``k``'s root; the result is the configuration at the leaves.
    """
    if len(root_bits) != len(forest.roots):
        raise ValueError(f"need {len(forest.roots)} root bits, got {len(root_bits)}")
    rng = np.random.default_rng(seed)
    value = {}
    for k, r in enumerate(forest.roots):
        value[r] = int(root_bits[k])
    order = sorted(range(len(forest.nodes)), key=lambda i: (forest.nodes[i].time, i))
    for i in order:
        if i in value:
            continue
        p = value[forest.nodes[i].parent]
        keep = rng.random() < 0.5 * (1 + math.exp(-forest.duration(i)))
        value[i] = p if keep else 1 - p
    return np.array([value[forest.leaf_node[x]] for x in range(forest.n_sites)], dtype=np.uint8)


def _check_law_capacity(n):
    if n > MAX_FOREST_LAW_SITES:
        raise ValueError(f"exact leaf laws limited to {MAX_FOREST_LAW_SITES} sites, got {n}")


def forest_leaf_law(forest: CoalescenceForest, root_bits) -> np.ndarray:
    """Exact law of the tree-indexed chain at the leaves, indexed by configuration."""
    _check_law_capacity(forest.n_sites)
    law = np.ones(1)
    sites_order = []
    for k in range(len(forest.roots)):
        tree = forest.as_noisy_tree(k)
        table = leaf_likelihoods(tree)[int(root_bits[k])]
        leaf_sites = [forest.nodes[tree.labels[i]].site for i in tree.leaves()]
        law = np.multiply.outer(law, table).reshape(-1)
        sites_order.extend(leaf_sites)
    return _to_index_order(law, sites_order)


def stringy_leaf_law(forest: CoalescenceForest, root_bits) -> np.ndarray:
    """Leaves copy their own tree's root independently with probability ``(1 + e^{-t}) / 2``."""
    _check_law_capacity(forest.n_sites)
    keep = 0.5 * (1 + math.exp(-forest.horizon))
    law = np.ones(1)
    sites_order = []
    for k, sites in enumerate(forest.tree_sites()):
        b = int(root_bits[k])
        single = np.array([keep, 1 - keep]) if b == 0 else np.array([1 - keep, keep])
        for x in sites:
            law = np.multiply.outer(law, single).reshape(-1)
            sites_order.append(x)
    return _to_index_order(law, sites_order)


def _to_index_order(law, sites_order):
    """Reorder a C-ordered table over ``sites_order`` into ``sum eta(i) 2^i`` indexing."""
    n = len(sites_order)
    table = law.reshape((2,) * n)
    # axis for site i must become axis n-1-i so that C order puts site 0 last (lowest bit)
    perm = [sites_order.index(n - 1 - a) for a in range(n)]
    return np.ascontiguousarray(table.transpose(perm)).reshape(-1)


def forest_stringy_comparison(forest: CoalescenceForest, bits_a, bits_b) -> tuple[float, float]:
    """TV between two root assignments, under the forest chain and the stringy process."""
    return (tv(forest_leaf_law(forest, bits_a), forest_leaf_law(forest, bits_b)),
            tv(stringy_leaf_law(forest, bits_a), stringy_leaf_law(forest, bits_b)))


def coalescing_walks(kernel: RateKernel, horizon: float, seed: int, pair=(0, 1)):
    """Coalescing q-walks from every site, run for backward time ``horizon``.

    Samples the lineage system of the dual directly (same law as the paths of
    :func:`sample_dual`, without rerandomization marks).  Jumps are proposed
    at rate ``q_max`` per lineage and thinned to ``q(x)``.  Returns
    ``(all_time, pair_time)``: the time the last two lineages merge and the
    time the lineages of ``pair`` meet, each ``math.inf`` if it does not
    happen by ``horizon``.
    """
    n = kernel.n_sites
    rng = np.random.default_rng(seed)
    q_max = kernel.q_max
    if n == 1:
        return 0.0, 0.0
    if q_max == 0:
        return math.inf, math.inf
    tables = _site_choice_tables(kernel)
    exit_rates = kernel.exit_rates.tolist()
    live = list(range(n))  # live lineage ids; id x starts at site x
    pos = list(range(n))  # site of lineage id
    slot = list(range(n))  # index of id in ``live``
    at = {x: x for x in range(n)}
    boss = list(range(n))

    def find(i):
        while boss[i] != i:
            boss[i] = boss[boss[i]]
            i = boss[i]
        return i

    a, b = pair
    pair_time = math.inf
    now = 0.0
    while len(live) > 1:
        now += rng.exponential(1.0 / (len(live) * q_max))
        if now > horizon:
            return math.inf, pair_time
        i = live[int(rng.random() * len(live))]
        x = pos[i]
        if rng.random() * q_max >= exit_rates[x]:
            continue
        targets, cum = tables[x]
        y = int(targets[min(int(np.searchsorted(cum, rng.random(), side="right")), len(targets) - 1)])
        del at[x]
        j = at.get(y)
        if j is None:
            pos[i] = y
            at[y] = i
            continue
        # lineage i joins lineage j
        boss[find(i)] = find(j)
        k = slot[i]
        last = live.pop()
        if last != i:
            live[k] = last
            slot[last] = k
        if pair_time == math.inf and find(a) == find(b):
            pair_time = now
    return now, pair_time


@dataclass(frozen=True)
class CoalescenceStats:
    """Monte Carlo summary of coalescing lineages up to backward time ``horizon``.

    ``mean_pair_time`` averages ``min(meeting time of the pair, horizon)``;
    ``mean_all_time`` averages the full coalescence time over the seeds where
    it happened (``nan`` if none did).
    """

    n_seeds: int
    horizon: float
    p_all_coalesced: float
    p_all_stderr: float
    mean_all_time: float
    mean_all_stderr: float
    mean_pair_time: float
    mean_pair_stderr: float


def _mean_se(values):
    values = np.asarray(values, dtype=float)
    if len(values) == 0:
        return math.nan, math.nan
    se = values.std(ddof=1) / math.sqrt(len(values)) if len(values) > 1 else 0.0
    return float(values.mean()), float(se)


def coalescence_stats(kernel: RateKernel, t: float, n_seeds: int, seed: int = 0,
                      pair=(0, 1)) -> CoalescenceStats:
    if n_seeds < 1:
        raise ValueError(f"n_seeds must be >= 1, got {n_seeds}")
    all_times, pair_times = [], []
    for k in range(n_seeds):
        all_t, pair_t = coalescing_walks(kernel, t, seed + k, pair)
        all_times.append(all_t)
        pair_times.append(min(pair_t, t))
    done = [v for v in all_times if v <= t]
    p, p_se = _mean_se([v <= t for v in all_times])
    mean_all, mean_all_se = _mean_se(done)
    mean_pair, mean_pair_se = _mean_se(pair_times)
    return CoalescenceStats(n_seeds, float(t), p, p_se, mean_all, mean_all_se, mean_pair, mean_pair_se)


def write_forest_csv(forest: CoalescenceForest, path=None) -> str:
    rows = []
    for i, nd in enumerate(forest.nodes):
        parent = "" if nd.parent is None else nd.parent
        dur = float("nan") if nd.parent is None else forest.duration(i)
        rows.append((i, nd.kind, nd.site, nd.time, parent, dur))
    return write_csv(path, ["node", "kind", "site", "time", "parent", "duration"], rows)
