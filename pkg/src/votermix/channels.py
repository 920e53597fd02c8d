"""Noisy trees, stringy unfoldings and the explicit channel for the Y-shaped tree.

Spins live in {-1, +1}.  Probability tables index ``-1`` as 0 and ``+1`` as 1,
with axes ordered ``(root, leaf_0, leaf_1, ...)`` in the tree's leaf order.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._io import write_csv

MAX_EXHAUSTIVE_LEAVES = 4


class InvalidLabelError(ValueError):
    pass


def _check_theta(theta, allow_zero=False):
    lo_ok = theta >= 0 if allow_zero else theta > 0
    if not (lo_ok and theta <= 0.5):
        raise InvalidLabelError(f"flip probability {theta} outside (0, 1/2]")


@dataclass(frozen=True)
class NoisyTree:
    """Rooted tree in topological order: node 0 is the root, ``parents[i] < i``.

    ``thetas[i]`` labels the edge from ``parents[i]`` to ``i``; ``thetas[0]``
    is unused and stored as 0.
    """

    parents: tuple
    thetas: tuple
    labels: tuple = ()

    def __post_init__(self):
        if not self.parents or self.parents[0] != -1:
            raise ValueError("node 0 must be the root (parent -1)")
        if len(self.thetas) != len(self.parents):
            raise ValueError("one theta per node required")
        for i in range(1, len(self.parents)):
            if not 0 <= self.parents[i] < i:
                raise ValueError("parents must precede children")
            _check_theta(self.thetas[i], allow_zero=True)
        if not self.labels:
            object.__setattr__(self, "labels", tuple(range(len(self.parents))))

    @property
    def n_nodes(self) -> int:
        return len(self.parents)

    def children(self) -> list[list[int]]:
        kids = [[] for _ in self.parents]
        for i, p in enumerate(self.parents[1:], start=1):
            kids[p].append(i)
        return kids

    def leaves(self) -> list[int]:
        """Leaves in depth-first order, the axis order used by probability tables."""
        kids = self.children()
        out, stack = [], [0]
        while stack:
            v = stack.pop()
            if v and not kids[v]:
                out.append(v)
            stack.extend(reversed(kids[v]))
        return out

    def root_leaf_paths(self) -> list[list[int]]:
        paths = []
        for leaf in self.leaves():
            path = [leaf]
            while self.parents[path[-1]] > 0:
                path.append(self.parents[path[-1]])
            paths.append(path[::-1])
        return paths

    @classmethod
    def from_edges(cls, edges) -> "NoisyTree":
        """Build from ``(parent, child, theta)`` triples with arbitrary hashable labels."""
        edges = [(p, c, float(th)) for p, c, th in edges]
        children = {}
        child_set = set()
        for p, c, th in edges:
            if c in child_set:
                raise ValueError(f"node {c!r} has two parents")
            child_set.add(c)
            children.setdefault(p, []).append((c, th))
        roots = {p for p, _, _ in edges} - child_set
        if len(roots) != 1:
            raise ValueError("edge list must describe exactly one rooted tree")
        root = roots.pop()
        labels, parents, thetas = [root], [-1], [0.0]
        queue = [(root, 0)]
        while queue:
            node, idx = queue.pop(0)
            for c, th in children.get(node, []):
                labels.append(c)
                parents.append(idx)
                thetas.append(th)
                queue.append((c, len(labels) - 1))
        if len(labels) != len(edges) + 1:
            raise ValueError("edge list is not connected")
        return cls(tuple(parents), tuple(thetas), tuple(labels))

    def to_edges(self):
        return [(self.labels[p], self.labels[i], self.thetas[i])
                for i, p in enumerate(self.parents) if p >= 0]


def read_tree(path) -> NoisyTree:
    edges = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].split()
        if not line:
            continue
        if len(line) != 3:
            raise ValueError(f"line {lineno}: expected 'parent child theta'")
        edges.append((line[0], line[1], float(line[2])))
    return NoisyTree.from_edges(edges)


def write_tree(tree: NoisyTree, path=None) -> str:
    text = "".join(f"{p} {c} {th!r}\n" for p, c, th in tree.to_edges())
    if path is not None:
        Path(path).write_text(text)
    return text


@dataclass(frozen=True)
class StringyTree:
    """Edge-disjoint root-leaf paths; ``paths[k]`` lists the thetas from root to leaf k."""

    paths: tuple
    leaf_labels: tuple

    def as_tree(self) -> NoisyTree:
        parents, thetas, labels = [-1], [0.0], ["root"]
        for k, path in enumerate(self.paths):
            prev = 0
            for depth, th in enumerate(path):
                parents.append(prev)
                thetas.append(th)
                last = depth == len(path) - 1
                labels.append(self.leaf_labels[k] if last else f"path{k}.{depth}")
                prev = len(parents) - 1
        return NoisyTree(tuple(parents), tuple(thetas), tuple(labels))


def flip_prob_from_duration(s: float) -> float:
    """Flip probability of a lineage segment of length ``s``: ``(1 - e^{-s}) / 2``."""
    if s < 0:
        raise ValueError(f"duration must be >= 0, got {s}")
    return 0.5 * (1.0 - math.exp(-s))


def build_stringy(tree: NoisyTree) -> StringyTree:
    leaves = tree.leaves()
    if not leaves:
        raise ValueError("tree has no leaves")
    for th in tree.thetas[1:]:
        if th == 0:
            raise InvalidLabelError("zero flip probability on an edge")
    paths = tuple(tuple(tree.thetas[i] for i in p) for p in tree.root_leaf_paths())
    return StringyTree(paths, tuple(tree.labels[i] for i in leaves))


def sample_tree_spins(tree: NoisyTree, seed: int, n_samples: int | None = None) -> np.ndarray:
    """Spins at every node; shape ``(n_nodes,)`` or ``(n_samples, n_nodes)``."""
    rng = np.random.default_rng(seed)
    m = 1 if n_samples is None else n_samples
    spins = np.empty((m, tree.n_nodes), dtype=np.int8)
    spins[:, 0] = rng.choice(np.array([-1, 1], dtype=np.int8), size=m)
    for i in range(1, tree.n_nodes):
        flip = rng.random(m) < tree.thetas[i]
        spins[:, i] = np.where(flip, -spins[:, tree.parents[i]], spins[:, tree.parents[i]])
    return spins[0] if n_samples is None else spins


def leaf_likelihoods(tree: NoisyTree) -> np.ndarray:
    """``L[s, leaves...]``: probability of the leaf spins given root spin index ``s``."""
    kids = tree.children()

    def subtree(v):
        # table over (value at v, leaves below v in tree.leaves() order)
        if not kids[v]:
            return np.eye(2)
        table = np.ones((2,))
        for c in kids[v]:
            child = subtree(c)
            th = tree.thetas[c]
            given_parent = (1 - th) * child + th * child[::-1]
            left = table.reshape(table.shape + (1,) * (given_parent.ndim - 1))
            right = given_parent.reshape((2,) + (1,) * (table.ndim - 1) + given_parent.shape[1:])
            table = left * right
        return table

    return subtree(0)


def exhaustive_joint(tree: NoisyTree, max_leaves: int = MAX_EXHAUSTIVE_LEAVES) -> np.ndarray:
    """Exact joint law of ``(root, leaves...)`` with a uniform root spin."""
    n_leaves = len(tree.leaves())
    if n_leaves > max_leaves:
        raise ValueError(f"exhaustive table limited to {max_leaves} leaves, got {n_leaves}")
    return 0.5 * leaf_likelihoods(tree)


def conditional_leaf_law(joint: np.ndarray, root_spin: int) -> np.ndarray:
    row = joint[1 if root_spin > 0 else 0]
    return row / row.sum()


def spin_moment(joint: np.ndarray, axes) -> float:
    """``E[prod of spins on the given axes]`` read from a probability table."""
    total = 0.0
    for idx in itertools.product((0, 1), repeat=joint.ndim):
        sign = 1
        for a in axes:
            sign *= 1 if idx[a] else -1
        total += sign * joint[idx]
    return float(total)


def upsilon_tree(theta: float, theta1: float, theta2: float) -> NoisyTree:
    """Root --theta--> branch node, then --theta1--> leaf 1 and --theta2--> leaf 2."""
    for th in (theta, theta1, theta2):
        _check_theta(th)
    return NoisyTree((-1, 0, 1, 1), (0.0, theta, theta1, theta2), ("root", "branch", "leaf1", "leaf2"))


def upsilon_alpha(theta: float, theta1: float, theta2: float) -> float:
    """Mixing weight ``(1 - g1^2) / (1 - g^2 g1^2)`` with ``g = 1 - 2 theta``."""
    for th in (theta, theta1, theta2):
        _check_theta(th)
    if theta1 > theta2:
        raise ValueError("leaf labels must satisfy theta1 <= theta2; swap the leaves")
    if theta1 == 0.5 or theta2 == 0.5:
        raise ValueError("a leaf label of 1/2 needs the identity channel, not alpha")
    g, g1 = 1 - 2 * theta, 1 - 2 * theta1
    return (1 - g1 * g1) / (1 - g * g * g1 * g1)


@dataclass(frozen=True)
class UpsilonChannel:
    """Channel taking the stringy leaf pair to the Y-tree leaf pair.

    ``swapped`` records that the caller's leaves were reordered so that the
    less noisy leaf comes first; inputs and outputs stay in caller order.
    """

    alpha: float
    z_mean: float
    swapped: bool

    @property
    def is_identity(self) -> bool:
        return self.alpha == 1.0


def make_upsilon_channel(theta: float, theta1: float, theta2: float) -> UpsilonChannel:
    for th in (theta, theta1, theta2):
        _check_theta(th)
    swapped = theta1 > theta2
    if swapped:
        theta1, theta2 = theta2, theta1
    if theta1 == 0.5 or theta2 == 0.5:
        return UpsilonChannel(1.0, 1.0, swapped)
    z_mean = (1 - 2 * theta2) / (1 - 2 * theta1)
    return UpsilonChannel(upsilon_alpha(theta, theta1, theta2), z_mean, swapped)


def apply_upsilon_channel(stringy_leaves, alpha: float, z_mean: float, seed: int):
    """Keep leaf 1; leaf 2 stays with probability ``alpha``, else becomes ``leaf1 * z``.

    ``z`` is a +-1 variable with mean ``z_mean``.  Accepts scalars or arrays.
    """
    if not 0 <= alpha <= 1:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if not 0 < z_mean <= 1:
        raise ValueError(f"z_mean must lie in (0, 1], got {z_mean}")
    s1, s2 = (np.asarray(v) for v in stringy_leaves)
    rng = np.random.default_rng(seed)
    keep = rng.random(s1.shape) < alpha
    z = np.where(rng.random(s1.shape) < 0.5 * (1 + z_mean), 1, -1)
    out2 = np.where(keep, s2, s1 * z)
    if s1.ndim == 0:
        return int(s1), int(out2)
    return s1.copy(), out2


def channel_output_joint(stringy_joint: np.ndarray, channel: UpsilonChannel) -> np.ndarray:
    """Push an exact ``(root, leaf1, leaf2)`` table through the channel analytically."""
    table = stringy_joint.transpose(0, 2, 1) if channel.swapped else stringy_joint
    out = np.zeros((2, 2, 2))
    p_plus = 0.5 * (1 + channel.z_mean)
    for r, a, b in itertools.product((0, 1), repeat=3):
        p = table[r, a, b]
        out[r, a, b] += channel.alpha * p
        for z_idx, pz in ((1, p_plus), (0, 1 - p_plus)):
            # product of spins: same index when z = +1, opposite otherwise
            b_new = a if z_idx == 1 else 1 - a
            out[r, a, b_new] += (1 - channel.alpha) * p * pz
    return out.transpose(0, 2, 1) if channel.swapped else out


def upsilon_channel_discrepancy(theta: float, theta1: float, theta2: float) -> float:
    """Max over root spins of the conditional-law gap between channel output and the Y tree."""
    tree = upsilon_tree(theta, theta1, theta2)
    target = exhaustive_joint(tree)
    stringy = exhaustive_joint(build_stringy(tree).as_tree())
    produced = channel_output_joint(stringy, make_upsilon_channel(theta, theta1, theta2))
    return max(
        float(np.abs(conditional_leaf_law(produced, xi) - conditional_leaf_law(target, xi)).max())
        for xi in (-1, 1)
    )


def channel_grid_check(values=(0.1, 0.2, 0.3, 0.4, 0.5)):
    """Rows ``(theta, theta1, theta2, alpha, discrepancy)`` over the full cube."""
    rows = []
    for th, th1, th2 in itertools.product(values, repeat=3):
        ch = make_upsilon_channel(th, th1, th2)
        rows.append((th, th1, th2, ch.alpha, upsilon_channel_discrepancy(th, th1, th2)))
    return rows


def write_channel_csv(path, rows) -> str:
    return write_csv(path, ["theta", "theta1", "theta2", "alpha", "discrepancy"], rows)
