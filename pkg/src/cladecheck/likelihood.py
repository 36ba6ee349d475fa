"""Tree log-likelihood under the Jukes-Cantor model.

``log_likelihood`` runs the conditional-likelihood (pruning) recursion over
compressed site patterns via the selected kernel backend;
``brute_force_log_likelihood`` is the independent oracle that sums over all
internal-state assignments and is only feasible for small trees.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from ._kernels import active as _kern
from .alignment import PatternTable
from .jc69 import transition_prob
from .treemodel import Tree, TreeError, default_root, rooted_orientation

__all__ = [
    "log_likelihood",
    "brute_force_log_likelihood",
    "FlatTree",
    "flatten",
]


@dataclass(eq=False)
class FlatTree:
    """Array view of a (tree, pattern table) pair rooted for traversal.

    ``lengths[c]`` is the branch length of the edge above node ``c`` in the
    rooted orientation; ``tree_edge[c]`` maps it back to ``tree.edges``.
    """

    tree: Tree
    table: PatternTable
    root: int
    n_leaves: int
    post_nodes: np.ndarray  # internal nodes, post-order, root last
    kids_start: np.ndarray
    kids: np.ndarray
    lengths: np.ndarray
    tree_edge: np.ndarray  # per-node parent edge index (-1 for root)
    leaf_col: np.ndarray
    patterns: np.ndarray
    counts: np.ndarray

    def loglik(self, lengths: np.ndarray | None = None) -> float:
        ln = self.lengths if lengths is None else lengths
        return float(
            _kern.full_loglik(
                self.patterns,
                self.leaf_col,
                self.post_nodes,
                self.kids_start,
                self.kids,
                ln,
                self.root,
                self.n_leaves,
                self.counts,
            )
        )


def _check_leaf_sets(tree: Tree, table: PatternTable) -> None:
    if sorted(tree.labels) != sorted(table.labels):
        raise TreeError(
            "tree leaves and alignment labels differ: "
            f"{sorted(tree.labels)} vs {sorted(table.labels)}"
        )


def flatten(tree: Tree, table: PatternTable, root: int | None = None) -> FlatTree:
    """Build the kernel-facing array representation (m >= 3)."""
    _check_leaf_sets(tree, table)
    if tree.leaf_count < 3:
        raise TreeError("flatten needs at least three leaves")
    if root is None:
        root = default_root(tree)
    if tree.is_leaf(root):
        raise TreeError("traversal root must be an internal node")
    orient = rooted_orientation(tree, root=root)
    n = tree.n_nodes
    kids_start = np.zeros(n + 1, dtype=np.int32)
    kids_flat: list[int] = []
    for u in range(n):
        kids_start[u] = len(kids_flat)
        kids_flat.extend(orient.children[u])
    kids_start[n] = len(kids_flat)
    lengths = np.zeros(n, dtype=np.float64)
    tree_edge = np.full(n, -1, dtype=np.int32)
    for u in range(n):
        e = orient.parent_edge[u]
        if e >= 0:
            lengths[u] = tree.edges[e][2]
            tree_edge[u] = e
    col_of = {lab: i for i, lab in enumerate(table.labels)}
    leaf_col = np.array([col_of[lab] for lab in tree.labels], dtype=np.int32)
    post_nodes = np.array(orient.postorder_internal(tree), dtype=np.int32)
    return FlatTree(
        tree=tree,
        table=table,
        root=root,
        n_leaves=tree.leaf_count,
        post_nodes=post_nodes,
        kids_start=kids_start,
        kids=np.array(kids_flat, dtype=np.int32),
        lengths=lengths,
        tree_edge=tree_edge,
        leaf_col=leaf_col,
        patterns=np.ascontiguousarray(table.patterns),
        counts=table.counts.astype(np.float64),
    )


def _two_leaf_loglik(tree: Tree, table: PatternTable) -> float:
    col_of = {lab: i for i, lab in enumerate(table.labels)}
    c0, c1 = (col_of[tree.labels[0]], col_of[tree.labels[1]])
    v = tree.edges[0][2]
    same = table.patterns[:, c0] == table.patterns[:, c1]
    p_same = transition_prob(0, 0, v)
    p_diff = transition_prob(0, 1, v)
    site = 0.25 * np.where(same, p_same, p_diff)
    with np.errstate(divide="ignore"):
        return float(table.counts.astype(np.float64) @ np.log(site))


def log_likelihood(tree: Tree, table: PatternTable, root: int | None = None) -> float:
    """log P(data | tree, branch lengths), natural log.

    The pruning root defaults to a deterministic internal node; under the
    reversible model any internal root gives the same value (``root`` is
    exposed so tests can verify that)."""
    if tree.leaf_count == 2:
        _check_leaf_sets(tree, table)
        return _two_leaf_loglik(tree, table)
    return flatten(tree, table, root=root).loglik()


def site_likelihoods(tree: Tree, table: PatternTable) -> np.ndarray:
    """Per-pattern site likelihoods (linear space); mirrors log_likelihood."""
    flat = flatten(tree, table)
    part, scale = _kern.root_partial(
        flat.patterns,
        flat.leaf_col,
        flat.post_nodes,
        flat.kids_start,
        flat.kids,
        flat.lengths,
        flat.root,
        flat.n_leaves,
    )
    return 0.25 * np.asarray(part).sum(axis=1) * np.exp(np.asarray(scale))


def brute_force_log_likelihood(tree: Tree, table: PatternTable) -> float:
    """Exact likelihood by summing over every internal-state assignment.

    Independent of the pruning code path: orients edges from leaf 0 and
    multiplies closed-form transition probabilities directly.  Restricted to
    six leaves (at most 4^4 assignments per pattern)."""
    _check_leaf_sets(tree, table)
    if tree.leaf_count > 6:
        raise TreeError("brute force oracle is limited to six leaves")
    col_of = {lab: i for i, lab in enumerate(table.labels)}
    internals = [u for u in range(tree.n_nodes) if not tree.is_leaf(u)]
    slot = {u: k for k, u in enumerate(internals)}
    edges = tree.edges  # edge direction is irrelevant: the matrix is symmetric
    total = 0.0
    for pat, count in zip(table.patterns, table.counts):
        def state(u: int, assign) -> int:
            if tree.is_leaf(u):
                return int(pat[col_of[tree.labels[u]]])
            return assign[slot[u]]

        site = 0.0
        for assign in product(range(4), repeat=len(internals)):
            prob = 0.25  # uniform prior anchored at leaf 0's observed state
            for u, v, w in edges:
                prob *= transition_prob(state(u, assign), state(v, assign), w)
                if prob == 0.0:
                    break
            site += prob
        if site <= 0.0:
            return float("-inf")
        total += float(count) * np.log(site)
    return float(total)
