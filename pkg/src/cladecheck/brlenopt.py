"""Branch-length optimization for a fixed topology.

Each branch is maximized separately by bounded 1-D search (golden section
with parabolic steps) on the exact single-branch restriction of the
log-likelihood; sweeps repeat in a fixed depth-first order until the gain in
one round drops below the round tolerance.  A branch update is only accepted
when it improves the objective, so the log-likelihood never decreases.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import active as _kern
from .alignment import PatternTable
from .likelihood import FlatTree, flatten
from .treemodel import Tree, TreeError, rooted_orientation

__all__ = ["OptimizerConfig", "DEFAULT_CONFIG", "optimize_branch", "optimize_all"]


@dataclass(frozen=True)
class OptimizerConfig:
    min_length: float = 1e-8
    max_length: float = 50.0
    branch_tol: float = 1e-7  # absolute tolerance on a branch length
    round_tol: float = 1e-6  # stop when a full sweep gains less than this
    max_rounds: int = 32

    def __post_init__(self):
        if not (0 < self.min_length < self.max_length):
            raise ValueError("need 0 < min_length < max_length")
        if self.branch_tol <= 0 or self.round_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")


DEFAULT_CONFIG = OptimizerConfig()


def _two_leaf_coefficients(tree: Tree, table: PatternTable):
    col_of = {lab: i for i, lab in enumerate(table.labels)}
    s0 = table.patterns[:, col_of[tree.labels[0]]]
    s1 = table.patterns[:, col_of[tree.labels[1]]]
    beta = np.full(table.n_patterns, 0.25 * 0.25)
    alpha = np.where(s0 == s1, 0.25, 0.0) - beta
    return alpha, beta


def edge_coefficients(tree: Tree, table: PatternTable, edge_index: int):
    """Per-pattern (alpha, beta, log_scale) so that the site likelihood of the
    chosen edge at length v is x*alpha + beta with x = exp(-4v/3), up to the
    exp(log_scale) factor (constant in v)."""
    if tree.leaf_count == 2:
        alpha, beta = _two_leaf_coefficients(tree, table)
        return alpha, beta, np.zeros(table.n_patterns)
    u, v, _ = tree.edges[edge_index]

    def side(src: int, avoid: int):
        if tree.is_leaf(src):
            col = list(table.labels).index(tree.labels[src])
            part = np.zeros((table.n_patterns, 4))
            part[np.arange(table.n_patterns), table.patterns[:, col]] = 1.0
            return part, np.zeros(table.n_patterns)
        orient = rooted_orientation(tree, root=src, banned=avoid)
        n = tree.n_nodes
        kids_start = np.zeros(n + 1, dtype=np.int32)
        kids_flat: list[int] = []
        for node in range(n):
            kids_start[node] = len(kids_flat)
            kids_flat.extend(orient.children[node])
        kids_start[n] = len(kids_flat)
        lengths = np.zeros(n, dtype=np.float64)
        for node in orient.preorder:
            e = orient.parent_edge[node]
            if e >= 0:
                lengths[node] = tree.edges[e][2]
        col_of = {lab: i for i, lab in enumerate(table.labels)}
        leaf_col = np.array([col_of[lab] for lab in tree.labels], dtype=np.int32)
        post = np.array(orient.postorder_internal(tree), dtype=np.int32)
        part, scale = _kern.root_partial(
            np.ascontiguousarray(table.patterns),
            leaf_col,
            post,
            kids_start,
            np.array(kids_flat, dtype=np.int32),
            lengths,
            src,
            tree.leaf_count,
        )
        return np.asarray(part), np.asarray(scale)

    up, up_scale = side(u, v)
    down, down_scale = side(v, u)
    up = 0.25 * up  # uniform root prior on the up side
    sa = up.sum(axis=1)
    sd = down.sum(axis=1)
    beta = 0.25 * sa * sd
    alpha = (up * down).sum(axis=1) - beta
    return alpha, beta, up_scale + down_scale


def _counts(table: PatternTable) -> np.ndarray:
    return table.counts.astype(np.float64)


def optimize_branch(
    tree: Tree, edge_index: int, table: PatternTable, config: OptimizerConfig | None = None
) -> Tree:
    """Replace one branch length with its bounded 1-D maximizer.  The current
    length is kept whenever the search fails to improve on it, so the
    log-likelihood cannot decrease."""
    cfg = config or DEFAULT_CONFIG
    if not (0 <= edge_index < len(tree.edges)):
        raise TreeError(f"edge index {edge_index} out of range")
    alpha, beta, _ = edge_coefficients(tree, table, edge_index)
    counts = _counts(table)
    v0 = tree.edges[edge_index][2]
    f0 = _kern.edge_objective(alpha, beta, counts, v0)
    v1, f1 = _kern.maximize_edge(
        alpha, beta, counts, cfg.min_length, cfg.max_length, cfg.branch_tol
    )
    if f1 > f0:
        return tree.with_edge_length(edge_index, v1)
    return tree


def optimize_all(
    tree: Tree, table: PatternTable, config: OptimizerConfig | None = None
) -> tuple[Tree, float]:
    """Coordinate ascent over all branches; returns (tree, log-likelihood).

    The returned log-likelihood is never below the starting one and always
    equals ``log_likelihood`` of the returned tree."""
    cfg = config or DEFAULT_CONFIG
    if tree.leaf_count == 2:
        alpha, beta = _two_leaf_coefficients(tree, table)
        counts = _counts(table)
        v0 = tree.edges[0][2]
        f0 = _kern.edge_objective(alpha, beta, counts, v0)
        v1, f1 = _kern.maximize_edge(
            alpha, beta, counts, cfg.min_length, cfg.max_length, cfg.branch_tol
        )
        if f1 > f0:
            return tree.with_edge_length(0, v1), float(f1)
        return tree, float(f0)
    flat = flatten(tree, table)
    lengths = flat.lengths.copy()
    ll, _rounds = _kern.optimize_sweeps(
        flat.patterns,
        flat.leaf_col,
        flat.post_nodes,
        flat.kids_start,
        flat.kids,
        lengths,
        flat.root,
        flat.n_leaves,
        flat.counts,
        cfg.min_length,
        cfg.max_length,
        cfg.branch_tol,
        cfg.round_tol,
        cfg.max_rounds,
    )
    new_lengths = list(tree.edge_lengths())
    for node in range(tree.n_nodes):
        e = flat.tree_edge[node]
        if e >= 0:
            new_lengths[e] = float(lengths[node])
    return tree.with_edge_lengths(new_lengths), float(ll)
