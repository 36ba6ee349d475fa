"""Maximum-likelihood topology search.

Exhaustive search optimizes branch lengths on every topology (only feasible
through seven leaves); hill climbing walks the deduplicated SPR neighborhood
of the incumbent, fully re-optimizing every candidate, and stops at a local
optimum.  Ties are broken by topology text so results are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .alignment import Alignment, PatternTable, compress
from .brlenopt import DEFAULT_CONFIG, OptimizerConfig, optimize_all
from .likelihood import flatten, log_likelihood
from .spr import apply_move_plain, grouped_neighbor_moves
from .treemodel import Tree, TreeError, topology_newick

__all__ = ["SearchResult", "all_topologies", "exhaustive_ml", "hill_climb_ml"]

# Accepting a hill-climb step demands more than this much log-likelihood
# gain, so optimizer noise between equally good topologies cannot cycle.
_IMPROVEMENT_MARGIN = 1e-9

_INITIAL_LENGTH = 0.05


@dataclass
class SearchResult:
    tree: Tree
    log_likelihood: float
    topologies_evaluated: int
    method: str


def all_topologies(labels) -> list[Tree]:
    """Every unrooted binary topology on the given labels, by stepwise leaf
    insertion in label-list order; all branch lengths 0.05.  Limited to
    4..7 leaves ((2m-5)!! trees)."""
    labels = tuple(labels)
    m = len(labels)
    if not 4 <= m <= 7:
        raise TreeError("exhaustive enumeration covers 4..7 leaves")
    # Grow edge lists; leaf k keeps id k, internal ids count up from m.
    base = [(0, m, _INITIAL_LENGTH), (1, m, _INITIAL_LENGTH), (2, m, _INITIAL_LENGTH)]
    partials = [(base, m + 1)]
    for k in range(3, m):
        grown = []
        for edges, next_id in partials:
            for i in range(len(edges)):
                u, v, w = edges[i]
                new_edges = edges[:i] + edges[i + 1 :] + [
                    (u, next_id, w),
                    (next_id, v, w),
                    (next_id, k, _INITIAL_LENGTH),
                ]
                grown.append((new_edges, next_id + 1))
        partials = grown
    out = []
    for edges, _ in partials:
        tree = Tree(labels, [(u, v, _INITIAL_LENGTH) for u, v, _ in edges])
        out.append(tree)
    return out


def _as_table(data: Alignment | PatternTable) -> PatternTable:
    return data if isinstance(data, PatternTable) else compress(data)


def exhaustive_ml(data: Alignment | PatternTable, config: OptimizerConfig | None = None) -> SearchResult:
    """Optimize every topology and return the maximizer (exact for 4..7
    leaves); equal log-likelihoods break by topology text order."""
    cfg = config or DEFAULT_CONFIG
    table = _as_table(data)
    labels = tuple(sorted(table.labels))
    best = None
    best_key = None
    count = 0
    for t in all_topologies(labels):
        t_opt, ll = optimize_all(t, table, cfg)
        count += 1
        key = (-ll, topology_newick(t_opt))
        if best_key is None or key < best_key:
            best_key = key
            best = (t_opt, ll)
    return SearchResult(best[0], best[1], count, "exhaustive")


def _stepwise_addition_tree(table: PatternTable) -> Tree:
    """Greedy starting tree: insert leaves in sorted-label order, each onto
    the edge that maximizes the (unoptimized) likelihood of the partial tree."""
    labels = tuple(sorted(table.labels))
    m = len(labels)
    col_of = {lab: i for i, lab in enumerate(table.labels)}

    def sub_table(k: int) -> PatternTable:
        cols = [col_of[lab] for lab in labels[:k]]
        pats, inverse = np.unique(table.patterns[:, cols], axis=0, return_inverse=True)
        counts = np.zeros(len(pats), dtype=np.int64)
        np.add.at(counts, inverse, table.counts)
        return PatternTable(labels[:k], pats, counts)

    # Edge lists with final leaf ids (position in sorted labels); internal
    # ids use a high offset and get renumbered per materialization.
    offset = 1 << 20
    edges = [(0, offset, _INITIAL_LENGTH), (1, offset, _INITIAL_LENGTH), (2, offset, _INITIAL_LENGTH)]
    next_internal = offset + 1

    def materialize(edge_list, k: int) -> Tree:
        internal_ids = sorted({u for u, _, _ in edge_list if u >= offset} | {v for _, v, _ in edge_list if v >= offset})
        remap = {nid: k + i for i, nid in enumerate(internal_ids)}
        fixed = [
            (remap.get(u, u), remap.get(v, v), w)
            for u, v, w in edge_list
        ]
        return Tree._trusted(labels[:k], fixed, k + len(internal_ids))

    for k in range(3, m):
        tab_k = sub_table(k + 1)
        best_edges = None
        best_ll = None
        for i in range(len(edges)):
            u, v, w = edges[i]
            candidate = edges[:i] + edges[i + 1 :] + [
                (u, next_internal, w / 2.0),
                (next_internal, v, w / 2.0),
                (next_internal, k, _INITIAL_LENGTH),
            ]
            ll = log_likelihood(materialize(candidate, k + 1), tab_k)
            if best_ll is None or ll > best_ll:
                best_ll = ll
                best_edges = candidate
        edges = best_edges
        next_internal += 1
    return materialize(edges, m)


def hill_climb_ml(
    data: Alignment | PatternTable,
    start: Tree | None = None,
    config: OptimizerConfig | None = None,
) -> SearchResult:
    """SPR hill climbing with full neighbor re-optimization, deterministic
    given the start.  Default start: the first enumerated topology for up to
    seven leaves, a stepwise-addition tree otherwise."""
    cfg = config or DEFAULT_CONFIG
    table = _as_table(data)
    if start is None:
        if len(table.labels) <= 7:
            start = all_topologies(tuple(sorted(table.labels)))[0]
        else:
            start = _stepwise_addition_tree(table)
    incumbent, ll = optimize_all(start, table, cfg)
    evaluated = 1
    while True:
        best = None
        best_key = None
        for moves in grouped_neighbor_moves(incumbent):
            rep = apply_move_plain(incumbent, moves[0])
            t_opt, cand_ll = optimize_all(rep, table, cfg)
            evaluated += 1
            key = (-cand_ll, topology_newick(t_opt))
            if best_key is None or key < best_key:
                best_key = key
                best = (t_opt, cand_ll)
        if best is None or best[1] <= ll + _IMPROVEMENT_MARGIN:
            break
        incumbent, ll = best
    return SearchResult(incumbent, ll, evaluated, "hill-climb")
