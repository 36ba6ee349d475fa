"""Subtree prune-and-regraft moves.

Every edge can be cut from either side, giving directed moves; destinations
are the edges of the remaining component.  Moves are classified by how far
the destination lies from the cut: adjacent destinations (type "i")
reproduce the source topology and are excluded from neighborhoods, type "ii"
destinations are one edge away (these are the NNI rearrangements; each
resulting topology arises from four distinct moves), and type "iii"
destinations are further (each reachable by exactly one move).

Regrafting splits the destination edge at its midpoint; the vacated node is
smoothed by merging its two remaining branches, and the pruned subtree keeps
its pendant branch length.  Total branch length is conserved.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .treemodel import (
    Tree,
    TreeError,
    canonical,
    edge_child_masks,
    rooted_orientation,
    split_set,
)

__all__ = [
    "SprMove",
    "WeightedNeighbor",
    "enumerate_moves",
    "apply_move_plain",
    "neighborhood_plain",
    "neighborhood_unique",
    "enumerate_nni",
    "nni_distance",
]

TYPE_I = "i"
TYPE_II = "ii"
TYPE_III = "iii"


@dataclass(frozen=True)
class SprMove:
    """One directed prune/regraft action on a specific tree."""

    cut_edge: int  # edge index being cut
    pruned_node: int  # endpoint of the cut edge on the pruned-subtree side
    dest_edge: int  # destination edge index (in the remaining component)
    move_type: str  # "i" | "ii" | "iii"


@dataclass(frozen=True)
class WeightedNeighbor:
    tree: Tree
    weight: Fraction
    provenance: SprMove | str  # the generating move, or "self"


def _require_sprable(tree: Tree) -> None:
    if tree.leaf_count < 4:
        raise TreeError("SPR operations need at least four leaves")


def enumerate_moves(tree: Tree) -> list[SprMove]:
    """All directed moves, deterministically ordered by canonical split keys.

    Counts per type follow the classification above: 6(m-2) type i,
    8(m-3) type ii, 4(m-3)(m-4) type iii, total (2m-3)(2m-4)."""
    _require_sprable(tree)
    adj = tree.adjacency()
    orient = rooted_orientation(tree)
    masks = edge_child_masks(tree, orient)
    child_of_edge = {}
    for node in orient.preorder:
        e = orient.parent_edge[node]
        if e >= 0:
            child_of_edge[e] = node
    full = (1 << tree.leaf_count) - 1

    def norm(mask: int) -> int:
        return full ^ mask if mask & 1 else mask

    moves = []
    for eidx, (u, v, _) in enumerate(tree.edges):
        for pruned, kept in ((u, v), (v, u)):
            if tree.is_leaf(kept):
                continue  # remaining side is a single leaf: nowhere to regraft
            dist = {kept: 0}
            frontier = [kept]
            while frontier:
                nxt = []
                for a in frontier:
                    for b, be in adj[a]:
                        if be != eidx and b not in dist:
                            dist[b] = dist[a] + 1
                            nxt.append(b)
                frontier = nxt
            for fidx, (p, q, _) in enumerate(tree.edges):
                if fidx == eidx or p not in dist or q not in dist:
                    continue
                d = min(dist[p], dist[q])
                mtype = TYPE_I if d == 0 else (TYPE_II if d == 1 else TYPE_III)
                moves.append(SprMove(eidx, pruned, fidx, mtype))

    def key(mv: SprMove):
        cmask = masks[mv.cut_edge]
        pmask = cmask if mv.pruned_node == child_of_edge[mv.cut_edge] else full ^ cmask
        return (norm(cmask), pmask, norm(masks[mv.dest_edge]))

    moves.sort(key=key)
    return moves


def _move_edges(tree: Tree, move: SprMove) -> list[tuple[int, int, float]]:
    if move.move_type == TYPE_I:
        raise TreeError("type-i moves reproduce the original topology")
    u, v, w_cut = tree.edges[move.cut_edge]
    if move.pruned_node == u:
        kept = v
    elif move.pruned_node == v:
        kept = u
    else:
        raise TreeError("pruned_node is not an endpoint of the cut edge")
    others = [(nbr, eidx) for nbr, eidx in tree.adjacency()[kept] if eidx != move.cut_edge]
    if len(others) != 2:
        raise TreeError("kept endpoint must be internal")
    (a, ea), (b, eb) = others
    if move.dest_edge in (move.cut_edge, ea, eb):
        raise TreeError("destination must not touch the vacated node")
    p, q, w_dest = tree.edges[move.dest_edge]
    dropped = {move.cut_edge, ea, eb, move.dest_edge}
    new_edges = [e for i, e in enumerate(tree.edges) if i not in dropped]
    new_edges.append((a, b, tree.edges[ea][2] + tree.edges[eb][2]))
    new_edges.append((p, kept, w_dest / 2.0))  # the vacated node becomes the junction
    new_edges.append((kept, q, w_dest / 2.0))
    new_edges.append((move.pruned_node, kept, w_cut))
    return new_edges


def apply_move_plain(tree: Tree, move: SprMove) -> Tree:
    """Apply a type ii/iii move with midpoint regrafting; see module docs."""
    return Tree._trusted(tree.labels, _move_edges(tree, move), tree.n_nodes)


def neighborhood_plain(tree: Tree) -> list[WeightedNeighbor]:
    """The tree itself (weight 1) plus every type ii/iii move result; type ii
    results carry weight 1/4 because each of their topologies appears as four
    length-variants, type iii results carry weight 1."""
    _require_sprable(tree)
    out = [WeightedNeighbor(tree, Fraction(1), "self")]
    for mv in enumerate_moves(tree):
        if mv.move_type == TYPE_I:
            continue
        weight = Fraction(1, 4) if mv.move_type == TYPE_II else Fraction(1)
        out.append(WeightedNeighbor(apply_move_plain(tree, mv), weight, mv))
    return out


def _result_split_keys(tree: Tree) -> dict[tuple[int, int, int], frozenset[int]]:
    """Split-set key of every type ii/iii move result, computed incrementally:
    a move only rewrites the splits of the two merged branches, the halved
    destination, and the branches on the path between them (whose sides gain
    or lose the pruned leaves)."""
    adj = tree.adjacency()
    orient = rooted_orientation(tree)
    masks = edge_child_masks(tree, orient)
    full = (1 << tree.leaf_count) - 1

    def norm(mask: int) -> int:
        return full ^ mask if mask & 1 else mask

    base = {norm(mask) for mask in masks}
    out: dict[tuple[int, int, int], frozenset[int]] = {}
    for eidx, (u, v, _) in enumerate(tree.edges):
        for pruned, kept in ((u, v), (v, u)):
            if tree.is_leaf(kept):
                continue
            # S = leaves of the pruned subtree
            side = masks[eidx]
            child = None
            for node in (u, v):
                if orient.parent_edge[node] == eidx:
                    child = node
            S = side if pruned == child else full ^ side
            # BFS with predecessor edges over the remaining component
            dist = {kept: 0}
            pred = {}
            frontier = [kept]
            while frontier:
                nxt = []
                for a in frontier:
                    for b, be in adj[a]:
                        if be != eidx and b not in dist:
                            dist[b] = dist[a] + 1
                            pred[b] = (a, be)
                            nxt.append(b)
                frontier = nxt
            (aa, ea), (bb, eb) = [(n, e) for n, e in adj[kept] if e != eidx]
            a_side = masks[ea] if masks[ea] & S == 0 else full ^ masks[ea]
            b_side = masks[eb] if masks[eb] & S == 0 else full ^ masks[eb]
            for fidx, (p, q, _) in enumerate(tree.edges):
                if fidx == eidx or p not in dist or q not in dist:
                    continue
                d = min(dist[p], dist[q])
                if d == 0:
                    continue  # type i
                near = p if dist[p] < dist[q] else q
                N = masks[fidx] if masks[fidx] & S == 0 else full ^ masks[fidx]
                merged = b_side if (N & a_side) == N else a_side
                splits = set(base)
                splits.discard(norm(masks[ea]))
                splits.discard(norm(masks[eb]))
                splits.discard(norm(masks[fidx]))
                # branches strictly between the vacated node and the
                # destination switch sides relative to the pruned leaves
                node = near
                while node != kept:
                    prev, pe = pred[node]
                    if prev != kept:  # the first path edge is one of ea/eb
                        g = masks[pe]
                        splits.discard(norm(g))
                        flipped = (g | S) if g & S == 0 else (g & ~S)
                        splits.add(norm(flipped))
                    node = prev
                splits.add(norm(merged))
                splits.add(norm(N))
                splits.add(norm(N | S))
                out[(eidx, pruned, fidx)] = frozenset(splits)
    return out


def grouped_neighbor_moves(tree: Tree) -> list[list[SprMove]]:
    """Type ii/iii moves grouped by the topology of their result, groups in
    first-occurrence order of the deterministic move enumeration."""
    _require_sprable(tree)
    keys = _result_split_keys(tree)
    groups: dict[frozenset[int], list[SprMove]] = {}
    order: list[frozenset[int]] = []
    for mv in enumerate_moves(tree):
        if mv.move_type == TYPE_I:
            continue
        key = keys[(mv.cut_edge, mv.pruned_node, mv.dest_edge)]
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(mv)
    return [groups[key] for key in order]


def neighborhood_unique(tree: Tree) -> list[Tree]:
    """The tree plus one representative per distinct neighbor topology
    (2(m-3)(2m-7) of them); representatives keep the midpoint-assigned
    branch lengths of their first generating move."""
    out = [tree]
    for moves in grouped_neighbor_moves(tree):
        out.append(apply_move_plain(tree, moves[0]))
    return out


def enumerate_nni(tree: Tree) -> list[Tree]:
    """One representative per distinct type-ii (NNI) neighbor topology."""
    _require_sprable(tree)
    seen: set[frozenset[int]] = set()
    out = []
    for mv in enumerate_moves(tree):
        if mv.move_type != TYPE_II:
            continue
        edges = _move_edges(tree, mv)
        key = split_set(tree.labels, edges)
        if key not in seen:
            seen.add(key)
            out.append(Tree._trusted(tree.labels, edges, tree.n_nodes))
    return out


def nni_distance(a: Tree, b: Tree, cap: int | None = None) -> int | None:
    """Shortest number of NNI rearrangements turning a's topology into b's,
    by breadth-first search; returns None when a cap is given and exceeded."""
    if sorted(a.labels) != sorted(b.labels):
        raise TreeError("trees must share a leaf set")
    if cap is None and a.leaf_count > 7:
        raise TreeError("uncapped NNI search is limited to seven leaves")
    target = canonical(b)
    if canonical(a) == target:
        return 0
    seen = {canonical(a)}
    frontier = [a]
    depth = 0
    while frontier:
        depth += 1
        if cap is not None and depth > cap:
            return None
        nxt = []
        for t in frontier:
            for nb in enumerate_nni(t):
                c = canonical(nb)
                if c == target:
                    return depth
                if c not in seen:
                    seen.add(c)
                    nxt.append(nb)
        frontier = nxt
    return None
