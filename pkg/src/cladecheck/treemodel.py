"""Unrooted binary trees with labeled leaves.

Construction and validation, Newick parsing/serialization, topology
identity via leaf-set splits, and the balanced tree families used by the
simulation scenarios.

Node convention: a tree on m leaves numbers its leaves 0..m-1 (leaf i
carries ``labels[i]``); internal nodes follow.  Edges are ``(u, v, length)``
triples with length in expected substitutions per site.  Trees are treated
as immutable values: every modifying operation returns a new instance.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

__all__ = [
    "Tree",
    "TreeError",
    "NewickError",
    "CanonicalTopology",
    "Orientation",
    "parse_newick",
    "write_newick",
    "topology_newick",
    "canonical",
    "rooted_orientation",
    "balanced_tree",
    "c_tree",
    "count_topologies",
]

_LABEL_RE = re.compile(r"[A-Za-z0-9_.\-]+")
_NUMBER_RE = re.compile(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?")


class TreeError(ValueError):
    """Invalid tree structure or an operation applied to an unsuitable tree."""


class NewickError(TreeError):
    """Malformed Newick text; ``position`` is the 0-based offending index."""

    def __init__(self, message: str, position: int | None = None):
        if position is not None:
            message = f"{message} (position {position})"
        super().__init__(message)
        self.position = position


class Tree:
    """Unrooted leaf-labeled tree with non-negative branch lengths."""

    __slots__ = ("labels", "edges", "n_nodes", "_adj")

    def __init__(self, labels, edges):
        labels = tuple(str(lab) for lab in labels)
        if len(labels) < 2:
            raise TreeError("a tree needs at least two leaves")
        if any(not lab for lab in labels):
            raise TreeError("empty leaf label")
        if len(set(labels)) != len(labels):
            raise TreeError("duplicate leaf labels")
        norm = []
        max_node = len(labels) - 1
        for u, v, w in edges:
            u, v, w = int(u), int(v), float(w)
            if u == v:
                raise TreeError("self-loop edge")
            if u < 0 or v < 0:
                raise TreeError("negative node id")
            if not math.isfinite(w):
                raise TreeError(f"non-finite branch length {w!r}")
            if w < 0:
                raise TreeError(f"negative branch length {w!r}")
            norm.append((u, v, w))
            max_node = max(max_node, u, v)
        self.labels = labels
        self.edges = tuple(norm)
        self.n_nodes = max_node + 1
        self._adj = None

    @property
    def leaf_count(self) -> int:
        return len(self.labels)

    def is_leaf(self, node: int) -> bool:
        return node < len(self.labels)

    def adjacency(self) -> list[list[tuple[int, int]]]:
        """Per-node list of (neighbor, edge index), cached."""
        if self._adj is None:
            adj: list[list[tuple[int, int]]] = [[] for _ in range(self.n_nodes)]
            for idx, (u, v, _) in enumerate(self.edges):
                adj[u].append((v, idx))
                adj[v].append((u, idx))
            self._adj = adj
        return self._adj

    def validate(self) -> None:
        """Check the full structural invariants; raises TreeError on violation."""
        m = self.leaf_count
        expected_nodes = 2 if m == 2 else 2 * m - 2
        expected_edges = 1 if m == 2 else 2 * m - 3
        if self.n_nodes != expected_nodes:
            raise TreeError(f"expected {expected_nodes} nodes, have {self.n_nodes}")
        if len(self.edges) != expected_edges:
            raise TreeError(f"expected {expected_edges} edges, have {len(self.edges)}")
        adj = self.adjacency()
        for node in range(self.n_nodes):
            deg = len(adj[node])
            if self.is_leaf(node):
                if deg != 1:
                    raise TreeError(f"leaf {node} has degree {deg}")
            elif deg != 3:
                raise TreeError(f"internal node {node} has degree {deg}")
        # Connectivity; together with the edge count this implies acyclicity.
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for v, _ in adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        if len(seen) != self.n_nodes:
            raise TreeError("tree is not connected")

    def edge_lengths(self) -> tuple[float, ...]:
        return tuple(w for _, _, w in self.edges)

    def total_length(self) -> float:
        return sum(w for _, _, w in self.edges)

    @classmethod
    def _trusted(cls, labels: tuple[str, ...], edges, n_nodes: int) -> "Tree":
        """Constructor bypassing normalization for already-validated pieces
        (internal use on hot paths)."""
        t = cls.__new__(cls)
        t.labels = labels
        t.edges = tuple(edges)
        t.n_nodes = n_nodes
        t._adj = None
        return t

    def with_edge_length(self, edge_index: int, length: float) -> "Tree":
        """Copy of this tree with one branch length replaced."""
        u, v, _ = self.edges[edge_index]
        edges = list(self.edges)
        edges[edge_index] = (u, v, float(length))
        return Tree(self.labels, edges)

    def with_edge_lengths(self, lengths) -> "Tree":
        if len(lengths) != len(self.edges):
            raise TreeError("length list does not match edge count")
        edges = [(u, v, float(w)) for (u, v, _), w in zip(self.edges, lengths)]
        return Tree(self.labels, edges)

    def __repr__(self) -> str:
        return f"Tree({self.leaf_count} leaves, {len(self.edges)} edges)"


@dataclass
class Orientation:
    """A rooted view of an unrooted tree for traversal purposes.

    ``children[u]`` lists child nodes in deterministic order (by smallest
    descendant label); ``parent_edge[u]`` is the tree edge index of the edge
    above ``u`` (-1 for the root).  ``preorder`` starts at the root.
    """

    root: int
    parent: list[int]
    parent_edge: list[int]
    children: list[list[int]]
    preorder: list[int] = field(default_factory=list)

    def postorder_internal(self, tree: Tree) -> list[int]:
        return [u for u in reversed(self.preorder) if not tree.is_leaf(u)]


def _min_label_leaf(tree: Tree) -> int:
    return min(range(tree.leaf_count), key=lambda i: tree.labels[i])


def default_root(tree: Tree) -> int:
    """Deterministic traversal root: the internal node attached to the
    alphabetically smallest leaf (that leaf itself for two-leaf trees)."""
    anchor = _min_label_leaf(tree)
    if tree.leaf_count == 2:
        return anchor
    return tree.adjacency()[anchor][0][0]


def rooted_orientation(tree: Tree, root: int | None = None, banned: int | None = None) -> Orientation:
    """Orient the tree from ``root``; ``banned`` excludes one neighbor of the
    root (used to take the partial view on one side of an edge)."""
    if root is None:
        root = default_root(tree)
    adj = tree.adjacency()
    parent = [-1] * tree.n_nodes
    parent_edge = [-1] * tree.n_nodes
    children: list[list[int]] = [[] for _ in range(tree.n_nodes)]
    order = [root]
    parent[root] = root
    if banned is not None:
        parent[banned] = root  # pretend visited so traversal skips it
    i = 0
    while i < len(order):
        u = order[i]
        i += 1
        for v, eidx in adj[u]:
            if parent[v] == -1:
                parent[v] = u
                parent_edge[v] = eidx
                children[u].append(v)
                order.append(v)
    parent[root] = -1
    # Deterministic child order: by the smallest leaf label in each subtree.
    min_label: list[str | None] = [None] * tree.n_nodes
    for u in reversed(order):
        if tree.is_leaf(u):
            min_label[u] = tree.labels[u]
        elif children[u]:
            min_label[u] = min(min_label[c] for c in children[u])
        else:  # pragma: no cover - internal node with all neighbors banned
            min_label[u] = ""
    for u in order:
        children[u].sort(key=lambda c: min_label[c])
    # Rebuild preorder honoring the sorted child order.
    preorder = []
    stack = [root]
    while stack:
        u = stack.pop()
        preorder.append(u)
        for c in reversed(children[u]):
            stack.append(c)
    return Orientation(root, parent, parent_edge, children, preorder)


# ---------------------------------------------------------------------------
# Newick I/O
# ---------------------------------------------------------------------------


def parse_newick(text: str) -> Tree:
    """Parse a Newick string into an unrooted Tree.

    A rooted (two-child) top level is converted to unrooted form by merging
    the two root-incident branches into one of summed length.  Missing
    ``:length`` annotations default to 0.  Internal node labels are accepted
    and discarded.
    """
    s = text
    n = len(s)
    pos = 0

    def skip_ws() -> None:
        nonlocal pos
        while pos < n and s[pos].isspace():
            pos += 1

    def parse_length() -> float:
        nonlocal pos
        skip_ws()
        mobj = _NUMBER_RE.match(s, pos)
        if mobj is None:
            raise NewickError("expected a branch length after ':'", pos)
        at = pos
        pos = mobj.end()
        value = float(mobj.group())
        if value < 0:
            raise NewickError(f"negative branch length {mobj.group()}", at)
        return value

    # Parse into (children, label, length) tuples; children is None for leaves.
    def parse_clade():
        nonlocal pos
        skip_ws()
        if pos >= n:
            raise NewickError("unexpected end of input", pos)
        if s[pos] == "(":
            pos += 1
            kids = [parse_clade()]
            skip_ws()
            while pos < n and s[pos] == ",":
                pos += 1
                kids.append(parse_clade())
                skip_ws()
            if pos >= n or s[pos] != ")":
                raise NewickError("expected ',' or ')'", pos)
            pos += 1
            skip_ws()
            mobj = _LABEL_RE.match(s, pos)
            if mobj is not None:  # internal node label: accepted, discarded
                pos = mobj.end()
                skip_ws()
            length = 0.0
            if pos < n and s[pos] == ":":
                pos += 1
                length = parse_length()
            return (kids, None, length)
        mobj = _LABEL_RE.match(s, pos)
        if mobj is None:
            raise NewickError(f"unexpected character {s[pos]!r}", pos)
        label = mobj.group()
        pos = mobj.end()
        skip_ws()
        length = 0.0
        if pos < n and s[pos] == ":":
            pos += 1
            length = parse_length()
        return (None, label, length)

    skip_ws()
    top = parse_clade()
    skip_ws()
    if pos >= n or s[pos] != ";":
        raise NewickError("expected ';'", pos)
    pos += 1
    skip_ws()
    if pos != n:
        raise NewickError("trailing characters after ';'", pos)

    if top[0] is None:
        raise NewickError("a single leaf is not a tree")
    top_kids = top[0]
    if len(top_kids) < 2:
        raise NewickError("unifurcating root")
    if len(top_kids) > 3:
        raise NewickError("multifurcating root (more than three children)")

    # First pass: collect leaf labels in appearance order.
    labels: list[str] = []

    def collect(node):
        kids, label, _ = node
        if kids is None:
            if label in labels_seen:
                raise NewickError(f"duplicate leaf label {label!r}")
            labels_seen.add(label)
            labels.append(label)
        else:
            if len(kids) == 1:
                raise NewickError("unifurcating internal node")
            for kid in kids:
                collect(kid)

    labels_seen: set[str] = set()
    for kid in top_kids:
        collect(kid)
    m = len(labels)

    # Second pass: assign node ids (leaves 0..m-1, internals from m) and emit
    # edges; non-root internal nodes must be binary.
    leaf_id = {lab: i for i, lab in enumerate(labels)}
    next_internal = [m + 1 if len(top_kids) == 3 else m]
    edges: list[tuple[int, int, float]] = []

    def build(node) -> int:
        kids, label, _ = node
        if kids is None:
            return leaf_id[label]
        if len(kids) != 2:
            raise NewickError("multifurcating internal node (unsupported)")
        my_id = next_internal[0]
        next_internal[0] += 1
        for kid in kids:
            edges.append((my_id, build(kid), kid[2]))
        return my_id

    if len(top_kids) == 3:
        root = m
        for kid in top_kids:
            edges.append((root, build(kid), kid[2]))
    else:
        a, b = top_kids
        edges.append((build(a), build(b), a[2] + b[2]))

    tree = Tree(labels, edges)
    tree.validate()
    return tree


def _format_length(w: float) -> str:
    return repr(w)


def _serialize(tree: Tree, with_lengths: bool) -> str:
    if tree.leaf_count == 2:
        a, b = sorted(tree.labels)
        if not with_lengths:
            return f"({a},{b});"
        half = tree.edges[0][2] / 2.0
        return f"({a}:{_format_length(half)},{b}:{_format_length(half)});"
    orient = rooted_orientation(tree)

    def render(node: int) -> str:
        if tree.is_leaf(node):
            return tree.labels[node]
        parts = []
        for c in orient.children[node]:
            piece = render(c)
            if with_lengths:
                piece += ":" + _format_length(tree.edges[orient.parent_edge[c]][2])
            parts.append(piece)
        return "(" + ",".join(parts) + ")"

    body = ",".join(
        render(c) + (":" + _format_length(tree.edges[orient.parent_edge[c]][2]) if with_lengths else "")
        for c in orient.children[orient.root]
    )
    return f"({body});"


def write_newick(tree: Tree) -> str:
    """Serialize to unrooted Newick: trifurcation at a deterministic internal
    node, children ordered by smallest contained leaf label."""
    return _serialize(tree, with_lengths=True)


def topology_newick(tree: Tree) -> str:
    """Branch-length-free Newick text; equal iff topologies are equal."""
    return _serialize(tree, with_lengths=False)


# ---------------------------------------------------------------------------
# Topology identity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CanonicalTopology:
    """Split-set identity of an unrooted topology.

    Each edge contributes the bitmask (over alphabetically sorted labels) of
    the side that excludes the first label; trivial pendant splits included.
    """

    labels: tuple[str, ...]
    splits: frozenset[int]

    def nontrivial(self) -> frozenset[int]:
        m = len(self.labels)
        return frozenset(s for s in self.splits if 2 <= s.bit_count() <= m - 2)


def leaf_masks(tree: Tree) -> list[int]:
    """Bitmask (over sorted labels) for each leaf id."""
    order = {lab: i for i, lab in enumerate(sorted(tree.labels))}
    return [1 << order[lab] for lab in tree.labels]


def edge_child_masks(tree: Tree, orient: Orientation | None = None) -> list[int]:
    """For each edge index, the leaf bitmask of its child side under the
    default orientation."""
    if orient is None:
        orient = rooted_orientation(tree)
    masks = leaf_masks(tree) + [0] * (tree.n_nodes - tree.leaf_count)
    for u in reversed(orient.preorder):
        if not tree.is_leaf(u):
            acc = 0
            for c in orient.children[u]:
                acc |= masks[c]
            masks[u] = acc
    out = [0] * len(tree.edges)
    for u in orient.preorder:
        e = orient.parent_edge[u]
        if e >= 0:
            out[e] = masks[u]
    return out


def split_set(labels: tuple[str, ...], edges) -> frozenset[int]:
    """Normalized split masks of an edge list (no Tree object required)."""
    m = len(labels)
    order = {lab: i for i, lab in enumerate(sorted(labels))}
    n_nodes = m
    for u, v, _ in edges:
        if u >= n_nodes:
            n_nodes = u + 1
        if v >= n_nodes:
            n_nodes = v + 1
    adj: list[list[int]] = [[] for _ in range(n_nodes)]
    for u, v, _ in edges:
        adj[u].append(v)
        adj[v].append(u)
    masks = [0] * n_nodes
    for i, lab in enumerate(labels):
        masks[i] = 1 << order[lab]
    parent = [-1] * n_nodes
    parent[0] = 0
    preorder = [0]
    stack = [0]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if parent[v] == -1:
                parent[v] = u
                preorder.append(v)
                stack.append(v)
    full = (1 << m) - 1
    splits = set()
    for u in reversed(preorder):
        p = parent[u]
        if p != u:  # not the start node
            mask = masks[u]
            masks[p] |= mask
            splits.add(full ^ mask if mask & 1 else mask)
    return frozenset(splits)


def canonical(tree: Tree) -> CanonicalTopology:
    """Topology identity ignoring branch lengths."""
    return CanonicalTopology(tuple(sorted(tree.labels)), split_set(tree.labels, tree.edges))


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------

DEFAULT_BRANCH_LENGTH = 0.05
LONG_BRANCH_LENGTH = 2.0


def _balanced_block(first_leaf: int, depth: int, next_internal: list[int], edges, L):
    """Builds a balanced subtree over leaves [first_leaf, first_leaf + 2**depth);
    returns its top node id."""
    if depth == 0:
        return first_leaf
    left = _balanced_block(first_leaf, depth - 1, next_internal, edges, L)
    right = _balanced_block(first_leaf + 2 ** (depth - 1), depth - 1, next_internal, edges, L)
    top = next_internal[0]
    next_internal[0] += 1
    edges.append((top, left, L))
    edges.append((top, right, L))
    return top


def balanced_tree(i: int) -> Tree:
    """Fully balanced tree on 2**i leaves, every branch 0.05, labels S1.."""
    if i < 1:
        raise TreeError("level count must be >= 1")
    m = 2 ** i
    labels = [f"S{k}" for k in range(1, m + 1)]
    if i == 1:
        return Tree(labels, [(0, 1, DEFAULT_BRANCH_LENGTH)])
    edges: list[tuple[int, int, float]] = []
    next_internal = [m]
    left = _balanced_block(0, i - 1, next_internal, edges, DEFAULT_BRANCH_LENGTH)
    right = _balanced_block(2 ** (i - 1), i - 1, next_internal, edges, DEFAULT_BRANCH_LENGTH)
    edges.append((left, right, DEFAULT_BRANCH_LENGTH))
    tree = Tree(labels, edges)
    tree.validate()
    return tree


def c_tree(i: int, long_branch: float = LONG_BRANCH_LENGTH) -> Tree:
    """Balanced tree on 2**i leaves with an extra two-leaf subtree joined at
    its center through a branch of length ``long_branch`` (default 2)."""
    if i < 1:
        raise TreeError("level count must be >= 1")
    m0 = 2 ** i
    m = m0 + 2
    labels = [f"S{k}" for k in range(1, m + 1)]
    edges: list[tuple[int, int, float]] = []
    next_internal = [m]
    if i == 1:
        left, right = 0, 1
    else:
        left = _balanced_block(0, i - 1, next_internal, edges, DEFAULT_BRANCH_LENGTH)
        right = _balanced_block(2 ** (i - 1), i - 1, next_internal, edges, DEFAULT_BRANCH_LENGTH)
    center = next_internal[0]
    next_internal[0] += 1
    join = next_internal[0]
    next_internal[0] += 1
    edges.append((center, left, DEFAULT_BRANCH_LENGTH))
    edges.append((center, right, DEFAULT_BRANCH_LENGTH))
    edges.append((center, join, float(long_branch)))
    edges.append((join, m0, DEFAULT_BRANCH_LENGTH))
    edges.append((join, m0 + 1, DEFAULT_BRANCH_LENGTH))
    tree = Tree(labels, edges)
    tree.validate()
    return tree


def count_topologies(m: int) -> int:
    """Number of distinct unrooted binary topologies on m labeled leaves:
    the double factorial (2m-5)!!."""
    if m < 3:
        raise TreeError("need at least three leaves")
    out = 1
    for k in range(1, 2 * m - 4, 2):
        out *= k
    return out
