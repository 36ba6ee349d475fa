"""Pure-Python (numpy) likelihood kernels.

Fallback implementation of the hot paths; mirrors the compiled extension in
``_core.pyx`` function for function.  All kernels work on flat arrays:

- ``patterns``   (P, n_cols) uint8: distinct site columns
- ``leaf_col``   (n_leaves,) int32: pattern column for each leaf node id
- ``post_nodes`` int32: internal nodes in post-order (traversal root last)
- ``kids_start``/``kids``: CSR child lists indexed by node id
- ``lengths``    (n_nodes,) float64: branch length of the edge above a node

The conditional-likelihood recursion rescales a pattern row whenever its
largest entry drops below 1e-200, re-incorporating the factors in log space.
"""

from __future__ import annotations

import math

import numpy as np

RESCALE_FLOOR = 1e-200
_GOLDEN = 0.3819660112501051  # 2 - golden ratio
_SQRT_EPS = math.sqrt(2.2e-16)

BACKEND_NAME = "python"


def _xfactor(v: float) -> float:
    return math.exp(-4.0 * v / 3.0)


def _leaf_contrib(codes: np.ndarray, x: float) -> np.ndarray:
    out = np.full((codes.shape[0], 4), (1.0 - x) * 0.25)
    out[np.arange(codes.shape[0]), codes] += x
    return out


def _edge_apply(part: np.ndarray, x: float) -> np.ndarray:
    s = part.sum(axis=1, keepdims=True)
    return x * part + ((1.0 - x) * 0.25) * s


def _rescale(part: np.ndarray, scale: np.ndarray) -> None:
    mx = part.max(axis=1)
    need = (mx < RESCALE_FLOOR) & (mx > 0.0)
    if need.any():
        part[need] /= mx[need, None]
        scale[need] += np.log(mx[need])


def _node_partial(u, patterns, leaf_col, kids_start, kids, lengths, n_leaves, D, dsc):
    P = patterns.shape[0]
    acc = None
    sc = np.zeros(P)
    for slot in range(kids_start[u], kids_start[u + 1]):
        c = kids[slot]
        x = _xfactor(lengths[c])
        if c < n_leaves:
            contrib = _leaf_contrib(patterns[:, leaf_col[c]], x)
        else:
            contrib = _edge_apply(D[c], x)
            sc += dsc[c]
        acc = contrib if acc is None else acc * contrib
    _rescale(acc, sc)
    D[u] = acc
    dsc[u] = sc


def _down_partials(patterns, leaf_col, post_nodes, kids_start, kids, lengths, n_leaves):
    n_nodes = len(kids_start) - 1
    D: list = [None] * n_nodes
    dsc: list = [None] * n_nodes
    for u in post_nodes:
        _node_partial(int(u), patterns, leaf_col, kids_start, kids, lengths, n_leaves, D, dsc)
    return D, dsc


def root_partial(patterns, leaf_col, post_nodes, kids_start, kids, lengths, root, n_leaves):
    """Conditional likelihoods at the traversal root: ((P, 4), (P,) log-scale)."""
    D, dsc = _down_partials(patterns, leaf_col, post_nodes, kids_start, kids, lengths, n_leaves)
    return D[root], dsc[root]


def _finish_loglik(part, scale, counts) -> float:
    site = 0.25 * part.sum(axis=1)
    with np.errstate(divide="ignore"):
        return float(counts @ (np.log(site) + scale))


def full_loglik(patterns, leaf_col, post_nodes, kids_start, kids, lengths, root, n_leaves, counts) -> float:
    part, scale = root_partial(
        patterns, leaf_col, post_nodes, kids_start, kids, lengths, root, n_leaves
    )
    return _finish_loglik(part, scale, counts)


def edge_objective(alpha, beta, counts, v: float) -> float:
    """Log-likelihood of one branch at length v given the per-pattern
    coefficients: sum_p counts_p * log(x*alpha_p + beta_p), x = exp(-4v/3).
    Log-scale offsets are constant in v and excluded."""
    x = _xfactor(v)
    site = x * alpha + beta
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.log(np.maximum(site, 0.0))
    return float(counts @ vals)


def maximize_edge(alpha, beta, counts, vmin: float, vmax: float, xatol: float, maxiter: int = 100):
    """Bounded Brent maximization (golden section with parabolic steps) of the
    single-branch objective over [vmin, vmax].  Returns (v, objective)."""

    def g(v):
        return -edge_objective(alpha, beta, counts, v)

    v, fneg = _brent_min(g, vmin, vmax, xatol, maxiter)
    return v, -fneg


def _brent_min(g, a: float, b: float, xatol: float, maxiter: int):
    x = w = v = a + _GOLDEN * (b - a)
    fx = fw = fv = g(x)
    d = e = 0.0
    for _ in range(maxiter):
        mid = 0.5 * (a + b)
        tol1 = _SQRT_EPS * abs(x) + xatol / 3.0
        tol2 = 2.0 * tol1
        if abs(x - mid) <= tol2 - 0.5 * (b - a):
            break
        use_golden = True
        if abs(e) > tol1:
            r = (x - w) * (fx - fv)
            q = (x - v) * (fx - fw)
            p = (x - v) * q - (x - w) * r
            q = 2.0 * (q - r)
            if q > 0.0:
                p = -p
            q = abs(q)
            etemp = e
            e = d
            if abs(p) < abs(0.5 * q * etemp) and p > q * (a - x) and p < q * (b - x):
                d = p / q
                u = x + d
                if (u - a) < tol2 or (b - u) < tol2:
                    d = tol1 if mid >= x else -tol1
                use_golden = False
        if use_golden:
            e = (b - x) if x < mid else (a - x)
            d = _GOLDEN * e
        u = x + d if abs(d) >= tol1 else x + (tol1 if d > 0 else -tol1)
        fu = g(u)
        if fu <= fx:
            if u < x:
                b = x
            else:
                a = x
            v, fv = w, fw
            w, fw = x, fx
            x, fx = u, fu
        else:
            if u < x:
                a = u
            else:
                b = u
            if fu <= fw or w == x:
                v, fv = w, fw
                w, fw = u, fu
            elif fu <= fv or v == x or v == w:
                v, fv = u, fu
    return x, fx


def optimize_sweeps(
    patterns,
    leaf_col,
    post_nodes,
    kids_start,
    kids,
    lengths,
    root,
    n_leaves,
    counts,
    vmin: float,
    vmax: float,
    xatol: float,
    round_tol: float,
    max_rounds: int,
):
    """Coordinate-ascent over all branches, sweeping in depth-first order with
    incrementally refreshed partials.  ``lengths`` is updated in place to the
    best visited assignment; returns (best log-likelihood, rounds run).

    A branch update is accepted only if it improves the exact single-branch
    objective, so the total log-likelihood never decreases.
    """
    P = patterns.shape[0]
    n_nodes = len(kids_start) - 1
    D, dsc = _down_partials(patterns, leaf_col, post_nodes, kids_start, kids, lengths, n_leaves)
    ll_prev = _finish_loglik(D[root], dsc[root], counts)
    best_ll = ll_prev
    best_lengths = np.array(lengths, copy=True)
    arange = np.arange(P)
    rounds = 0
    for _ in range(max_rounds):
        rounds += 1
        U: list = [None] * n_nodes
        usc: list = [None] * n_nodes
        U[root] = np.full((P, 4), 0.25)
        usc[root] = np.zeros(P)
        stack = [(root, 0)]
        while stack:
            u, ki = stack.pop()
            klist_start = kids_start[u]
            if ki < kids_start[u + 1] - klist_start:
                stack.append((u, ki + 1))
                c = kids[klist_start + ki]
                A = U[u].copy()
                Asc = usc[u].copy()
                for slot in range(klist_start, kids_start[u + 1]):
                    w = kids[slot]
                    if w == c:
                        continue
                    x = _xfactor(lengths[w])
                    if w < n_leaves:
                        A *= _leaf_contrib(patterns[:, leaf_col[w]], x)
                    else:
                        A *= _edge_apply(D[w], x)
                        Asc += dsc[w]
                _rescale(A, Asc)
                SA = A.sum(axis=1)
                if c < n_leaves:
                    AD = A[arange, patterns[:, leaf_col[c]]]
                    beta = 0.25 * SA
                else:
                    AD = (A * D[c]).sum(axis=1)
                    beta = 0.25 * SA * D[c].sum(axis=1)
                alpha = AD - beta
                f0 = edge_objective(alpha, beta, counts, lengths[c])
                v1, f1 = maximize_edge(alpha, beta, counts, vmin, vmax, xatol)
                if f1 > f0:
                    lengths[c] = v1
                if c >= n_leaves:
                    x = _xfactor(lengths[c])
                    Uc = x * A + ((1.0 - x) * 0.25) * SA[:, None]
                    scc = Asc.copy()
                    _rescale(Uc, scc)
                    U[c] = Uc
                    usc[c] = scc
                    stack.append((c, 0))
            else:
                if u != root:
                    _node_partial(u, patterns, leaf_col, kids_start, kids, lengths, n_leaves, D, dsc)
        _node_partial(root, patterns, leaf_col, kids_start, kids, lengths, n_leaves, D, dsc)
        ll = _finish_loglik(D[root], dsc[root], counts)
        if ll > best_ll:
            best_ll = ll
            best_lengths[:] = lengths
        if ll - ll_prev < round_tol:
            break
        ll_prev = ll
    lengths[:] = best_lengths
    return best_ll, rounds
