# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled likelihood kernels (see pykernels.py for the reference
implementation and the array conventions; this module mirrors it)."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, log

cnp.import_array()

cdef double RESCALE_FLOOR = 1e-200
cdef double GOLDEN = 0.3819660112501051
cdef double SQRT_EPS = 1.4899496565413338e-08
cdef double NEG_INF = float("-inf")

BACKEND_NAME = "cython"


cdef inline double _xfactor(double v) noexcept nogil:
    return exp(-4.0 * v / 3.0)


cdef void _node_partial_c(
    int u,
    const unsigned char[:, ::1] patterns,
    const int[::1] leaf_col,
    const int[::1] kids_start,
    const int[::1] kids,
    const double[::1] lengths,
    int n_leaves,
    double[:, :, ::1] D,
    double[:, ::1] dsc,
) noexcept nogil:
    cdef Py_ssize_t P = patterns.shape[0]
    cdef Py_ssize_t p
    cdef int slot, c, i, col, obs
    cdef double x, b, s, mx
    for p in range(P):
        D[u, p, 0] = 1.0
        D[u, p, 1] = 1.0
        D[u, p, 2] = 1.0
        D[u, p, 3] = 1.0
        dsc[u, p] = 0.0
    for slot in range(kids_start[u], kids_start[u + 1]):
        c = kids[slot]
        x = _xfactor(lengths[c])
        b = (1.0 - x) * 0.25
        if c < n_leaves:
            col = leaf_col[c]
            for p in range(P):
                obs = patterns[p, col]
                for i in range(4):
                    if i == obs:
                        D[u, p, i] *= b + x
                    else:
                        D[u, p, i] *= b
        else:
            for p in range(P):
                s = D[c, p, 0] + D[c, p, 1] + D[c, p, 2] + D[c, p, 3]
                for i in range(4):
                    D[u, p, i] *= x * D[c, p, i] + b * s
                dsc[u, p] += dsc[c, p]
    for p in range(P):
        mx = D[u, p, 0]
        for i in range(1, 4):
            if D[u, p, i] > mx:
                mx = D[u, p, i]
        if mx < RESCALE_FLOOR and mx > 0.0:
            s = 1.0 / mx
            for i in range(4):
                D[u, p, i] *= s
            dsc[u, p] += log(mx)


cdef double _finish_loglik_c(
    double[:, :, ::1] D, double[:, ::1] dsc, int root, const double[::1] counts
) noexcept nogil:
    cdef Py_ssize_t P = counts.shape[0]
    cdef Py_ssize_t p
    cdef double total = 0.0, site
    for p in range(P):
        site = 0.25 * (D[root, p, 0] + D[root, p, 1] + D[root, p, 2] + D[root, p, 3])
        total += counts[p] * (log(site) + dsc[root, p])
    return total


def root_partial(patterns, leaf_col, post_nodes, kids_start, kids, lengths, root, n_leaves):
    cdef const unsigned char[:, ::1] pat = patterns
    cdef const int[::1] lc = leaf_col
    cdef const int[::1] post = post_nodes
    cdef const int[::1] ks = kids_start
    cdef const int[::1] kd = kids
    cdef const double[::1] ln = lengths
    cdef int n_nodes = kids_start.shape[0] - 1
    cdef int nl = n_leaves
    cdef Py_ssize_t P = pat.shape[0]
    D_arr = np.empty((n_nodes, P, 4), dtype=np.float64)
    dsc_arr = np.zeros((n_nodes, P), dtype=np.float64)
    cdef double[:, :, ::1] D = D_arr
    cdef double[:, ::1] dsc = dsc_arr
    cdef Py_ssize_t k
    with nogil:
        for k in range(post.shape[0]):
            _node_partial_c(post[k], pat, lc, ks, kd, ln, nl, D, dsc)
    return D_arr[root].copy(), dsc_arr[root].copy()


def full_loglik(patterns, leaf_col, post_nodes, kids_start, kids, lengths, root, n_leaves, counts):
    cdef const unsigned char[:, ::1] pat = patterns
    cdef const int[::1] lc = leaf_col
    cdef const int[::1] post = post_nodes
    cdef const int[::1] ks = kids_start
    cdef const int[::1] kd = kids
    cdef const double[::1] ln = lengths
    cdef const double[::1] cnt = counts
    cdef int n_nodes = kids_start.shape[0] - 1
    cdef int nl = n_leaves
    cdef Py_ssize_t P = pat.shape[0]
    D_arr = np.empty((n_nodes, P, 4), dtype=np.float64)
    dsc_arr = np.zeros((n_nodes, P), dtype=np.float64)
    cdef double[:, :, ::1] D = D_arr
    cdef double[:, ::1] dsc = dsc_arr
    cdef Py_ssize_t k
    cdef double out
    cdef int rt = root
    with nogil:
        for k in range(post.shape[0]):
            _node_partial_c(post[k], pat, lc, ks, kd, ln, nl, D, dsc)
        out = _finish_loglik_c(D, dsc, rt, cnt)
    return out


cdef double _edge_obj_c(
    double x, const double[::1] alpha, const double[::1] beta, const double[::1] counts
) noexcept nogil:
    cdef Py_ssize_t p
    cdef double total = 0.0, t
    for p in range(alpha.shape[0]):
        t = x * alpha[p] + beta[p]
        if t < 0.0:
            t = 0.0
        total += counts[p] * log(t)
    return total


cdef inline double _neg_obj(
    double v, const double[::1] alpha, const double[::1] beta, const double[::1] counts
) noexcept nogil:
    return -_edge_obj_c(_xfactor(v), alpha, beta, counts)


cdef (double, double) _brent_edge(
    const double[::1] alpha,
    const double[::1] beta,
    const double[::1] counts,
    double a,
    double b,
    double xatol,
    int maxiter,
) noexcept nogil:
    """Bounded Brent minimization of the negated branch objective; returns
    (argmax, objective maximum)."""
    cdef double x, w, v, fx, fw, fv, d, e, mid, tol1, tol2
    cdef double r, q, p, etemp, u, fu
    cdef int it
    cdef bint golden_step
    x = w = v = a + GOLDEN * (b - a)
    fx = fw = fv = _neg_obj(x, alpha, beta, counts)
    d = 0.0
    e = 0.0
    for it in range(maxiter):
        mid = 0.5 * (a + b)
        tol1 = SQRT_EPS * fabs(x) + xatol / 3.0
        tol2 = 2.0 * tol1
        if fabs(x - mid) <= tol2 - 0.5 * (b - a):
            break
        golden_step = True
        if fabs(e) > tol1:
            r = (x - w) * (fx - fv)
            q = (x - v) * (fx - fw)
            p = (x - v) * q - (x - w) * r
            q = 2.0 * (q - r)
            if q > 0.0:
                p = -p
            q = fabs(q)
            etemp = e
            e = d
            if fabs(p) < fabs(0.5 * q * etemp) and p > q * (a - x) and p < q * (b - x):
                d = p / q
                u = x + d
                if (u - a) < tol2 or (b - u) < tol2:
                    d = tol1 if mid >= x else -tol1
                golden_step = False
        if golden_step:
            e = (b - x) if x < mid else (a - x)
            d = GOLDEN * e
        if fabs(d) >= tol1:
            u = x + d
        else:
            u = x + (tol1 if d > 0.0 else -tol1)
        fu = _neg_obj(u, alpha, beta, counts)
        if fu <= fx:
            if u < x:
                b = x
            else:
                a = x
            v = w
            fv = fw
            w = x
            fw = fx
            x = u
            fx = fu
        else:
            if u < x:
                a = u
            else:
                b = u
            if fu <= fw or w == x:
                v = w
                fv = fw
                w = u
                fw = fu
            elif fu <= fv or v == x or v == w:
                v = u
                fv = fu
    return x, -fx


def edge_objective(alpha, beta, counts, v):
    cdef const double[::1] al = alpha
    cdef const double[::1] be = beta
    cdef const double[::1] cnt = counts
    return _edge_obj_c(_xfactor(v), al, be, cnt)


def maximize_edge(alpha, beta, counts, vmin, vmax, xatol, maxiter=100):
    cdef const double[::1] al = alpha
    cdef const double[::1] be = beta
    cdef const double[::1] cnt = counts
    cdef double v, f
    v, f = _brent_edge(al, be, cnt, vmin, vmax, xatol, maxiter)
    return v, f


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
    double vmin,
    double vmax,
    double xatol,
    double round_tol,
    int max_rounds,
):
    """In-place branch coordinate ascent; see pykernels.optimize_sweeps."""
    cdef const unsigned char[:, ::1] pat = patterns
    cdef const int[::1] lc = leaf_col
    cdef const int[::1] post = post_nodes
    cdef const int[::1] ks = kids_start
    cdef const int[::1] kd = kids
    cdef double[::1] ln = lengths
    cdef const double[::1] cnt = counts
    cdef int n_nodes = kids_start.shape[0] - 1
    cdef int nl = n_leaves
    cdef int rt = root
    cdef Py_ssize_t P = pat.shape[0]

    D_arr = np.empty((n_nodes, P, 4), dtype=np.float64)
    dsc_arr = np.zeros((n_nodes, P), dtype=np.float64)
    U_arr = np.empty((n_nodes, P, 4), dtype=np.float64)
    usc_arr = np.zeros((n_nodes, P), dtype=np.float64)
    A_arr = np.empty((P, 4), dtype=np.float64)
    Asc_arr = np.empty(P, dtype=np.float64)
    alpha_arr = np.empty(P, dtype=np.float64)
    beta_arr = np.empty(P, dtype=np.float64)
    best_arr = np.array(lengths, copy=True)
    stack_node_arr = np.empty(n_nodes + 1, dtype=np.int32)
    stack_ki_arr = np.empty(n_nodes + 1, dtype=np.int32)

    cdef double[:, :, ::1] D = D_arr
    cdef double[:, ::1] dsc = dsc_arr
    cdef double[:, :, ::1] U = U_arr
    cdef double[:, ::1] usc = usc_arr
    cdef double[:, ::1] A = A_arr
    cdef double[::1] Asc = Asc_arr
    cdef double[::1] alpha = alpha_arr
    cdef double[::1] beta = beta_arr
    cdef double[::1] best_lengths = best_arr
    cdef int[::1] stack_node = stack_node_arr
    cdef int[::1] stack_ki = stack_ki_arr

    cdef Py_ssize_t k, p
    cdef int rounds = 0, rnd, top, u, ki, c, w, slot, i, obs, col
    cdef double ll_prev, best_ll, ll, x, b, s, mx, SA, AD, SD, f0, f1, v1

    with nogil:
        for k in range(post.shape[0]):
            _node_partial_c(post[k], pat, lc, ks, kd, ln, nl, D, dsc)
        ll_prev = _finish_loglik_c(D, dsc, rt, cnt)
        best_ll = ll_prev
        for rnd in range(max_rounds):
            rounds += 1
            for p in range(P):
                U[rt, p, 0] = 0.25
                U[rt, p, 1] = 0.25
                U[rt, p, 2] = 0.25
                U[rt, p, 3] = 0.25
                usc[rt, p] = 0.0
            top = 0
            stack_node[0] = rt
            stack_ki[0] = 0
            while top >= 0:
                u = stack_node[top]
                ki = stack_ki[top]
                top -= 1
                if ki < ks[u + 1] - ks[u]:
                    top += 1
                    stack_node[top] = u
                    stack_ki[top] = ki + 1
                    c = kd[ks[u] + ki]
                    # assemble A: everything except c's subtree, seen from u
                    for p in range(P):
                        A[p, 0] = U[u, p, 0]
                        A[p, 1] = U[u, p, 1]
                        A[p, 2] = U[u, p, 2]
                        A[p, 3] = U[u, p, 3]
                        Asc[p] = usc[u, p]
                    for slot in range(ks[u], ks[u + 1]):
                        w = kd[slot]
                        if w == c:
                            continue
                        x = _xfactor(ln[w])
                        b = (1.0 - x) * 0.25
                        if w < nl:
                            col = lc[w]
                            for p in range(P):
                                obs = pat[p, col]
                                for i in range(4):
                                    if i == obs:
                                        A[p, i] *= b + x
                                    else:
                                        A[p, i] *= b
                        else:
                            for p in range(P):
                                s = D[w, p, 0] + D[w, p, 1] + D[w, p, 2] + D[w, p, 3]
                                for i in range(4):
                                    A[p, i] *= x * D[w, p, i] + b * s
                                Asc[p] += dsc[w, p]
                    for p in range(P):
                        mx = A[p, 0]
                        for i in range(1, 4):
                            if A[p, i] > mx:
                                mx = A[p, i]
                        if mx < RESCALE_FLOOR and mx > 0.0:
                            s = 1.0 / mx
                            for i in range(4):
                                A[p, i] *= s
                            Asc[p] += log(mx)
                    # single-branch objective coefficients for the edge above c
                    if c < nl:
                        col = lc[c]
                        for p in range(P):
                            SA = A[p, 0] + A[p, 1] + A[p, 2] + A[p, 3]
                            AD = A[p, pat[p, col]]
                            beta[p] = 0.25 * SA
                            alpha[p] = AD - beta[p]
                    else:
                        for p in range(P):
                            SA = A[p, 0] + A[p, 1] + A[p, 2] + A[p, 3]
                            SD = D[c, p, 0] + D[c, p, 1] + D[c, p, 2] + D[c, p, 3]
                            AD = (
                                A[p, 0] * D[c, p, 0]
                                + A[p, 1] * D[c, p, 1]
                                + A[p, 2] * D[c, p, 2]
                                + A[p, 3] * D[c, p, 3]
                            )
                            beta[p] = 0.25 * SA * SD
                            alpha[p] = AD - beta[p]
                    f0 = _edge_obj_c(_xfactor(ln[c]), alpha, beta, cnt)
                    f1, v1 = 0.0, 0.0
                    v1, f1 = _brent_edge(alpha, beta, cnt, vmin, vmax, xatol, 100)
                    if f1 > f0:
                        ln[c] = v1
                    if c >= nl:
                        x = _xfactor(ln[c])
                        b = (1.0 - x) * 0.25
                        for p in range(P):
                            SA = A[p, 0] + A[p, 1] + A[p, 2] + A[p, 3]
                            for i in range(4):
                                U[c, p, i] = x * A[p, i] + b * SA
                            usc[c, p] = Asc[p]
                            mx = U[c, p, 0]
                            for i in range(1, 4):
                                if U[c, p, i] > mx:
                                    mx = U[c, p, i]
                            if mx < RESCALE_FLOOR and mx > 0.0:
                                s = 1.0 / mx
                                for i in range(4):
                                    U[c, p, i] *= s
                                usc[c, p] += log(mx)
                        top += 1
                        stack_node[top] = c
                        stack_ki[top] = 0
                else:
                    if u != rt:
                        _node_partial_c(u, pat, lc, ks, kd, ln, nl, D, dsc)
            _node_partial_c(rt, pat, lc, ks, kd, ln, nl, D, dsc)
            ll = _finish_loglik_c(D, dsc, rt, cnt)
            if ll > best_ll:
                best_ll = ll
                for k in range(best_lengths.shape[0]):
                    best_lengths[k] = ln[k]
            if ll - ll_prev < round_tol:
                break
            ll_prev = ll
        for k in range(best_lengths.shape[0]):
            ln[k] = best_lengths[k]
    return best_ll, rounds
