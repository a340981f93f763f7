"""Numba kernels for max-weight bipartite matching with dual prices.

Both kernels run the shortest-augmenting-path variant of the primal-dual
method in the maximization convention: prices satisfy u[i] + v[j] >= w[i][j]
on every edge, matched edges are tight, and each phase grows the matching by
one left node.  Left prices start at the row maximum, right prices at zero;
right nodes that never enter an alternating tree keep price zero, so
unmatched right prices are zero at termination.

The dense kernel scans a full weight matrix (complete bipartite graph); the
sparse kernel walks adjacency lists (CSR arrays) with a binary heap and
reports infeasibility when some phase cannot reach an unmatched right node.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_INF = np.inf


@njit(cache=True)
def jv_dense(w):
    """Match every row of the (L x R, L <= R) weight matrix to a column.

    Returns (match, u, v): the matched column per row and the dual prices.
    """
    n_left, n_right = w.shape
    u = np.empty(n_left, np.float64)
    for i in range(n_left):
        best = w[i, 0]
        for j in range(1, n_right):
            if w[i, j] > best:
                best = w[i, j]
        u[i] = best
    v = np.zeros(n_right, np.float64)
    match_l = np.full(n_left, -1, np.int64)
    match_r = np.full(n_right, -1, np.int64)

    dist = np.empty(n_right, np.float64)
    pred = np.empty(n_right, np.int64)
    done = np.empty(n_right, np.bool_)
    popped = np.empty(n_right, np.int64)

    for i0 in range(n_left):
        for j in range(n_right):
            dist[j] = u[i0] + v[j] - w[i0, j]
            pred[j] = i0
            done[j] = False
        n_popped = 0
        sink = -1
        delta = 0.0
        while sink < 0:
            jmin = -1
            dmin = _INF
            for j in range(n_right):
                if not done[j] and dist[j] < dmin:
                    dmin = dist[j]
                    jmin = j
            j = jmin
            done[j] = True
            popped[n_popped] = j
            n_popped += 1
            if match_r[j] < 0:
                sink = j
                delta = dmin
                break
            i = match_r[j]
            for j2 in range(n_right):
                if not done[j2]:
                    nd = dmin + u[i] + v[j2] - w[i, j2]
                    if nd < dist[j2]:
                        dist[j2] = nd
                        pred[j2] = i

        u[i0] -= delta
        for t in range(n_popped - 1):
            j = popped[t]
            adjust = delta - dist[j]
            v[j] += adjust
            u[match_r[j]] -= adjust

        j = sink
        while True:
            i = pred[j]
            match_r[j] = i
            j_prev = match_l[i]
            match_l[i] = j
            if i == i0:
                break
            j = j_prev
    return match_l, u, v


@njit(cache=True)
def _heap_push(keys, vals, size, key, val):
    pos = size
    keys[pos] = key
    vals[pos] = val
    while pos > 0:
        parent = (pos - 1) >> 1
        if keys[parent] <= keys[pos]:
            break
        keys[parent], keys[pos] = keys[pos], keys[parent]
        vals[parent], vals[pos] = vals[pos], vals[parent]
        pos = parent
    return size + 1


@njit(cache=True)
def _heap_pop(keys, vals, size):
    key = keys[0]
    val = vals[0]
    size -= 1
    keys[0] = keys[size]
    vals[0] = vals[size]
    pos = 0
    while True:
        left = 2 * pos + 1
        if left >= size:
            break
        child = left
        right = left + 1
        if right < size and keys[right] < keys[left]:
            child = right
        if keys[pos] <= keys[child]:
            break
        keys[pos], keys[child] = keys[child], keys[pos]
        vals[pos], vals[child] = vals[child], vals[pos]
        pos = child
    return key, val, size


@njit(cache=True)
def jv_sparse(n_left, n_right, indptr, cols, wts):
    """Sparse-graph variant on CSR adjacency lists.

    Returns (feasible, match, u, v); on infeasibility (some left node cannot
    be matched) ``feasible`` is False and the rest is partial state.
    """
    u = np.empty(n_left, np.float64)
    v = np.zeros(n_right, np.float64)
    match_l = np.full(n_left, -1, np.int64)
    match_r = np.full(n_right, -1, np.int64)
    for i in range(n_left):
        lo, hi = indptr[i], indptr[i + 1]
        if hi == lo:
            return False, match_l, u, v
        best = wts[lo]
        for t in range(lo + 1, hi):
            if wts[t] > best:
                best = wts[t]
        u[i] = best

    dist = np.empty(n_right, np.float64)
    pred = np.empty(n_right, np.int64)
    done = np.empty(n_right, np.bool_)
    popped = np.empty(n_right, np.int64)
    popped_dist = np.empty(n_right, np.float64)
    cap = len(cols) + n_right + 8
    heap_keys = np.empty(cap, np.float64)
    heap_vals = np.empty(cap, np.int64)

    for i0 in range(n_left):
        for j in range(n_right):
            dist[j] = _INF
            done[j] = False
        heap_size = 0
        for t in range(indptr[i0], indptr[i0 + 1]):
            j = cols[t]
            nd = u[i0] + v[j] - wts[t]
            if nd < dist[j]:
                dist[j] = nd
                pred[j] = i0
                heap_size = _heap_push(heap_keys, heap_vals, heap_size, nd, j)
        n_popped = 0
        sink = -1
        delta = 0.0
        while heap_size > 0:
            d, j, heap_size = _heap_pop(heap_keys, heap_vals, heap_size)
            if done[j] or d > dist[j]:
                continue
            done[j] = True
            popped[n_popped] = j
            popped_dist[n_popped] = d
            n_popped += 1
            if match_r[j] < 0:
                sink = j
                delta = d
                break
            i = match_r[j]
            for t in range(indptr[i], indptr[i + 1]):
                j2 = cols[t]
                if not done[j2]:
                    nd = d + u[i] + v[j2] - wts[t]
                    if nd < dist[j2]:
                        dist[j2] = nd
                        pred[j2] = i
                        heap_size = _heap_push(heap_keys, heap_vals, heap_size, nd, j2)
        if sink < 0:
            return False, match_l, u, v

        u[i0] -= delta
        for t in range(n_popped - 1):
            j = popped[t]
            adjust = delta - popped_dist[t]
            v[j] += adjust
            u[match_r[j]] -= adjust

        j = sink
        while True:
            i = pred[j]
            match_r[j] = i
            j_prev = match_l[i]
            match_l[i] = j
            if i == i0:
                break
            j = j_prev
    return True, match_l, u, v
