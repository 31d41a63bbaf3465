# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels.  Signatures mirror ``treescan._fallback``."""
import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free

cnp.import_array()


def sequential_scan(double[:, :, ::1] abar, double[:, :, ::1] u):
    cdef Py_ssize_t L = u.shape[0], D = u.shape[1], S = u.shape[2]
    h_arr = np.empty((L, D, S))
    cdef double[:, :, ::1] h = h_arr
    cdef Py_ssize_t i, d, s
    with nogil:
        for d in range(D):
            for s in range(S):
                h[0, d, s] = u[0, d, s]
        for i in range(1, L):
            for d in range(D):
                for s in range(S):
                    h[i, d, s] = abar[i, d, s] * h[i - 1, d, s] + u[i, d, s]
    return h_arr


def tree_scan_dp(cnp.int64_t[::1] parent, cnp.int64_t[::1] order,
                 double[:, :, ::1] abar, double[:, :, ::1] u):
    cdef Py_ssize_t n = u.shape[0], D = u.shape[1], S = u.shape[2]
    up_arr = np.empty((n, D, S))
    acc_arr = np.zeros((n, D, S))
    h_arr = np.empty((n, D, S))
    cdef double[:, :, ::1] up = up_arr
    cdef double[:, :, ::1] acc = acc_arr
    cdef double[:, :, ::1] h = h_arr
    cdef Py_ssize_t k, i, p, d, s, root
    with nogil:
        for k in range(n - 1, -1, -1):
            i = order[k]
            p = parent[i]
            for d in range(D):
                for s in range(S):
                    up[i, d, s] = u[i, d, s] + abar[i, d, s] * acc[i, d, s]
                    if p != i:
                        acc[p, d, s] = acc[p, d, s] + up[i, d, s]
        root = order[0]
        for d in range(D):
            for s in range(S):
                h[root, d, s] = up[root, d, s]
        for k in range(1, n):
            i = order[k]
            p = parent[i]
            for d in range(D):
                for s in range(S):
                    h[i, d, s] = up[i, d, s] + abar[i, d, s] * (
                        h[p, d, s] - abar[p, d, s] * up[i, d, s])
    return h_arr


def tree_scan_pairs(cnp.int64_t[::1] parent, cnp.int64_t[::1] depth,
                    double[:, :, ::1] abar, double[:, :, ::1] u):
    cdef Py_ssize_t n = u.shape[0], D = u.shape[1], S = u.shape[2]
    h_arr = np.zeros((n, D, S))
    cdef double[:, :, ::1] h = h_arr
    cdef double[:, ::1] prod = np.empty((D, S))
    cdef cnp.int64_t[::1] path = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] down = np.empty(n, dtype=np.int64)
    cdef Py_ssize_t i, j, a, b, k, d, s, n_up, n_down, node
    with nogil:
        for i in range(n):
            for j in range(n):
                n_up = 0
                n_down = 0
                a = j
                b = i
                while depth[a] > depth[b]:
                    a = parent[a]
                    path[n_up] = a
                    n_up += 1
                while depth[b] > depth[a]:
                    down[n_down] = b
                    n_down += 1
                    b = parent[b]
                while a != b:
                    a = parent[a]
                    path[n_up] = a
                    n_up += 1
                    down[n_down] = b
                    n_down += 1
                    b = parent[b]
                for k in range(n_down - 1, -1, -1):
                    path[n_up] = down[k]
                    n_up += 1
                for d in range(D):
                    for s in range(S):
                        prod[d, s] = 1.0
                for k in range(n_up):
                    node = path[k]
                    for d in range(D):
                        for s in range(S):
                            prod[d, s] = prod[d, s] * abar[node, d, s]
                for d in range(D):
                    for s in range(S):
                        h[i, d, s] = h[i, d, s] + prod[d, s] * u[j, d, s]
    return h_arr


cdef inline bint _edge_less(Py_ssize_t e, Py_ssize_t f, double[::1] w,
                            cnp.int64_t[::1] ei, cnp.int64_t[::1] ej) noexcept nogil:
    if w[e] != w[f]:
        return w[e] < w[f]
    if ei[e] != ei[f]:
        return ei[e] < ei[f]
    return ej[e] < ej[f]


cdef inline Py_ssize_t _find(Py_ssize_t* parent, Py_ssize_t x) noexcept nogil:
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


def boruvka(Py_ssize_t n, cnp.int64_t[::1] ei, cnp.int64_t[::1] ej, double[::1] w):
    cdef Py_ssize_t m = w.shape[0]
    selected_arr = np.zeros(m, dtype=np.uint8)
    cdef cnp.uint8_t[::1] selected = selected_arr
    cdef Py_ssize_t* parent = <Py_ssize_t*> malloc(n * sizeof(Py_ssize_t))
    cdef Py_ssize_t* best = <Py_ssize_t*> malloc(n * sizeof(Py_ssize_t))
    cdef Py_ssize_t* live = <Py_ssize_t*> malloc((m + 1) * sizeof(Py_ssize_t))
    cdef Py_ssize_t x, k, e, a, b, c, n_live = m, kept, components = n
    cdef bint disconnected = False
    with nogil:
        for x in range(n):
            parent[x] = x
        for k in range(m):
            live[k] = k
        while components > 1:
            if n_live == 0:
                disconnected = True
                break
            for x in range(n):
                best[x] = -1
            for k in range(n_live):
                e = live[k]
                a = _find(parent, ei[e])
                b = _find(parent, ej[e])
                if best[a] == -1 or _edge_less(e, best[a], w, ei, ej):
                    best[a] = e
                if best[b] == -1 or _edge_less(e, best[b], w, ei, ej):
                    best[b] = e
            # components are only read from ``best`` after all minima are known
            for c in range(n):
                e = best[c]
                if e == -1:
                    continue
                a = _find(parent, ei[e])
                b = _find(parent, ej[e])
                if a != b:
                    if a < b:
                        parent[b] = a
                    else:
                        parent[a] = b
                    selected[e] = 1
                    components -= 1
            # contraction: drop edges that became internal
            kept = 0
            for k in range(n_live):
                e = live[k]
                if _find(parent, ei[e]) != _find(parent, ej[e]):
                    live[kept] = e
                    kept += 1
            n_live = kept
    free(parent)
    free(best)
    free(live)
    if disconnected:
        return None
    return selected_arr.astype(bool)
