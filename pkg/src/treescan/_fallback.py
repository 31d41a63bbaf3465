"""Pure numpy implementations of the hot kernels.

Every function here has a twin with the same signature in ``_kernels.pyx``.
The arithmetic is written in the same order as the compiled version so the
two backends agree bit-for-bit on the same inputs.
"""
import numpy as np


def sequential_scan(abar, u):
    """h_i = abar_i * h_{i-1} + u_i with h_{-1} = 0.  Arrays are (L, D, S)."""
    h = np.empty_like(u)
    h[0] = u[0]
    for i in range(1, u.shape[0]):
        h[i] = abar[i] * h[i - 1] + u[i]
    return h


def tree_scan_dp(parent, order, abar, u):
    """Aggregate u over all tree paths in two traversals.

    ``order`` is a root-first traversal order and ``parent[root] == root``.
    """
    n = u.shape[0]
    up = np.empty_like(u)
    acc = np.zeros_like(u)
    # leaves -> root: up[i] = u[i] + abar[i] * sum(up[children])
    for k in range(n - 1, -1, -1):
        i = order[k]
        up[i] = u[i] + abar[i] * acc[i]
        p = parent[i]
        if p != i:
            acc[p] += up[i]
    h = np.empty_like(u)
    root = order[0]
    h[root] = up[root]
    # root -> leaves: add everything outside the subtree of i
    for k in range(1, n):
        i = order[k]
        p = parent[i]
        h[i] = up[i] + abar[i] * (h[p] - abar[p] * up[i])
    return h


def tree_scan_pairs(parent, depth, abar, u):
    """O(N^2) reference: walk every (source, target) path through its LCA."""
    n, d, s = u.shape
    h = np.zeros_like(u)
    for i in range(n):
        for j in range(n):
            # nodes after j on the path j -> i, ending with i
            up_part = []
            down_part = []
            a, b = j, i
            while depth[a] > depth[b]:
                a = parent[a]
                up_part.append(a)
            while depth[b] > depth[a]:
                down_part.append(b)
                b = parent[b]
            while a != b:
                a = parent[a]
                up_part.append(a)
                down_part.append(b)
                b = parent[b]
            # up_part ends at the LCA when j is not itself the LCA
            path = up_part + down_part[::-1]
            prod = np.ones((d, s))
            for k in path:
                prod = prod * abar[k]
            h[i] += prod * u[j]
    return h


def boruvka(n, ei, ej, w):
    """Contractive Boruvka over an edge list.

    Returns a boolean mask over the input edges, or ``None`` when the graph
    is disconnected.  Edges are ordered by (w, ei, ej) with ei < ej.
    """
    m = len(w)
    rank = np.empty(m, dtype=np.int64)
    rank[np.lexsort((ej, ei, w))] = np.arange(m)
    parent = np.arange(n)

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    selected = np.zeros(m, dtype=bool)
    live = np.arange(m)
    comp = np.arange(n)
    components = n
    while components > 1:
        if live.size == 0:
            return None
        ci = comp[ei[live]]
        cj = comp[ej[live]]
        best = np.full(n, m, dtype=np.int64)
        np.minimum.at(best, ci, rank[live])
        np.minimum.at(best, cj, rank[live])
        by_rank = np.empty(m, dtype=np.int64)
        by_rank[rank] = np.arange(m)
        for c in np.flatnonzero(best < m):
            e = by_rank[best[c]]
            a, b = find(ei[e]), find(ej[e])
            if a != b:
                parent[max(a, b)] = min(a, b)
                selected[e] = True
                components -= 1
        comp = np.array([find(x) for x in range(n)])
        live = live[comp[ei[live]] != comp[ej[live]]]
    return selected
