"""Normalized-cut foreground/background split over the spanning tree and the
per-node suppression weights derived from it.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericError, StructureError
from .lattice_mst import SpanningTree

DEFAULT_BACKGROUND_PHI = 0.7


@dataclass(frozen=True)
class HSWConfig:
    background_phi: float = DEFAULT_BACKGROUND_PHI
    eig_tol: float = 1e-10

    def __post_init__(self):
        if not 0.0 < self.background_phi < 1.0:
            raise ConfigError(f"background_phi must lie in (0, 1), got {self.background_phi}")


@dataclass(frozen=True)
class SimilarityGraph:
    node_count: int
    ei: np.ndarray
    ej: np.ndarray
    s: np.ndarray

    @property
    def sym_edges(self) -> list[tuple[int, int, float]]:
        return [(int(a), int(b), float(v)) for a, b, v in zip(self.ei, self.ej, self.s)]

    @property
    def degree(self) -> np.ndarray:
        deg = np.zeros(self.node_count)
        np.add.at(deg, self.ei, self.s)
        np.add.at(deg, self.ej, self.s)
        return deg

    @classmethod
    def from_edges(cls, node_count: int, edges) -> SimilarityGraph:
        edges = sorted((min(a, b), max(a, b), float(v)) for a, b, v in edges)
        return cls(node_count,
                   np.array([e[0] for e in edges], dtype=np.int64),
                   np.array([e[1] for e in edges], dtype=np.int64),
                   np.array([e[2] for e in edges], dtype=float))


@dataclass(frozen=True)
class Partition:
    """``mask[i]`` is True for foreground nodes."""

    mask: np.ndarray
    ncut_value: float
    method: str


@dataclass(frozen=True)
class SuppressionWeights:
    phi: np.ndarray


def tree_similarity(tree: SpanningTree) -> SimilarityGraph:
    """Turn tree edge dissimilarities into similarities ``exp(-w)``."""
    edges = [(a, b, np.exp(-w)) for a, b, w in tree.tree_edges]
    return SimilarityGraph.from_edges(tree.node_count, edges)


def ncut_value(partition, sim: SimilarityGraph) -> float:
    """cut/vol(A) + cut/vol(B).  Accepts a :class:`Partition` or a boolean mask."""
    mask = np.asarray(getattr(partition, "mask", partition), dtype=bool)
    if mask.shape != (sim.node_count,):
        raise ValueError(f"mask has shape {mask.shape}, expected ({sim.node_count},)")
    if mask.all() or not mask.any():
        raise ValueError("both sides of a partition must be non-empty")
    return _ncut(mask, sim, sim.degree)


def _ncut(mask, sim, deg):
    vol_a = deg[mask].sum()
    vol_b = deg[~mask].sum()
    if vol_a <= 0.0 or vol_b <= 0.0:
        return float("inf")
    cut = sim.s[mask[sim.ei] != mask[sim.ej]].sum()
    return float(cut / vol_a + cut / vol_b)


def fiedler_vector(sim: SimilarityGraph, tol: float = 1e-10) -> np.ndarray:
    """Second-smallest generalized eigenvector of ``(D - W) y = lambda D y``.

    Solved through the symmetric normalized Laplacian and mapped back with
    ``y = D^{-1/2} v``.
    """
    n = sim.node_count
    deg = sim.degree
    if np.any(deg <= 0.0):
        raise StructureError(f"node {int(np.flatnonzero(deg <= 0.0)[0])} has no incident similarity")
    inv_sqrt = 1.0 / np.sqrt(deg)
    lap = np.eye(n)
    off = -sim.s * inv_sqrt[sim.ei] * inv_sqrt[sim.ej]
    lap[sim.ei, sim.ej] = off
    lap[sim.ej, sim.ei] = off
    try:
        vals, vecs = np.linalg.eigh(lap)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigensolver failed on a {n}-node Laplacian: {exc}") from exc
    v = vecs[:, 1]
    resid = np.linalg.norm(lap @ v - vals[1] * v)
    if not np.isfinite(resid) or resid > tol * n * 1e3:
        raise NumericError(f"eigenvector residual {resid:.3e} exceeds tolerance")
    y = v * inv_sqrt
    # fix the sign so repeated runs agree regardless of solver conventions
    k = int(np.argmax(np.abs(y)))
    return y if y[k] > 0 else -y


def _connected(sim: SimilarityGraph) -> int | None:
    """Return an unreached node id, or None when the graph is connected."""
    parent = list(range(sim.node_count))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in zip(sim.ei.tolist(), sim.ej.tolist()):
        parent[find(a)] = find(b)
    root = find(0)
    for i in range(sim.node_count):
        if find(i) != root:
            return i
    return None


def _sweep_masks(v):
    """Prefixes of the nodes sorted by ``v``, one per gap between distinct values."""
    n = v.size
    order = np.argsort(v, kind="stable")
    sorted_v = v[order]
    for k in range(1, n):
        if sorted_v[k - 1] != sorted_v[k]:
            mask = np.zeros(n, dtype=bool)
            mask[order[:k]] = True
            yield mask


def _edge_masks(tree_parent, tree_order):
    """The subtree below each tree edge."""
    n = tree_parent.size
    children = [[] for _ in range(n)]
    for i in tree_order[1:]:
        children[tree_parent[i]].append(int(i))
    for i in tree_order[1:]:
        mask = np.zeros(n, dtype=bool)
        stack = [int(i)]
        while stack:
            x = stack.pop()
            mask[x] = True
            stack.extend(children[x])
        yield mask


def _as_tree(sim: SimilarityGraph):
    """Parent array and BFS order when ``sim`` is a tree, else None."""
    n = sim.node_count
    if len(sim.s) != n - 1:
        return None
    adj = [[] for _ in range(n)]
    for a, b in zip(sim.ei.tolist(), sim.ej.tolist()):
        adj[a].append(b)
        adj[b].append(a)
    parent = np.full(n, -1, dtype=np.int64)
    parent[0] = 0
    order = [0]
    for x in order:
        for y in sorted(adj[x]):
            if parent[y] == -1:
                parent[y] = x
                order.append(y)
    return parent, np.array(order, dtype=np.int64)


def ncut_partition(sim: SimilarityGraph, cfg: HSWConfig = HSWConfig()) -> Partition:
    """Lowest-Ncut bipartition among spectral sweep cuts and single tree-edge cuts.

    The foreground is the side with the smaller volume (total incident
    similarity).  On an exact volume tie it is the side holding the largest
    ``|fiedler|`` entry.  Equal Ncut values are resolved toward the
    candidate whose foreground contains the smallest node id.
    """
    n = sim.node_count
    if n < 2:
        raise ValueError("partitioning needs at least two nodes")
    missing = _connected(sim)
    if missing is not None:
        raise StructureError(f"similarity graph is disconnected at node {missing}")
    if np.any(sim.s <= 0.0) or not np.all(np.isfinite(sim.s)):
        raise NumericError("similarities must be positive and finite")
    deg = sim.degree
    y = fiedler_vector(sim, cfg.eig_tol)
    seed = int(np.argmax(np.abs(y)))
    candidates = [(mask, "spectral-sweep") for mask in _sweep_masks(y)]
    as_tree = _as_tree(sim)
    if as_tree is not None:
        candidates += [(mask, "edge-cut") for mask in _edge_masks(*as_tree)]
    best = None
    for mask, method in candidates:
        val = _ncut(mask, sim, deg)
        fg = foreground_side(mask, deg, seed)
        key = (val, int(np.flatnonzero(fg)[0]))
        if best is None or key < best[0]:
            best = (key, fg, method)
    (val, _), fg, method = best
    return Partition(fg, float(val), method)


def foreground_side(mask: np.ndarray, deg: np.ndarray, seed: int) -> np.ndarray:
    """Orient a bipartition so True marks the lower-volume side."""
    vol_in = deg[mask].sum()
    vol_out = deg[~mask].sum()
    if vol_in == vol_out:
        return mask if mask[seed] else ~mask
    return mask if vol_in < vol_out else ~mask


def exhaustive_partition(sim: SimilarityGraph) -> Partition:
    """Minimum-Ncut bipartition by enumeration (node 0 pinned to one side)."""
    n = sim.node_count
    if n > 20:
        raise ValueError("exhaustive search is limited to 20 nodes")
    best = None
    for bits in itertools.product((False, True), repeat=n - 1):
        if not any(bits):
            continue
        mask = np.array((False,) + bits)
        val = ncut_value(mask, sim)
        if best is None or val < best[0]:
            best = (val, mask)
    return Partition(best[1], best[0], "exhaustive")


def suppression_weights(partition: Partition, cfg: HSWConfig = HSWConfig()) -> SuppressionWeights:
    mask = np.asarray(partition.mask, dtype=bool)
    return SuppressionWeights(np.where(mask, 1.0, cfg.background_phi))
