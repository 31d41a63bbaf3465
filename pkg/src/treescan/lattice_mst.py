"""4-connected patch lattice, hybrid edge weights and minimum spanning trees."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import ConfigError, StructureError
from .patchgrid import PatchNode


@dataclass(frozen=True)
class EdgeWeightConfig:
    alpha: float = 0.5
    distance_normalizer: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not self.distance_normalizer > 0.0:
            raise ConfigError("distance_normalizer must be positive")


@dataclass(frozen=True)
class LatticeGraph:
    """Undirected weighted graph stored as parallel edge arrays with ``i < j``."""

    node_count: int
    ei: np.ndarray
    ej: np.ndarray
    weight: np.ndarray

    @property
    def edges(self) -> list[tuple[int, int, float]]:
        return [(int(a), int(b), float(w)) for a, b, w in zip(self.ei, self.ej, self.weight)]

    @property
    def adjacency(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.node_count)]
        for a, b in zip(self.ei.tolist(), self.ej.tolist()):
            adj[a].append(b)
            adj[b].append(a)
        return [sorted(nbrs) for nbrs in adj]

    @classmethod
    def from_edges(cls, node_count: int, edges) -> LatticeGraph:
        """Build from ``(i, j, w)`` triples, normalizing each pair to ``i < j``."""
        edges = list(edges)
        ei = np.array([min(a, b) for a, b, _ in edges], dtype=np.int64)
        ej = np.array([max(a, b) for a, b, _ in edges], dtype=np.int64)
        w = np.array([wt for _, _, wt in edges], dtype=float)
        if np.any(ei == ej):
            raise StructureError("self-loop in edge list")
        return cls(node_count, ei, ej, w)


@dataclass
class SpanningTree:
    """A spanning tree rooted at ``root``; ``parent[root] == root``.

    ``order`` lists nodes root-first (breadth-first, children ascending).
    """

    node_count: int
    root: int
    parent: np.ndarray
    children: list[list[int]]
    order: np.ndarray
    tree_edges: list[tuple[int, int, float]] = field(default_factory=list)

    @property
    def total_weight(self) -> float:
        return float(sum(w for _, _, w in self.tree_edges))

    @property
    def edge_set(self) -> set[tuple[int, int]]:
        return {(a, b) for a, b, _ in self.tree_edges}

    @property
    def depth(self) -> np.ndarray:
        depth = np.zeros(self.node_count, dtype=np.int64)
        for i in self.order[1:]:
            depth[i] = depth[self.parent[i]] + 1
        return depth

    def rerooted(self, root: int) -> SpanningTree:
        return tree_from_edges(self.node_count, self.tree_edges, root)

    def validate(self) -> None:
        n = self.node_count
        if len(self.tree_edges) != n - 1:
            raise StructureError(f"tree has {len(self.tree_edges)} edges for {n} nodes")
        if len(self.order) != n or set(self.order.tolist()) != set(range(n)):
            raise StructureError("traversal order does not cover every node")
        for i in range(n):
            steps, x = 0, i
            while x != self.root:
                x = int(self.parent[x])
                steps += 1
                if steps > n:
                    raise StructureError(f"parent pointers from node {i} never reach the root")
            for c in self.children[i]:
                if self.parent[c] != i:
                    raise StructureError(f"child {c} of {i} has parent {self.parent[c]}")


def tree_from_edges(node_count: int, edges, root: int = 0) -> SpanningTree:
    """Root an undirected edge list by breadth-first traversal."""
    edges = sorted((min(a, b), max(a, b), float(w)) for a, b, w in edges)
    adj: list[list[int]] = [[] for _ in range(node_count)]
    for a, b, _ in edges:
        adj[a].append(b)
        adj[b].append(a)
    parent = np.full(node_count, -1, dtype=np.int64)
    parent[root] = root
    children: list[list[int]] = [[] for _ in range(node_count)]
    order = [root]
    queue = deque([root])
    while queue:
        x = queue.popleft()
        for y in sorted(adj[x]):
            if parent[y] == -1:
                parent[y] = x
                children[x].append(y)
                order.append(y)
                queue.append(y)
    if len(order) != node_count:
        missing = int(np.flatnonzero(parent == -1)[0])
        raise StructureError(f"node {missing} is not reachable from root {root}")
    if len(edges) != node_count - 1:
        raise StructureError(f"{len(edges)} edges cannot form a tree on {node_count} nodes")
    return SpanningTree(node_count, root, parent, children,
                        np.array(order, dtype=np.int64), edges)


def edge_dissimilarity(a: PatchNode, b: PatchNode, cfg: EdgeWeightConfig) -> float:
    """alpha * normalized center distance + (1 - alpha) * cosine distance."""
    fa = np.asarray(a.feature, dtype=float)
    fb = np.asarray(b.feature, dtype=float)
    if fa.shape != fb.shape:
        raise ConfigError("feature lengths differ")
    dist = np.hypot(a.center[0] - b.center[0], a.center[1] - b.center[1])
    na, nb = np.linalg.norm(fa), np.linalg.norm(fb)
    cos = float(fa @ fb / (na * nb)) if na > 0.0 and nb > 0.0 else 0.0
    return float(cfg.alpha * dist / cfg.distance_normalizer + (1.0 - cfg.alpha) * (1.0 - cos))


def _lattice_pairs(rows: int, cols: int) -> tuple[np.ndarray, np.ndarray]:
    ids = np.arange(rows * cols).reshape(rows, cols)
    ei = np.concatenate([ids[:, :-1].ravel(), ids[:-1, :].ravel()])
    ej = np.concatenate([ids[:, 1:].ravel(), ids[1:, :].ravel()])
    order = np.lexsort((ej, ei))
    return ei[order].astype(np.int64), ej[order].astype(np.int64)


def build_lattice(nodes: list[PatchNode], rows: int, cols: int,
                  cfg: EdgeWeightConfig) -> LatticeGraph:
    if len(nodes) != rows * cols:
        raise ConfigError(f"{len(nodes)} nodes for a {rows}x{cols} grid")
    ei, ej = _lattice_pairs(rows, cols)
    if ei.size == 0:
        return LatticeGraph(rows * cols, ei, ej, np.zeros(0))
    feats = np.array([nd.feature for nd in nodes], dtype=float)
    centers = np.array([nd.center for nd in nodes], dtype=float)
    norms = np.linalg.norm(feats, axis=1)
    dots = np.einsum("ij,ij->i", feats[ei], feats[ej])
    denom = norms[ei] * norms[ej]
    ok = denom > 0.0
    cos = np.zeros(ei.size)
    cos[ok] = dots[ok] / denom[ok]
    d = centers[ei] - centers[ej]
    dist = np.hypot(d[:, 0], d[:, 1])
    w = cfg.alpha * dist / cfg.distance_normalizer + (1.0 - cfg.alpha) * (1.0 - cos)
    # rounding can push 1 - cos a hair below zero for parallel features
    return LatticeGraph(rows * cols, ei, ej, np.maximum(w, 0.0))


def _check_input(graph: LatticeGraph) -> None:
    if graph.node_count < 1:
        raise StructureError("graph has no nodes")
    if not np.all(np.isfinite(graph.weight)):
        raise StructureError("edge weights must be finite")


def _unreached(graph: LatticeGraph) -> int:
    adj = graph.adjacency
    seen = {0}
    stack = [0]
    while stack:
        x = stack.pop()
        for y in adj[x]:
            if y not in seen:
                seen.add(y)
                stack.append(y)
    return min(set(range(graph.node_count)) - seen)


def boruvka_mst(graph: LatticeGraph, kernels=None) -> SpanningTree:
    """Contractive Boruvka; ties ordered by (weight, min id, max id)."""
    _check_input(graph)
    kernels = kernels or _backend.kernels
    n = graph.node_count
    if n == 1:
        return tree_from_edges(1, [])
    mask = kernels.boruvka(n, np.ascontiguousarray(graph.ei, dtype=np.int64),
                           np.ascontiguousarray(graph.ej, dtype=np.int64),
                           np.ascontiguousarray(graph.weight, dtype=float))
    if mask is None:
        raise StructureError(f"graph is disconnected: node {_unreached(graph)} is unreachable from node 0")
    idx = np.flatnonzero(mask)
    return tree_from_edges(n, zip(graph.ei[idx].tolist(), graph.ej[idx].tolist(),
                                  graph.weight[idx].tolist()))


class _DisjointSet:
    def __init__(self, n):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b):
        a, b = self.find(a), self.find(b)
        if a == b:
            return False
        if self.size[a] < self.size[b]:
            a, b = b, a
        self.parent[b] = a
        self.size[a] += self.size[b]
        return True


def kruskal_mst(graph: LatticeGraph) -> SpanningTree:
    """Sorted-edge Kruskal with a disjoint-set forest; same tie-breaking as Boruvka."""
    _check_input(graph)
    n = graph.node_count
    dsu = _DisjointSet(n)
    chosen = []
    for i, j, w in sorted(graph.edges, key=lambda e: (e[2], e[0], e[1])):
        if dsu.union(i, j):
            chosen.append((i, j, w))
            if len(chosen) == n - 1:
                break
    if len(chosen) != n - 1:
        raise StructureError(f"graph is disconnected: node {_unreached(graph)} is unreachable from node 0")
    return tree_from_edges(n, chosen)
