import numpy as np
import pytest

from treescan.errors import ConfigError, StructureError
from treescan.lattice_mst import (EdgeWeightConfig, LatticeGraph, boruvka_mst, build_lattice,
                                  edge_dissimilarity, kruskal_mst, tree_from_edges)
from treescan.patchgrid import PatchNode
from treescan.selfcheck import random_lattice


def nodes_for(rows, cols, feats=None, pitch=1.0):
    out = []
    for k in range(rows * cols):
        r, c = divmod(k, cols)
        f = np.ones(2) if feats is None else feats[k]
        out.append(PatchNode(k, (r, c), ((c + 0.5) * pitch, (r + 0.5) * pitch), (pitch, pitch), f))
    return out


@pytest.mark.parametrize("rows,cols,count", [(2, 2, 4), (1, 3, 2), (5, 7, 58), (1, 1, 0)])
def test_lattice_edge_count(rows, cols, count):
    g = build_lattice(nodes_for(rows, cols), rows, cols, EdgeWeightConfig())
    assert len(g.ei) == count == rows * (cols - 1) + cols * (rows - 1)


def test_one_by_three_is_a_path():
    g = build_lattice(nodes_for(1, 3), 1, 3, EdgeWeightConfig())
    assert sorted(zip(g.ei.tolist(), g.ej.tolist())) == [(0, 1), (1, 2)]


def test_dissimilarity_spatial_only():
    f = np.array([1.0, 2.0])
    a = PatchNode(0, (0, 0), (0.0, 0.0), (1.0, 1.0), f)
    b = PatchNode(1, (0, 1), (3.0, 4.0), (1.0, 1.0), f)
    assert edge_dissimilarity(a, b, EdgeWeightConfig(0.5, 5.0)) == pytest.approx(0.5, abs=1e-15)


def test_dissimilarity_cosine_only():
    a = PatchNode(0, (0, 0), (1.0, 1.0), (1.0, 1.0), np.array([1.0, 0.0]))
    b = PatchNode(1, (0, 1), (1.0, 1.0), (1.0, 1.0), np.array([0.0, 1.0]))
    assert edge_dissimilarity(a, b, EdgeWeightConfig(0.0)) == 1.0


def test_zero_feature_counts_as_orthogonal():
    a = PatchNode(0, (0, 0), (0.0, 0.0), (1.0, 1.0), np.zeros(2))
    b = PatchNode(1, (0, 1), (0.0, 0.0), (1.0, 1.0), np.ones(2))
    assert edge_dissimilarity(a, b, EdgeWeightConfig(0.0)) == 1.0


def test_vectorized_weights_match_scalar(rng):
    rows, cols = 4, 5
    feats = rng.normal(size=(rows * cols, 3))
    nodes = nodes_for(rows, cols, feats, pitch=2.0)
    cfg = EdgeWeightConfig(0.3, 2.0)
    g = build_lattice(nodes, rows, cols, cfg)
    for i, j, w in g.edges:
        assert abs(w - edge_dissimilarity(nodes[i], nodes[j], cfg)) <= 1e-12


def test_alpha_validated():
    with pytest.raises(ConfigError):
        EdgeWeightConfig(alpha=1.5)
    with pytest.raises(ConfigError):
        EdgeWeightConfig(distance_normalizer=0.0)


@pytest.fixture(params=["boruvka", "kruskal"])
def mst(request, kernels):
    if request.param == "kruskal":
        return kruskal_mst
    return lambda g: boruvka_mst(g, kernels)


def test_path_keeps_every_edge(mst):
    g = LatticeGraph.from_edges(4, [(0, 1, 1.0), (1, 2, 2.0), (2, 3, 3.0)])
    assert mst(g).edge_set == {(0, 1), (1, 2), (2, 3)}


def test_cycle_drops_heaviest(mst):
    g = LatticeGraph.from_edges(4, [(0, 1, 1.0), (1, 2, 2.0), (2, 3, 3.0), (3, 0, 4.0)])
    t = mst(g)
    assert (0, 3) not in t.edge_set and len(t.edge_set) == 3
    assert t.total_weight == 6.0


def test_single_and_two_node(mst):
    assert mst(LatticeGraph.from_edges(1, [])).edge_set == set()
    assert mst(LatticeGraph.from_edges(2, [(1, 0, 0.25)])).edge_set == {(0, 1)}


def test_disconnected_graph_raises(mst):
    g = LatticeGraph.from_edges(4, [(0, 1, 1.0), (2, 3, 1.0)])
    with pytest.raises(StructureError, match="node 2"):
        mst(g)


def test_ties_broken_by_ids(mst):
    # every weight equal: the lexicographically smallest spanning tree wins
    g = LatticeGraph.from_edges(4, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (0, 3, 1.0), (0, 2, 1.0)])
    assert mst(g).edge_set == {(0, 1), (0, 2), (0, 3)}


@pytest.mark.parametrize("seed", range(5))
def test_boruvka_matches_kruskal_16x16(seed, kernels):
    g = random_lattice(np.random.default_rng(seed), 16, 16)
    a, b = boruvka_mst(g, kernels), kruskal_mst(g)
    assert a.edge_set == b.edge_set
    assert abs(a.total_weight - b.total_weight) <= 1e-12 * b.total_weight


def test_tree_structure(rng):
    g = random_lattice(rng, 6, 7)
    t = boruvka_mst(g)
    t.validate()
    assert t.root == 0 and t.parent[0] == 0
    assert t.order[0] == 0
    depth = t.depth
    for i in t.order[1:]:
        assert depth[i] == depth[t.parent[i]] + 1


def test_reroot_keeps_edges(rng):
    t = boruvka_mst(random_lattice(rng, 5, 5))
    r = t.rerooted(17)
    r.validate()
    assert r.root == 17 and r.edge_set == t.edge_set


def test_tree_from_edges_rejects_cycles():
    with pytest.raises(StructureError):
        tree_from_edges(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)])


def test_self_loop_rejected():
    with pytest.raises(StructureError):
        LatticeGraph.from_edges(2, [(1, 1, 0.5)])


def test_non_finite_weight_rejected(mst):
    with pytest.raises(StructureError):
        mst(LatticeGraph.from_edges(2, [(0, 1, np.nan)]))
