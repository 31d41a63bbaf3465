import numpy as np
import pytest

from treescan.errors import ConfigError, StructureError
from treescan.hsw import (DEFAULT_BACKGROUND_PHI, HSWConfig, Partition, SimilarityGraph,
                          exhaustive_partition, fiedler_vector, ncut_partition, ncut_value,
                          suppression_weights, tree_similarity)
from treescan.lattice_mst import tree_from_edges
from treescan.selfcheck import ncut_trial, random_scan_case, random_similarity_tree
from treescan.ssm_scan import discretize_zoh, tree_scan


def path3():
    return SimilarityGraph.from_edges(3, [(0, 1, 1.0), (1, 2, 0.1)])


def test_similarity_from_weights(rng):
    tree = tree_from_edges(3, [(0, 1, 0.0), (1, 2, np.log(2.0))])
    sim = tree_similarity(tree)
    assert sorted(sim.s.tolist()) == [0.5, 1.0]
    w = np.sort(rng.uniform(0, 5, 20))
    tree = tree_from_edges(21, [(i, i + 1, float(w[i])) for i in range(20)])
    s = dict(((a, b), v) for a, b, v in tree_similarity(tree).sym_edges)
    vals = [s[(i, i + 1)] for i in range(20)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_two_node_ncut_is_two():
    sim = SimilarityGraph.from_edges(2, [(0, 1, 0.8)])
    assert ncut_value(np.array([True, False]), sim) == 2.0
    part = ncut_partition(sim)
    assert part.ncut_value == 2.0 and part.mask.sum() == 1


def test_hand_case_value():
    val = ncut_value(np.array([False, False, True]), path3())
    assert abs(val - (0.1 / 2.1 + 0.1 / 0.1)) <= 1e-15
    assert round(val, 5) == 1.04762


def test_ncut_symmetric(rng):
    sim = random_similarity_tree(rng, 9)
    for _ in range(20):
        m = rng.uniform(size=9) < 0.5
        if m.all() or not m.any():
            continue
        assert ncut_value(m, sim) == ncut_value(~m, sim)


def test_ncut_rejects_trivial_partition():
    with pytest.raises(ValueError):
        ncut_value(np.ones(3, dtype=bool), path3())


def test_hand_case_partition():
    part = ncut_partition(path3())
    best = exhaustive_partition(path3())
    assert abs(part.ncut_value - best.ncut_value) <= 1e-15
    # the lone low-volume node is the foreground
    assert part.mask.tolist() == [False, False, True]


def test_bridge_is_cut():
    edges = [(i, i + 1, 0.9) for i in range(7)]
    edges[4] = (4, 5, 0.01)
    sim = SimilarityGraph.from_edges(8, edges)
    part = ncut_partition(sim)
    best = exhaustive_partition(sim)
    sides = set(np.flatnonzero(part.mask).tolist())
    assert sides in ({0, 1, 2, 3, 4}, {5, 6, 7})
    assert set(np.flatnonzero(best.mask).tolist()) in ({0, 1, 2, 3, 4}, {5, 6, 7})


def test_matches_exhaustive_on_random_trees():
    assert max(ncut_trial(s) for s in range(100)) <= 0.05


def test_non_tree_graph_uses_sweep(rng):
    # a 3x3 grid has cycles, so only sweep candidates apply
    edges = []
    for r in range(3):
        for c in range(3):
            k = 3 * r + c
            if c < 2:
                edges.append((k, k + 1, 1.0))
            if r < 2:
                edges.append((k, k + 3, 1.0))
    edges[0] = (0, 1, 0.01)
    edges[1] = (0, 3, 0.01)
    sim = SimilarityGraph.from_edges(9, edges)
    part = ncut_partition(sim)
    assert part.method == "spectral-sweep"
    best = exhaustive_partition(sim)
    assert part.ncut_value <= 1.05 * best.ncut_value


def test_fiedler_separates_bridge():
    edges = [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 0.01), (3, 4, 1.0), (4, 5, 1.0)]
    y = fiedler_vector(SimilarityGraph.from_edges(6, edges))
    assert np.all(np.sign(y[:3]) == np.sign(y[0])) and np.all(np.sign(y[3:]) == -np.sign(y[0]))


def test_disconnected_raises():
    sim = SimilarityGraph.from_edges(4, [(0, 1, 1.0), (2, 3, 1.0)])
    with pytest.raises(StructureError):
        ncut_partition(sim)


def test_needs_two_nodes():
    with pytest.raises(ValueError):
        ncut_partition(SimilarityGraph.from_edges(1, []))


def test_suppression_weights():
    all_fg = Partition(np.ones(4, dtype=bool), 0.0, "x")
    all_bg = Partition(np.zeros(4, dtype=bool), 0.0, "x")
    assert suppression_weights(all_fg).phi.tolist() == [1.0] * 4
    assert DEFAULT_BACKGROUND_PHI == 0.7
    assert suppression_weights(all_bg).phi.tolist() == [0.7] * 4
    mixed = Partition(np.array([True, False, True]), 0.0, "x")
    assert suppression_weights(mixed, HSWConfig(0.5)).phi.tolist() == [1.0, 0.5, 1.0]


@pytest.mark.parametrize("phi", [0.0, 1.0, -0.1, 1.5])
def test_background_phi_range(phi):
    with pytest.raises(ConfigError):
        HSWConfig(phi)


def test_partition_deterministic(rng):
    sim = random_similarity_tree(rng, 12)
    a, b = ncut_partition(sim), ncut_partition(sim)
    assert np.array_equal(a.mask, b.mask) and a.ncut_value == b.ncut_value


@pytest.mark.parametrize("seed", range(20))
def test_scale_invariance(seed):
    rng = np.random.default_rng(seed)
    sim = random_similarity_tree(rng, int(rng.integers(2, 13)))
    scaled = SimilarityGraph(sim.node_count, sim.ei, sim.ej, sim.s * 3.7)
    a, b = ncut_partition(sim), ncut_partition(scaled)
    assert np.array_equal(a.mask, b.mask)
    assert abs(a.ncut_value - b.ncut_value) <= 1e-12


def test_suppression_idempotent(rng):
    part = Partition(rng.uniform(size=10) < 0.5, 1.0, "x")
    once = suppression_weights(part)
    twice = suppression_weights(Partition(once.phi == 1.0, 1.0, "x"))
    assert np.array_equal(once.phi, twice.phi)


def test_zero_phi_removes_background_sources(rng):
    tree, x, p, _ = random_scan_case(rng)
    n = tree.node_count
    fg = np.arange(n) % 2 == 0
    phi = np.where(fg, 1.0, 0.0)
    got = tree_scan(tree, x, p, phi, normalize=False).hidden
    # same result as zeroing the background features while keeping their selection
    st = discretize_zoh(p, x)
    xz = np.where(fg[:, None], x, 0.0)
    want = tree_scan(tree, xz, st, normalize=False).hidden
    assert np.array_equal(got, want)
