import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from treescan.hsw import SimilarityGraph, exhaustive_partition, ncut_partition, ncut_value
from treescan.lattice_mst import LatticeGraph, boruvka_mst, kruskal_mst
from treescan.ppm import decode_ppm, encode_ppm
from treescan.selfcheck import random_ssm, random_tree
from treescan.ssm_scan import tree_scan, tree_scan_bruteforce

seeds = st.integers(0, 2 ** 32 - 1)


@st.composite
def trees(draw, max_nodes=24):
    n = draw(st.integers(1, max_nodes))
    parents = [draw(st.integers(0, i - 1)) for i in range(1, n)]
    weights = draw(st.lists(st.floats(0.01, 3.0), min_size=n - 1, max_size=n - 1))
    return n, [(i + 1, p, w) for i, (p, w) in enumerate(zip(parents, weights))]


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(1, 40), st.integers(1, 4), st.integers(1, 4))
def test_tree_scan_equals_bruteforce(seed, n, d, s):
    rng = np.random.default_rng(seed)
    tree = random_tree(rng, n, root=int(rng.integers(n)))
    x = rng.normal(size=(n, d))
    p = random_ssm(rng, d, s)
    phi = rng.uniform(0, 1, n)
    a = tree_scan(tree, x, p, phi).hidden
    b = tree_scan_bruteforce(tree, x, p, phi).hidden
    assert np.abs(a - b).max() <= 1e-9


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 8), st.integers(1, 8),
       st.lists(st.integers(0, 5), min_size=112, max_size=112))
def test_boruvka_equals_kruskal_with_ties(rows, cols, levels):
    # coarse integer weights force many ties through the id tie-break
    ids = np.arange(rows * cols).reshape(rows, cols)
    pairs = list(zip(ids[:, :-1].ravel(), ids[:, 1:].ravel()))
    pairs += list(zip(ids[:-1, :].ravel(), ids[1:, :].ravel()))
    g = LatticeGraph.from_edges(rows * cols, [(int(a), int(b), float(levels[k]))
                                              for k, (a, b) in enumerate(pairs)])
    a, b = boruvka_mst(g), kruskal_mst(g)
    assert a.edge_set == b.edge_set and a.total_weight == b.total_weight


@settings(max_examples=40, deadline=None)
@given(trees(max_nodes=10))
def test_ncut_within_gate(tree):
    n, edges = tree
    if n < 2:
        return
    sim = SimilarityGraph.from_edges(n, [(a, b, float(np.exp(-w))) for a, b, w in edges])
    got = ncut_partition(sim)
    best = exhaustive_partition(sim)
    assert got.ncut_value <= best.ncut_value * 1.05
    assert abs(ncut_value(got.mask, sim) - got.ncut_value) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.sampled_from([1, 7, 255, 256, 65535]), seeds)
def test_ppm_round_trip(h, w, maxval, seed):
    px = np.random.default_rng(seed).integers(0, maxval + 1, (h, w, 3))
    got, mv = decode_ppm(encode_ppm(px, maxval))
    assert mv == maxval and np.array_equal(got, px)
