import hashlib
from dataclasses import replace

import numpy as np
import pytest

from treescan.block import (TINY, BlockParams, StageConfig, backbone_forward, init_backbone,
                            iou, pooled_truth, synth_scene, uis_vss_block)
from treescan.errors import ConfigError
from treescan.patchgrid import FeatureMap, PatchGridConfig

# frozen from the first run of this implementation
GOLDEN = {
    1: "3f251295418ba4b5faf0dd809d735b7a42ee7fcb7bcad662260e4bd8e008c8e3",
    2: "a70bdc26d2637ca56abe596a234e2e4ead332970d4de2211aa1c8fe573f774a2",
    4: "eab0d2011bf0fc88bd28bbebd68a59a1bf337a1e9b1e35e86036f5dbedcfd258",
}


def golden_fixture():
    rng = np.random.default_rng(2024)
    fmap = FeatureMap(rng.normal(size=(16, 16, 8)))
    return fmap, BlockParams.random(8, rng)


def digest(fmap):
    return hashlib.sha256(fmap.data.astype("<f8").tobytes()).hexdigest()


@pytest.mark.parametrize("pitch", [1, 2, 4])
def test_golden_output(pitch):
    fmap, params = golden_fixture()
    cfg = PatchGridConfig.for_map(fmap, pitch, 2)
    out, _ = uis_vss_block(fmap, params, cfg)
    again, _ = uis_vss_block(fmap, params, cfg)
    assert np.array_equal(out.data, again.data)
    assert digest(out) == GOLDEN[pitch]


def test_zero_out_proj_is_identity(rng):
    fmap = FeatureMap(rng.normal(size=(8, 8, 4)))
    params = BlockParams.random(4, rng)
    params = replace(params, out_proj=np.zeros_like(params.out_proj))
    out, diag = uis_vss_block(fmap, params, PatchGridConfig.for_map(fmap, 2))
    assert np.array_equal(out.data, fmap.data)
    diag.tree.validate()


def test_constant_input(rng):
    fmap = FeatureMap(np.tile(rng.normal(size=4), (8, 8, 1)))
    params = BlockParams.random(4, rng)
    cfg = PatchGridConfig.for_map(fmap, 2)
    out, diag = uis_vss_block(fmap, params, cfg)
    diag.tree.validate()
    assert len(diag.tree.tree_edges) == cfg.n_patches - 1
    # identical features: only the spatial term is left
    for a, b, w in diag.tree.tree_edges:
        ca, cb = diag.nodes[a].center, diag.nodes[b].center
        assert abs(w - 0.5 * np.hypot(ca[0] - cb[0], ca[1] - cb[1]) / cfg.pitch) <= 1e-12
    cells = out.data.reshape(4, 2, 4, 2, 4)
    assert np.all(cells == cells[:, :1, :, :1])


def test_single_patch_skips_partition(rng):
    fmap = FeatureMap(rng.normal(size=(4, 4, 3)))
    params = BlockParams.random(3, rng)
    out, diag = uis_vss_block(fmap, params, PatchGridConfig.for_map(fmap, 4))
    assert diag.partition is None and diag.mask.tolist() == [True]
    assert np.all(np.isfinite(out.data))


def test_hsw_flag_controls_phi(rng):
    fmap = FeatureMap(rng.normal(size=(8, 8, 4)))
    params = BlockParams.random(4, rng)
    cfg = PatchGridConfig.for_map(fmap, 1)
    _, on = uis_vss_block(fmap, params, cfg)
    _, off = uis_vss_block(fmap, replace(params, use_hsw=False), cfg)
    assert set(np.unique(on.phi.phi)) <= {0.7, 1.0}
    assert np.all(off.phi.phi == 1.0) and off.partition is None


def test_block_rejects_wrong_channels(rng):
    fmap = FeatureMap(rng.normal(size=(4, 4, 3)))
    with pytest.raises(ConfigError):
        uis_vss_block(fmap, BlockParams.random(5, rng), PatchGridConfig.for_map(fmap, 2))


def test_tiny_backbone_shapes():
    scene = synth_scene(0, 64, 64)
    res = backbone_forward(scene.image, TINY, init_backbone(TINY, seed=0))
    assert [r.output.data.shape for r in res] == [(16, 16, 8), (8, 8, 16), (4, 4, 32), (2, 2, 64)]
    assert [len(r.diagnostics) for r in res] == [1, 1, 2, 1]


def test_zero_image_zero_branches():
    image = FeatureMap(np.zeros((64, 64, 3)))
    params = init_backbone(TINY, seed=3, zero_out_proj=True)
    for r in backbone_forward(image, TINY, params):
        assert np.all(r.output.data == 0.0)


def test_finite_over_seeds():
    stages = (StageConfig(1, 8, 2), StageConfig(1, 16, 2), StageConfig(1, 32, 1),
              StageConfig(1, 64, 1))
    for seed in range(100):
        scene = synth_scene(seed, 32, 32, n_blobs=seed % 3)
        res = backbone_forward(scene.image, stages, init_backbone(stages, seed=seed))
        assert all(np.all(np.isfinite(r.output.data)) for r in res), seed


def test_backbone_input_checks():
    with pytest.raises(ConfigError):
        backbone_forward(FeatureMap(np.zeros((60, 64, 3))), TINY, init_backbone(TINY))
    with pytest.raises(ConfigError):
        backbone_forward(FeatureMap(np.zeros((64, 64, 1))), TINY, init_backbone(TINY))
    with pytest.raises(ConfigError):
        StageConfig(0, 8)


def test_pitch_larger_than_map_is_capped():
    stages = (StageConfig(1, 4, 8), StageConfig(1, 4, 8))
    res = backbone_forward(synth_scene(1, 16, 16).image, stages, init_backbone(stages))
    assert res[1].diagnostics[0].tree.node_count == 1


# --- synthetic scenes -------------------------------------------------------------

def test_scene_deterministic():
    a, b = synth_scene(4, 32, 48), synth_scene(4, 32, 48)
    assert np.array_equal(a.image.data, b.image.data)
    assert np.array_equal(a.truth_mask, b.truth_mask)
    assert a.image.data.shape == (48, 32, 3)


def test_scene_without_blobs():
    s = synth_scene(2, 16, 16, n_blobs=0)
    assert not s.truth_mask.any()


def test_seed_seven_segmentation():
    scene = synth_scene(7, 64, 64)
    res = backbone_forward(scene.image, TINY, init_backbone(TINY, seed=0))
    mask = res[0].diagnostics[0].mask
    assert iou(mask, pooled_truth(scene.truth_mask, 4)) >= 0.9


def test_iou_basics():
    assert iou([True, False], [True, False]) == 1.0
    assert iou([False, False], [False, False]) == 1.0
    assert iou([True, True], [True, False]) == 0.5
