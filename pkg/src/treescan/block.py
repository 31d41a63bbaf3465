"""The tree-scan vision block, a multi-stage backbone and synthetic test scenes."""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError
from .hsw import (HSWConfig, Partition, SuppressionWeights, ncut_partition,
                  suppression_weights, tree_similarity)
from .lattice_mst import EdgeWeightConfig, SpanningTree, boruvka_mst, build_lattice
from .patchgrid import (DeformationField, DeformationWeights, FeatureMap, PatchGridConfig,
                        PatchNode, extract_deformed_patches, predict_deformation)
from .ssm_scan import SSMParams, layer_norm, tree_scan


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass(frozen=True)
class BlockParams:
    """Weights of one block.  Linear maps are stored ``(in, out)``."""

    in_proj: np.ndarray      # (C, D)
    out_proj: np.ndarray     # (D, C)
    gate_proj: np.ndarray    # (C, D)
    ssm: SSMParams
    deform: DeformationWeights
    edge_cfg: EdgeWeightConfig = EdgeWeightConfig()
    hsw_cfg: HSWConfig = HSWConfig()
    use_hsw: bool = True

    @property
    def channels(self) -> int:
        return self.in_proj.shape[0]

    @property
    def inner(self) -> int:
        return self.in_proj.shape[1]

    def check(self, channels: int) -> None:
        c, d = channels, self.inner
        for name, got, want in (("in_proj", self.in_proj.shape, (c, d)),
                                ("out_proj", self.out_proj.shape, (d, c)),
                                ("gate_proj", self.gate_proj.shape, (c, d))):
            if tuple(got) != want:
                raise ConfigError(f"{name} has shape {tuple(got)}, expected {want}")
        if self.ssm.channels != d:
            raise ConfigError(f"SSM has {self.ssm.channels} channels, block inner width is {d}")
        self.deform.check(c)

    @classmethod
    def random(cls, channels: int, rng: np.random.Generator, inner: int | None = None,
               state_size: int = 8, edge_cfg: EdgeWeightConfig = EdgeWeightConfig(),
               hsw_cfg: HSWConfig = HSWConfig()) -> BlockParams:
        c = channels
        d = inner or channels
        return cls(rng.normal(0.0, c ** -0.5, (c, d)),
                   rng.normal(0.0, d ** -0.5, (d, c)),
                   rng.normal(0.0, c ** -0.5, (c, d)),
                   SSMParams.random(d, state_size, rng),
                   DeformationWeights.random(c, rng),
                   edge_cfg, hsw_cfg)


@dataclass
class BlockDiagnostics:
    nodes: list[PatchNode]
    field: DeformationField
    tree: SpanningTree
    partition: Partition | None
    phi: SuppressionWeights

    @property
    def mask(self) -> np.ndarray:
        if self.partition is None:
            return np.ones(self.tree.node_count, dtype=bool)
        return self.partition.mask

    @property
    def ncut_value(self) -> float | None:
        return None if self.partition is None else self.partition.ncut_value


def position_norm(fmap: FeatureMap) -> FeatureMap:
    """Layer norm over channels at every position."""
    return FeatureMap(layer_norm(fmap.data))


def uis_vss_block(fmap: FeatureMap, params: BlockParams,
                  cfg: PatchGridConfig) -> tuple[FeatureMap, BlockDiagnostics]:
    cfg.check(fmap)
    params.check(fmap.channels)
    normed = position_norm(fmap)

    field = predict_deformation(normed, cfg, params.deform)
    nodes = extract_deformed_patches(normed, cfg, field)
    edge_cfg = replace(params.edge_cfg, distance_normalizer=float(cfg.pitch))
    graph = build_lattice(nodes, cfg.rows, cfg.cols, edge_cfg)
    tree = boruvka_mst(graph)

    n = cfg.n_patches
    partition = None
    if params.use_hsw and n >= 2:
        partition = ncut_partition(tree_similarity(tree), params.hsw_cfg)
        phi = suppression_weights(partition, params.hsw_cfg)
    else:
        phi = SuppressionWeights(np.ones(n))

    feats = np.array([nd.feature for nd in nodes])
    x = feats @ params.in_proj
    y = tree_scan(tree, x, params.ssm, phi.phi).output
    y = y * sigmoid(feats @ params.gate_proj)
    out = (y @ params.out_proj).reshape(cfg.rows, 1, cfg.cols, 1, fmap.channels)
    p = cfg.pitch
    delta = np.broadcast_to(out, (cfg.rows, p, cfg.cols, p, fmap.channels))
    result = fmap.data + delta.reshape(fmap.data.shape)
    return FeatureMap(result), BlockDiagnostics(nodes, field, tree, partition, phi)


@dataclass(frozen=True)
class StageConfig:
    depth: int
    channels: int
    patch_pitch: int = 1

    def __post_init__(self):
        if self.depth < 1 or self.channels < 1 or self.patch_pitch < 1:
            raise ConfigError(f"invalid stage {self}")


TINY = (StageConfig(1, 8), StageConfig(1, 16), StageConfig(2, 32), StageConfig(1, 64))

STEM_POOL = 4


@dataclass(frozen=True)
class StageParams:
    blocks: tuple[BlockParams, ...]
    # projection from the previous stage's channels; None for the first stage
    down_w: np.ndarray | None = None
    down_b: np.ndarray | None = None


@dataclass(frozen=True)
class BackboneParams:
    stem_w: np.ndarray          # (3, C1)
    stem_b: np.ndarray
    stages: tuple[StageParams, ...]


def init_backbone(stages, seed: int = 0, in_channels: int = 3, state_size: int = 8,
                  edge_cfg: EdgeWeightConfig = EdgeWeightConfig(),
                  hsw_cfg: HSWConfig = HSWConfig(), zero_out_proj: bool = False) -> BackboneParams:
    rng = np.random.default_rng(seed)
    c1 = stages[0].channels
    stem_w = rng.normal(0.0, in_channels ** -0.5, (in_channels, c1))
    out = []
    prev = c1
    for k, st in enumerate(stages):
        down_w = down_b = None
        if k > 0:
            down_w = rng.normal(0.0, prev ** -0.5, (prev, st.channels))
            down_b = np.zeros(st.channels)
        blocks = []
        for _ in range(st.depth):
            bp = BlockParams.random(st.channels, rng, state_size=state_size,
                                    edge_cfg=edge_cfg, hsw_cfg=hsw_cfg)
            if zero_out_proj:
                bp = replace(bp, out_proj=np.zeros_like(bp.out_proj))
            blocks.append(bp)
        out.append(StageParams(tuple(blocks), down_w, down_b))
        prev = st.channels
    return BackboneParams(stem_w, np.zeros(c1), tuple(out))


def mean_pool(data: np.ndarray, k: int) -> np.ndarray:
    h, w, c = data.shape
    return data.reshape(h // k, k, w // k, k, c).mean(axis=(1, 3))


def stem(image: FeatureMap, params: BackboneParams) -> FeatureMap:
    """4x4 mean pool, per-channel mid-range centering, then a linear projection."""
    pooled = mean_pool(image.data, STEM_POOL)
    pooled = pooled - 0.5 * (pooled.min(axis=(0, 1)) + pooled.max(axis=(0, 1)))
    return FeatureMap(pooled @ params.stem_w + params.stem_b)


def _stage_pitch(st: StageConfig, fmap: FeatureMap) -> int:
    return min(st.patch_pitch, fmap.height, fmap.width)


@dataclass
class StageResult:
    output: FeatureMap
    diagnostics: list[BlockDiagnostics] = field(default_factory=list)
    elapsed_ms: float = 0.0


def check_backbone_input(image: FeatureMap, stages) -> None:
    factor = STEM_POOL * 2 ** (len(stages) - 1)
    if image.height % factor or image.width % factor:
        raise ConfigError(
            f"image {image.height}x{image.width} is not divisible by {factor} "
            f"({len(stages)} stages)")


def backbone_forward(image: FeatureMap, stages, params: BackboneParams,
                     samples_per_side: int = 2) -> list[StageResult]:
    """Stem, then per stage: (downsample,) ``depth`` blocks.  Returns every stage output."""
    if len(stages) != len(params.stages):
        raise ConfigError(f"{len(stages)} stage configs for {len(params.stages)} parameter sets")
    if image.channels != params.stem_w.shape[0]:
        raise ConfigError(f"image has {image.channels} channels, stem expects {params.stem_w.shape[0]}")
    check_backbone_input(image, stages)
    x = stem(image, params)
    results = []
    for k, (st, sp) in enumerate(zip(stages, params.stages)):
        t0 = time.perf_counter()
        if k > 0:
            x = FeatureMap(mean_pool(x.data, 2) @ sp.down_w + sp.down_b)
        pitch = _stage_pitch(st, x)
        cfg = PatchGridConfig.for_map(x, pitch, samples_per_side)
        diags = []
        for bp in sp.blocks:
            x, diag = uis_vss_block(x, bp, cfg)
            diags.append(diag)
        results.append(StageResult(x, diags, (time.perf_counter() - t0) * 1e3))
    return results


@dataclass(frozen=True)
class SyntheticScene:
    image: FeatureMap
    truth_mask: np.ndarray


def synth_scene(seed: int, width: int, height: int, n_blobs: int = 1) -> SyntheticScene:
    """Smooth color gradient plus ``n_blobs`` soft-edged ellipses of distinct colors."""
    if width < 1 or height < 1 or n_blobs < 0:
        raise ConfigError("scene dimensions must be positive and n_blobs non-negative")
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width]
    u = (xx + 0.5) / width
    v = (yy + 0.5) / height
    base = np.array([0.1, 0.45, 0.55]) + rng.uniform(-0.08, 0.08, 3)
    tilt = rng.uniform(-0.04, 0.04, (2, 3))
    img = base + u[..., None] * tilt[0] + v[..., None] * tilt[1]
    truth = np.zeros((height, width), dtype=bool)
    colors = [base]
    side = min(width, height)
    for _ in range(n_blobs):
        while True:
            color = rng.uniform(0.0, 1.0, 3)
            if min(np.linalg.norm(color - c) for c in colors) >= 0.6:
                break
        colors.append(color)
        ry, rx = rng.uniform(0.2, 0.32, 2) * side
        cy = rng.uniform(ry + 2, height - ry - 2) if height > 2 * ry + 4 else height / 2
        cx = rng.uniform(rx + 2, width - rx - 2) if width > 2 * rx + 4 else width / 2
        theta = rng.uniform(0.0, np.pi)
        dx, dy = xx + 0.5 - cx, yy + 0.5 - cy
        a = (dx * np.cos(theta) + dy * np.sin(theta)) / rx
        b = (-dx * np.sin(theta) + dy * np.cos(theta)) / ry
        r = np.sqrt(a * a + b * b)
        # signed distance to the rim in pixels, roughly
        dist = (1.0 - r) * min(rx, ry)
        alpha = sigmoid(dist / 0.75)[..., None]
        img = img * (1.0 - alpha) + color * alpha
        truth |= r < 1.0
    return SyntheticScene(FeatureMap(np.clip(img, 0.0, 1.0)), truth)


def pooled_truth(mask: np.ndarray, cell: int) -> np.ndarray:
    """Majority vote of ``mask`` over ``cell x cell`` blocks, flattened row-major."""
    h, w = mask.shape
    frac = mask.reshape(h // cell, cell, w // cell, cell).mean(axis=(1, 3))
    return (frac > 0.5).ravel()


def iou(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    union = np.logical_or(a, b).sum()
    return 1.0 if union == 0 else float(np.logical_and(a, b).sum() / union)

