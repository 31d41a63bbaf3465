"""Feature maps, patch deformation prediction and deformed-patch resampling.

Coordinates are continuous feature-cell units: cell ``(row, col)`` covers
``[col, col + 1) x [row, row + 1)`` and its center sits at
``(col + 0.5, row + 0.5)``.  Points are written ``(x, y)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericError

SCALE_MIN = 0.8
SCALE_MAX = 1.2


def softplus(z):
    z = np.asarray(z, dtype=float)
    # log1p(exp(z)) is exact at the analytic identity point ln(e - 1)
    return np.where(z > 30.0, z, np.log1p(np.exp(np.minimum(z, 30.0))))


@dataclass(frozen=True)
class FeatureMap:
    """Dense ``(height, width, channels)`` grid of finite reals."""

    data: np.ndarray

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=float)
        if data.ndim != 3 or min(data.shape) < 1:
            raise ConfigError(f"feature map must be a non-empty 3-D array, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise NumericError("feature map contains non-finite values")
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class PatchGridConfig:
    pitch: int
    rows: int
    cols: int
    samples_per_side: int = 2

    @classmethod
    def for_map(cls, fmap: FeatureMap, pitch: int, samples_per_side: int = 2) -> PatchGridConfig:
        if pitch < 1 or fmap.height % pitch or fmap.width % pitch:
            raise ConfigError(
                f"pitch {pitch} does not tile a {fmap.height}x{fmap.width} map")
        return cls(pitch, fmap.height // pitch, fmap.width // pitch, samples_per_side)

    @property
    def n_patches(self) -> int:
        return self.rows * self.cols

    def check(self, fmap: FeatureMap) -> None:
        if min(self.pitch, self.rows, self.cols, self.samples_per_side) < 1:
            raise ConfigError(f"non-positive patch grid parameter in {self}")
        if self.pitch * self.rows != fmap.height or self.pitch * self.cols != fmap.width:
            raise ConfigError(
                f"{self.rows}x{self.cols} patches of pitch {self.pitch} do not tile "
                f"a {fmap.height}x{fmap.width} map")


@dataclass(frozen=True)
class DeformationWeights:
    """Parameters of the deformation predictor.

    ``conv3x3`` has shape ``(3, 3, C, C)`` and maps the 3x3 neighborhood of
    pooled patch features (zero padded) to a hidden vector;
    ``w_offset`` and ``w_scale`` are ``(2, C)``; ``b_scale`` is ``(2,)``.
    """

    conv3x3: np.ndarray
    w_offset: np.ndarray
    w_scale: np.ndarray
    b_scale: np.ndarray

    @property
    def channels(self) -> int:
        return self.conv3x3.shape[2]

    def check(self, channels: int) -> None:
        c = channels
        shapes = {
            "conv3x3": (self.conv3x3.shape, (3, 3, c, c)),
            "w_offset": (self.w_offset.shape, (2, c)),
            "w_scale": (self.w_scale.shape, (2, c)),
            "b_scale": (self.b_scale.shape, (2,)),
        }
        for name, (got, want) in shapes.items():
            if tuple(got) != want:
                raise ConfigError(f"{name} has shape {tuple(got)}, expected {want}")
        for name in shapes:
            if not np.all(np.isfinite(getattr(self, name))):
                raise NumericError(f"{name} contains non-finite values")

    @classmethod
    def identity(cls, channels: int) -> DeformationWeights:
        """Zero weights with the bias that makes every scale exactly 1."""
        c = channels
        return cls(np.zeros((3, 3, c, c)), np.zeros((2, c)), np.zeros((2, c)),
                   np.full(2, np.log(np.e - 1.0)))

    @classmethod
    def random(cls, channels: int, rng: np.random.Generator, scale: float = 0.1) -> DeformationWeights:
        c = channels
        ident = cls.identity(c)
        return cls(rng.normal(0.0, scale / np.sqrt(9 * c), (3, 3, c, c)),
                   rng.normal(0.0, scale, (2, c)),
                   rng.normal(0.0, scale, (2, c)),
                   ident.b_scale.copy())


@dataclass(frozen=True)
class DeformationField:
    """Per-patch offsets and scales, each array of length ``n_patches``."""

    dx: np.ndarray
    dy: np.ndarray
    dw: np.ndarray
    dh: np.ndarray

    @classmethod
    def identity(cls, n: int) -> DeformationField:
        return cls(np.zeros(n), np.zeros(n), np.ones(n), np.ones(n))


@dataclass(frozen=True)
class PatchNode:
    id: int
    grid_pos: tuple[int, int]
    center: tuple[float, float]
    extent: tuple[float, float]
    feature: np.ndarray


def _block_means(fmap: FeatureMap, cfg: PatchGridConfig) -> np.ndarray:
    p = cfg.pitch
    blocks = fmap.data.reshape(cfg.rows, p, cfg.cols, p, fmap.channels)
    return blocks.mean(axis=(1, 3)).reshape(cfg.n_patches, fmap.channels)


def pool_fixed_patches(fmap: FeatureMap, cfg: PatchGridConfig) -> list[PatchNode]:
    """Mean-pool each ``pitch x pitch`` block into one node, row-major."""
    cfg.check(fmap)
    feats = _block_means(fmap, cfg)
    p = cfg.pitch
    nodes = []
    for k in range(cfg.n_patches):
        r, c = divmod(k, cfg.cols)
        nodes.append(PatchNode(k, (r, c), ((c + 0.5) * p, (r + 0.5) * p),
                               (float(p), float(p)), feats[k]))
    return nodes


def predict_deformation(fmap: FeatureMap, cfg: PatchGridConfig,
                        weights: DeformationWeights) -> DeformationField:
    cfg.check(fmap)
    weights.check(fmap.channels)
    c = fmap.channels
    pooled = _block_means(fmap, cfg).reshape(cfg.rows, cfg.cols, c)
    padded = np.zeros((cfg.rows + 2, cfg.cols + 2, c))
    padded[1:-1, 1:-1] = pooled
    hidden = np.zeros((cfg.rows, cfg.cols, c))
    # overflow is reported below with the offending patch id
    with np.errstate(over="ignore", invalid="ignore"):
        for a in range(3):
            for b in range(3):
                hidden += padded[a:a + cfg.rows, b:b + cfg.cols] @ weights.conv3x3[a, b]
        hidden = hidden.reshape(cfg.n_patches, c)
        offset = np.tanh(hidden @ weights.w_offset.T)
        scale = np.clip(softplus(hidden @ weights.w_scale.T + weights.b_scale),
                        SCALE_MIN, SCALE_MAX)
    bad = ~(np.all(np.isfinite(hidden), axis=1)
            & np.all(np.isfinite(offset), axis=1)
            & np.all(np.isfinite(scale), axis=1))
    if bad.any():
        raise NumericError(f"non-finite deformation for patch {int(np.flatnonzero(bad)[0])}")
    return DeformationField(offset[:, 0].copy(), offset[:, 1].copy(),
                            scale[:, 0].copy(), scale[:, 1].copy())


def bilinear_sample(fmap: FeatureMap, x, y) -> np.ndarray:
    """Bilinear interpolation between cell centers, edge-replicated outside.

    ``x`` and ``y`` may be scalars or equal-shape arrays; the result has
    shape ``x.shape + (channels,)``.
    """
    data = fmap.data
    h, w = data.shape[:2]
    u = np.clip(np.asarray(x, dtype=float) - 0.5, 0.0, w - 1.0)
    v = np.clip(np.asarray(y, dtype=float) - 0.5, 0.0, h - 1.0)
    c0 = np.floor(u).astype(np.intp)
    r0 = np.floor(v).astype(np.intp)
    c1 = np.minimum(c0 + 1, w - 1)
    r1 = np.minimum(r0 + 1, h - 1)
    fu = (u - c0)[..., None]
    fv = (v - r0)[..., None]
    top = data[r0, c0] * (1.0 - fu) + data[r0, c1] * fu
    bottom = data[r1, c0] * (1.0 - fu) + data[r1, c1] * fu
    return top * (1.0 - fv) + bottom * fv


def deformed_windows(fmap: FeatureMap, cfg: PatchGridConfig, field: DeformationField):
    """Return deformed centers ``(cx, cy)`` and clamped windows ``(x0, x1, y0, y1)``."""
    p = cfg.pitch
    k = np.arange(cfg.n_patches)
    r, c = np.divmod(k, cfg.cols)
    cx = (c + 0.5) * p + field.dx * (p / 2.0)
    cy = (r + 0.5) * p + field.dy * (p / 2.0)
    half_w = field.dw * p / 2.0
    half_h = field.dh * p / 2.0
    x0 = np.maximum(cx - half_w, 0.0)
    x1 = np.minimum(cx + half_w, float(fmap.width))
    y0 = np.maximum(cy - half_h, 0.0)
    y1 = np.minimum(cy + half_h, float(fmap.height))
    return (cx, cy), (x0, x1, y0, y1)


def extract_deformed_patches(fmap: FeatureMap, cfg: PatchGridConfig,
                             field: DeformationField) -> list[PatchNode]:
    """Average a uniform lattice of bilinear samples inside each deformed window."""
    cfg.check(fmap)
    n = cfg.n_patches
    for name in ("dx", "dy", "dw", "dh"):
        if np.shape(getattr(field, name)) != (n,):
            raise ConfigError(f"deformation field {name} must have length {n}")
    (cx, cy), (x0, x1, y0, y1) = deformed_windows(fmap, cfg, field)
    s = cfg.samples_per_side
    t = (np.arange(s) + 0.5) / s
    xs = x0[:, None] + (x1 - x0)[:, None] * t          # (n, s)
    ys = y0[:, None] + (y1 - y0)[:, None] * t
    gx = np.broadcast_to(xs[:, None, :], (n, s, s))
    gy = np.broadcast_to(ys[:, :, None], (n, s, s))
    feats = bilinear_sample(fmap, gx, gy).mean(axis=(1, 2))
    top_x = np.nextafter(float(fmap.width), 0.0)
    top_y = np.nextafter(float(fmap.height), 0.0)
    cx = np.clip(cx, 0.0, top_x)
    cy = np.clip(cy, 0.0, top_y)
    p = cfg.pitch
    nodes = []
    for k in range(n):
        r, c = divmod(k, cfg.cols)
        nodes.append(PatchNode(k, (r, c), (float(cx[k]), float(cy[k])),
                               (float(field.dw[k] * p), float(field.dh[k] * p)), feats[k]))
    return nodes
