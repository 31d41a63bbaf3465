"""Selective state space parameters, ZOH discretization and the two scans.

Shapes: ``L`` tokens (or tree nodes), ``D`` channels, ``S`` state size.
The input to a scan is the ``(L, D)`` matrix of projected token features;
the step size, input matrix and output matrix are all computed from it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .lattice_mst import SpanningTree
from .patchgrid import softplus

LN_EPS = 1e-5


@dataclass(frozen=True)
class SSMParams:
    """Diagonal selective SSM.

    ``a_log`` stores ``log(-A)`` so every entry of ``A`` is negative.
    Projections take a ``D``-dim input: ``delta_w`` is ``(D, D)``, ``b_w``
    and ``c_w`` are ``(D, S)``.
    """

    a_log: np.ndarray
    d_skip: np.ndarray
    delta_w: np.ndarray
    delta_b: np.ndarray
    b_w: np.ndarray
    c_w: np.ndarray

    @property
    def channels(self) -> int:
        return self.a_log.shape[0]

    @property
    def state_size(self) -> int:
        return self.a_log.shape[1]

    @property
    def A(self) -> np.ndarray:
        return -np.exp(self.a_log)

    @classmethod
    def random(cls, channels: int, state_size: int, rng: np.random.Generator) -> SSMParams:
        d, s = channels, state_size
        a_log = np.log(np.tile(np.arange(1, s + 1, dtype=float), (d, 1)))
        # step sizes start log-uniform in [1e-3, 1e-1]
        dt = np.exp(rng.uniform(np.log(1e-3), np.log(1e-1), d))
        delta_b = dt + np.log(-np.expm1(-dt))
        return cls(a_log, np.ones(d),
                   rng.normal(0.0, d ** -0.5, (d, d)), delta_b,
                   rng.normal(0.0, d ** -0.5, (d, s)),
                   rng.normal(0.0, d ** -0.5, (d, s)))


@dataclass(frozen=True)
class Discretized:
    """Per-token discretized parameters: ``abar``/``bbar`` are ``(L, D, S)``, ``c`` is ``(L, S)``."""

    abar: np.ndarray
    bbar: np.ndarray
    c: np.ndarray
    d_skip: np.ndarray


@dataclass(frozen=True)
class ScanOutput:
    hidden: np.ndarray
    output: np.ndarray


def discretize_zoh(params: SSMParams, features) -> Discretized:
    """Zero-order-hold discretization for one ``(D,)`` token or a ``(L, D)`` batch.

    A single token returns arrays without the leading ``L`` axis.
    """
    x = np.asarray(features, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != params.channels:
        raise ValueError(f"features have {x.shape[1]} channels, expected {params.channels}")
    delta = softplus(x @ params.delta_w + params.delta_b)        # (L, D)
    a = params.A                                                 # (D, S)
    abar = np.exp(delta[:, :, None] * a)
    b = x @ params.b_w                                           # (L, S)
    bbar = (abar - 1.0) / a * b[:, None, :]
    c = x @ params.c_w
    if single:
        return Discretized(abar[0], bbar[0], c[0], params.d_skip)
    return Discretized(abar, bbar, c, params.d_skip)


def layer_norm(h: np.ndarray) -> np.ndarray:
    """Normalize over the last axis, no affine terms."""
    h = np.asarray(h, dtype=float)
    mu = h.mean(axis=-1, keepdims=True)
    var = ((h - mu) ** 2).mean(axis=-1, keepdims=True)
    return (h - mu) / np.sqrt(var + LN_EPS)


def _prepare(features, params, phi):
    x = np.asarray(features, dtype=float)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("features must be a non-empty (L, D) array")
    steps = params if isinstance(params, Discretized) else discretize_zoh(params, x)
    if steps.abar.shape[:2] != x.shape:
        raise ValueError(f"parameters cover {steps.abar.shape[:2]} tokens/channels, features are {x.shape}")
    if phi is None:
        phi = np.ones(x.shape[0])
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (x.shape[0],):
        raise ValueError(f"phi has shape {phi.shape}, expected ({x.shape[0]},)")
    xs = phi[:, None] * x
    u = np.ascontiguousarray(steps.bbar * xs[:, :, None])
    return steps, xs, u


def _readout(h, steps, xs, normalize):
    hn = layer_norm(h) if normalize else h
    y = np.einsum("lds,ls->ld", hn, steps.c) + steps.d_skip * xs
    return ScanOutput(h, y)


def sequential_scan(features, params: SSMParams | Discretized, phi=None,
                    normalize: bool = False, kernels=None) -> ScanOutput:
    """Causal scan over tokens in the given order."""
    kernels = kernels or _backend.kernels
    steps, xs, u = _prepare(features, params, phi)
    h = kernels.sequential_scan(np.ascontiguousarray(steps.abar), u)
    return _readout(h, steps, xs, normalize)


def _check_tree(tree: SpanningTree, n: int) -> None:
    if tree.node_count != n:
        raise ValueError(f"tree has {tree.node_count} nodes, features have {n}")


def tree_scan(tree: SpanningTree, features, params: SSMParams | Discretized, phi=None,
              normalize: bool = True, kernels=None) -> ScanOutput:
    """Aggregate every node's source term over its tree path to every other node.

    Node ``j`` reaches node ``i`` scaled by the product of ``abar`` over the
    path nodes after ``j`` up to and including ``i``.  Source terms are
    ``bbar_j * phi_j * x_j``; the skip term uses ``phi_i * x_i``.
    """
    kernels = kernels or _backend.kernels
    steps, xs, u = _prepare(features, params, phi)
    _check_tree(tree, xs.shape[0])
    h = kernels.tree_scan_dp(np.ascontiguousarray(tree.parent, dtype=np.int64),
                             np.ascontiguousarray(tree.order, dtype=np.int64),
                             np.ascontiguousarray(steps.abar), u)
    return _readout(h, steps, xs, normalize)


def tree_scan_bruteforce(tree: SpanningTree, features, params: SSMParams | Discretized, phi=None,
                         normalize: bool = True, kernels=None) -> ScanOutput:
    """Quadratic reference for :func:`tree_scan` using explicit path products."""
    kernels = kernels or _backend.kernels
    steps, xs, u = _prepare(features, params, phi)
    _check_tree(tree, xs.shape[0])
    h = kernels.tree_scan_pairs(np.ascontiguousarray(tree.parent, dtype=np.int64),
                                np.ascontiguousarray(tree.depth, dtype=np.int64),
                                np.ascontiguousarray(steps.abar), u)
    return _readout(h, steps, xs, normalize)
