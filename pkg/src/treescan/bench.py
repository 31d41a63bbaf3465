"""Timing of the linear tree-scan DP against the quadratic reference, and of
Boruvka against Kruskal, for every available kernel backend."""
from __future__ import annotations

import time

import numpy as np

from . import _backend
from .lattice_mst import boruvka_mst, kruskal_mst
from .selfcheck import random_lattice, random_ssm
from .ssm_scan import discretize_zoh, tree_scan, tree_scan_bruteforce

BENCH_VERSION = 1

# the pure-Python quadratic reference walks every path in the interpreter
PYTHON_BRUTE_LIMIT = 256

BENCH_SCHEMA = {
    "type": "object",
    "required": ["bench_version", "default_backend", "rows"],
    "properties": {
        "bench_version": {"const": BENCH_VERSION},
        "default_backend": {"enum": ["compiled", "python"]},
        "rows": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["backend", "nodes", "grid", "tree_scan_ms", "bruteforce_ms",
                             "brute_dp_ratio", "boruvka_ms", "kruskal_ms"],
                "properties": {
                    "backend": {"enum": ["compiled", "python"]},
                    "nodes": {"type": "integer", "minimum": 1},
                    "grid": {"type": "array", "items": {"type": "integer"},
                             "minItems": 2, "maxItems": 2},
                    "tree_scan_ms": {"type": "number", "minimum": 0},
                    "bruteforce_ms": {"type": ["number", "null"], "minimum": 0},
                    "brute_dp_ratio": {"type": ["number", "null"], "minimum": 0},
                    "boruvka_ms": {"type": "number", "minimum": 0},
                    "kruskal_ms": {"type": "number", "minimum": 0},
                },
            },
        },
    },
}


def grid_shape(n: int) -> tuple[int, int]:
    """Most nearly square ``rows x cols`` factorization of ``n``."""
    rows = int(np.sqrt(n))
    while n % rows:
        rows -= 1
    return rows, n // rows


def _best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best * 1e3


def bench_size(n: int, backend: str, kernels, seed: int = 0, channels: int = 1,
               state_size: int = 1) -> dict:
    rng = np.random.default_rng(seed)
    rows, cols = grid_shape(n)
    graph = random_lattice(rng, rows, cols)
    tree = boruvka_mst(graph, kernels)
    x = rng.normal(0, 1, (n, channels))
    steps = discretize_zoh(random_ssm(rng, channels, state_size), x)
    repeats = 3 if n <= 1024 else 1
    dp_ms = _best_of(lambda: tree_scan(tree, x, steps, kernels=kernels), repeats)
    brute_ms = None
    if backend == "compiled" or n <= PYTHON_BRUTE_LIMIT:
        brute_ms = _best_of(lambda: tree_scan_bruteforce(tree, x, steps, kernels=kernels), 1)
    boruvka_ms = _best_of(lambda: boruvka_mst(graph, kernels), repeats)
    kruskal_ms = _best_of(lambda: kruskal_mst(graph), repeats)
    return {
        "backend": backend,
        "nodes": n,
        "grid": [rows, cols],
        "tree_scan_ms": dp_ms,
        "bruteforce_ms": brute_ms,
        "brute_dp_ratio": None if brute_ms is None else brute_ms / max(dp_ms, 1e-9),
        "boruvka_ms": boruvka_ms,
        "kruskal_ms": kruskal_ms,
    }


def run_bench(sizes, seed: int = 0, backends=None) -> dict:
    available = _backend.available_backends()
    names = backends or sorted(available, key=lambda b: b != "compiled")
    rows = [bench_size(n, name, available[name], seed) for name in names for n in sizes]
    return {"bench_version": BENCH_VERSION, "default_backend": _backend.BACKEND, "rows": rows}


def dp_wins(report: dict, min_nodes: int = 1024) -> list[str]:
    """Rows at or above ``min_nodes`` where the linear DP was not faster."""
    bad = []
    for row in report["rows"]:
        if row["nodes"] >= min_nodes and row["bruteforce_ms"] is not None:
            if not row["tree_scan_ms"] < row["bruteforce_ms"]:
                bad.append(f"{row['backend']} N={row['nodes']}")
    return bad


def format_table(report: dict) -> str:
    def ms(v):
        return "skipped" if v is None else f"{v:.3f}"

    lines = [f"{'backend':<9} {'nodes':>6} {'tree_scan':>10} {'brute':>12} {'ratio':>9} "
             f"{'boruvka':>9} {'kruskal':>9}   (ms)"]
    for r in report["rows"]:
        ratio = "-" if r["brute_dp_ratio"] is None else f"{r['brute_dp_ratio']:.1f}"
        lines.append(f"{r['backend']:<9} {r['nodes']:>6} {ms(r['tree_scan_ms']):>10} "
                     f"{ms(r['bruteforce_ms']):>12} {ratio:>9} {ms(r['boruvka_ms']):>9} "
                     f"{ms(r['kruskal_ms']):>9}")
    return "\n".join(lines)
