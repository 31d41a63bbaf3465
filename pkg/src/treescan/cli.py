"""Command-line interface.

Exit codes: 0 success, 1 check failure, 2 input error, 3 config/usage error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from xml.sax.saxutils import quoteattr

import numpy as np

from . import _backend
from .block import (STEM_POOL, StageConfig, backbone_forward, check_backbone_input,
                    init_backbone)
from .errors import ConfigError, TreeScanError
from .hsw import HSWConfig
from .lattice_mst import EdgeWeightConfig
from .patchgrid import FeatureMap
from .ppm import PPMError, read_ppm, to_unit, write_ppm

EXIT_OK, EXIT_CHECK, EXIT_INPUT, EXIT_CONFIG = 0, 1, 2, 3
REPORT_VERSION = 1
CONFIG_KEYS = {"seed", "alpha", "background_phi", "patch_pitch", "samples_per_side", "stages"}


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    seed: int = 0
    alpha: float = 0.5
    background_phi: float = 0.7
    patch_pitch: int = 1
    samples_per_side: int = 2
    stages: list = field(default_factory=lambda: [
        {"depth": 1, "channels": 8}, {"depth": 1, "channels": 16},
        {"depth": 2, "channels": 32}, {"depth": 1, "channels": 64}])

    @classmethod
    def from_dict(cls, raw) -> RunConfig:
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(raw) - CONFIG_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**raw)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        def is_int(v):
            return isinstance(v, int) and not isinstance(v, bool)

        def is_num(v):
            return is_int(v) or (isinstance(v, float) and math.isfinite(v))

        if not is_int(self.seed):
            raise ConfigError("seed must be an integer")
        if not is_num(self.alpha) or not 0.0 <= self.alpha <= 1.0:
            raise ConfigError("alpha must be a number in [0, 1]")
        if not is_num(self.background_phi) or not 0.0 < self.background_phi < 1.0:
            raise ConfigError("background_phi must be a number in (0, 1)")
        for key in ("patch_pitch", "samples_per_side"):
            v = getattr(self, key)
            if not is_int(v) or v < 1:
                raise ConfigError(f"{key} must be a positive integer")
        if not isinstance(self.stages, list) or not self.stages:
            raise ConfigError("stages must be a non-empty list")
        for st in self.stages:
            if not isinstance(st, dict) or set(st) != {"depth", "channels"}:
                raise ConfigError("each stage needs exactly the keys depth and channels")
            if not all(is_int(st[k]) and st[k] >= 1 for k in st):
                raise ConfigError("stage depth and channels must be positive integers")

    def stage_configs(self) -> tuple[StageConfig, ...]:
        return tuple(StageConfig(st["depth"], st["channels"], self.patch_pitch) for st in self.stages)


def load_config(path) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return RunConfig.from_dict(raw)


def checksum(data: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(data, dtype="<f8").tobytes()).hexdigest()


def tree_svg(diag, width: int, height: int, scale: float) -> str:
    """MST edges over patch centers; stroke width grows with edge similarity."""
    centers = [(nd.center[0] * scale, nd.center[1] * scale) for nd in diag.nodes]
    mask = diag.mask
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="#203040"/>',
        '<g stroke="#f0c040" stroke-linecap="round">',
    ]
    for a, b, w in diag.tree.tree_edges:
        (x1, y1), (x2, y2) = centers[a], centers[b]
        out.append(f'<line x1="{x1:.3f}" y1="{y1:.3f}" x2="{x2:.3f}" y2="{y2:.3f}" '
                   f'stroke-width="{2.0 * math.exp(-w):.4f}"/>')
    out.append("</g>")
    out.append("<g>")
    r = max(0.6, 0.15 * scale)
    for k, (x, y) in enumerate(centers):
        fill = "#ffffff" if mask[k] else "#000000"
        out.append(f'<circle cx="{x:.3f}" cy="{y:.3f}" r="{r:.3f}" fill={quoteattr(fill)}/>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def mask_image(mask: np.ndarray, rows: int, cols: int, cell: int) -> np.ndarray:
    grid = np.where(mask.reshape(rows, cols), 255, 0)
    big = np.repeat(np.repeat(grid, cell, axis=0), cell, axis=1)
    return np.repeat(big[:, :, None], 3, axis=2)


def cmd_forward(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        pixels, maxval = read_ppm(args.image)
        image = FeatureMap(to_unit(pixels, maxval))
        stages = cfg.stage_configs()
        check_backbone_input(image, stages)
    except (PPMError, ConfigError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    params = init_backbone(stages, seed=cfg.seed, edge_cfg=EdgeWeightConfig(cfg.alpha),
                           hsw_cfg=HSWConfig(cfg.background_phi))
    t0 = time.perf_counter()
    try:
        results = backbone_forward(image, stages, params, cfg.samples_per_side)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    elapsed = (time.perf_counter() - t0) * 1e3

    first = results[0].diagnostics[0]
    stage1 = results[0].output
    pitch = min(cfg.patch_pitch, stage1.height, stage1.width)
    rows, cols = stage1.height // pitch, stage1.width // pitch
    cell = STEM_POOL * pitch

    report = {
        "spec_version": REPORT_VERSION,
        "backend": _backend.BACKEND,
        "config": asdict(cfg),
        "image": {"width": image.width, "height": image.height, "maxval": maxval},
        "stages": [],
    }
    for k, res in enumerate(results):
        out = res.output
        report["stages"].append({
            "index": k + 1,
            "shape": [out.height, out.width, out.channels],
            "checksum": checksum(out.data),
            "blocks": [{
                "ncut_value": d.ncut_value,
                "partition_method": None if d.partition is None else d.partition.method,
                "foreground_fraction": float(d.mask.mean()),
                "mst_total_weight": d.tree.total_weight,
            } for d in res.diagnostics],
        })
    if args.timing:
        report["timing_ms"] = {"forward": elapsed,
                               "stages": [res.elapsed_ms for res in results]}

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_ppm(out_dir / "mask.ppm", mask_image(first.mask, rows, cols, cell))
    (out_dir / "tree.svg").write_text(tree_svg(first, image.width, image.height, STEM_POOL))
    (out_dir / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out_dir}/{{mask.ppm,tree.svg,report.json}} in {elapsed:.1f} ms "
          f"(backend {_backend.BACKEND})")
    return EXIT_OK


def _parse_list(text, conv, what):
    items = [t.strip() for t in text.split(",") if t.strip()]
    if not items:
        raise UsageError(f"empty {what} list")
    try:
        return [conv(t) for t in items]
    except ValueError:
        raise UsageError(f"bad {what} list: {text!r}") from None


def cmd_selfcheck(args) -> int:
    from .selfcheck import SUITES, run_suite

    names = list(SUITES) if args.suites is None else _parse_list(args.suites, str, "suite")
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise UsageError(f"unknown suites {unknown}; choose from {sorted(SUITES)}")
    if args.tol is not None and not args.tol >= 0.0:
        raise UsageError("--tol must be non-negative")
    print(f"backend: {_backend.BACKEND}")
    failed = []
    for name in names:
        res = run_suite(SUITES[name], seed=args.seed, tol=args.tol, trials=args.trials)
        status = "PASS" if res.passed else "FAIL"
        print(f"{name:<9} max_error={res.max_error:.3e} tol={res.tol:.1e} "
              f"trials={res.trials} {status}")
        if not res.passed:
            failed.append(res)
    for res in failed:
        print(f"FAILED suite={res.name} worst_seed={res.worst_seed} "
              f"max_error={res.max_error:.3e}", file=sys.stderr)
    return EXIT_CHECK if failed else EXIT_OK


def cmd_bench(args) -> int:
    from .bench import dp_wins, format_table, run_bench

    sizes = _parse_list(args.sizes, int, "size")
    if any(n < 1 for n in sizes):
        raise UsageError("sizes must be positive")
    backends = None if args.backend is None else [args.backend]
    if backends and backends[0] not in _backend.available_backends():
        raise UsageError(f"backend {args.backend} is not available")
    report = run_bench(sizes, seed=args.seed, backends=backends)
    print(format_table(report))
    if args.json:
        Path(args.json).write_text(json.dumps(report, indent=2) + "\n")
    slow = dp_wins(report)
    if slow:
        print(f"linear tree scan did not beat the quadratic reference at: {', '.join(slow)}",
              file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="treescan", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    fwd = sub.add_parser("forward", help="run the backbone on a P6 image")
    fwd.add_argument("image")
    fwd.add_argument("--config", default=None, help="JSON run config (defaults if omitted)")
    fwd.add_argument("--out", required=True, help="output directory")
    fwd.add_argument("--timing", action="store_true",
                     help="record wall-clock timing in report.json (breaks byte-identity)")
    fwd.set_defaults(func=cmd_forward)

    chk = sub.add_parser("selfcheck", help="run the randomized oracle suites")
    chk.add_argument("--seed", type=int, default=0)
    chk.add_argument("--suites", default=None, help="comma-separated subset of suites")
    chk.add_argument("--tol", type=float, default=None, help="override every suite tolerance")
    chk.add_argument("--trials", type=int, default=None, help="trials per suite")
    chk.set_defaults(func=cmd_selfcheck)

    bench = sub.add_parser("bench", help="time the kernels")
    bench.add_argument("--sizes", default="256,1024,4096", help="comma-separated node counts")
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--backend", choices=["compiled", "python"], default=None)
    bench.add_argument("--json", default=None, help="also write the results as JSON")
    bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"treescan: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TreeScanError as exc:
        print(f"treescan: {exc}", file=sys.stderr)
        return EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
