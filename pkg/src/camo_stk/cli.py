"""Command-line front end: evaluation, density analysis, gradient
checking, operator benchmarks, and a demo forward pass.

Exit codes: 0 success, 1 configuration/schema problem, 2 missing data,
3 verification failure. Every command is deterministic given its inputs
and --seed, independent of --workers. Config precedence is CLI flag >
--config JSON file > built-in default; the built-in defaults carry the
recommended operating constants (theta = 0.458, dim = 384).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from . import gradcheck as gradcheck_mod
from .align import random_taa_spec, taa_fuse
from .cdc3d import (DEFAULT_THETA, ConvSpec3D, cdc3d_forward_unified,
                    conv3d_plain, random_conv_spec)
from .dataset import (ClipManifest, ManifestError, attribute_report,
                      density_map, load_manifest, write_density_png)
from .metrics import (METRIC_FIELDS, MaskPair, MetricReport, evaluate_sequence,
                      load_gt_mask, load_pred_mask, mean_reports)
from .stabilize import (DEFAULT_CONCEPT_MODE, DEFAULT_EMBED_DIM,
                        DEFAULT_PRIMITIVE_PAIRS, augmented_attention,
                        gaussian_bank, mix_primitives, random_attention_spec)
from .tensor import Shape5, Tensor5, gaussian_init, resize_bilinear_spatial, \
    write_tensor
from .align import DEFAULT_SAMPLE_POINTS

log = logging.getLogger("camo_stk")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_MISSING = 2
EXIT_VERIFY = 3

DENSITY_GRID = (128, 128)
DEMO_BASE_HW = 16
DEMO_FRAMES = 5
DEMO_SCALES = (0.5, 1.0, 1.5)

_DEFAULTS = dict(
    theta=DEFAULT_THETA,
    kpts=DEFAULT_SAMPLE_POINTS,
    dim=DEFAULT_EMBED_DIM,
    npairs=DEFAULT_PRIMITIVE_PAIRS,
    concept_mode=DEFAULT_CONCEPT_MODE,
    seed=0,
    workers=1,
    normalization="max_one",
)


@dataclass
class RunConfig:
    subcommand: str
    manifest: str | None
    pred: str | None
    out: str
    theta: float
    kpts: int
    dim: int
    npairs: int
    concept_mode: str
    seed: int
    workers: int
    normalization: str
    corrupt_gradients: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [0, 1], got {self.theta}")
        if self.dim < 1 or self.npairs < 1 or self.kpts < 1 or self.workers < 1:
            raise ValueError("dim, npairs, kpts and workers must be positive")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="camo-stk",
        description="Spatiotemporal operator kernels and VCOD evaluation harness.")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON file with default flag values")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--theta", type=float, default=None)
        p.add_argument("--kpts", type=int, default=None)
        p.add_argument("--dim", type=int, default=None)
        p.add_argument("--npairs", type=int, default=None)
        p.add_argument("--concept-mode", dest="concept_mode",
                       choices=("sum_single_token", "per_pair_tokens"), default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--normalization", choices=("max_one", "sum_one"), default=None)

    p_eval = sub.add_parser("eval", help="score predictions against a manifest")
    p_eval.add_argument("--manifest", required=True)
    p_eval.add_argument("--pred", required=True, help="root of prediction masks")
    common(p_eval)

    p_dens = sub.add_parser("density", help="spatial density maps of the ground truth")
    p_dens.add_argument("--manifest", required=True)
    common(p_dens)

    p_grad = sub.add_parser("gradcheck", help="verify analytic gradients")
    p_grad.add_argument("--corrupt", action="store_true",
                        help=argparse.SUPPRESS)  # negative-control fixture
    common(p_grad)

    p_bench = sub.add_parser("bench", help="operator micro-benchmarks")
    common(p_bench)

    p_demo = sub.add_parser("demo", help="miniature end-to-end forward pass")
    common(p_demo)
    return parser


def _merge_config(args: argparse.Namespace) -> RunConfig:
    file_values: dict = {}
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            file_values = json.load(fh)
        unknown = set(file_values) - set(_DEFAULTS)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")

    def pick(name: str):
        cli = getattr(args, name, None)
        if cli is not None:
            return cli
        if name in file_values:
            return file_values[name]
        return _DEFAULTS[name]

    return RunConfig(
        subcommand=args.subcommand,
        manifest=getattr(args, "manifest", None),
        pred=getattr(args, "pred", None),
        out=args.out,
        theta=float(pick("theta")),
        kpts=int(pick("kpts")),
        dim=int(pick("dim")),
        npairs=int(pick("npairs")),
        concept_mode=str(pick("concept_mode")),
        seed=int(pick("seed")),
        workers=int(pick("workers")),
        normalization=str(pick("normalization")),
        corrupt_gradients=bool(getattr(args, "corrupt", False)),
    )


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def _write_meta(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def _fmt(x: float) -> str:
    return format(x, ".10g")


_CONVENTIONS = {
    "e_m": "maximum enhanced-alignment over the 256-threshold sweep",
    "f_max": "maximum F (beta^2=0.3) over the 256-threshold sweep, strict > cuts",
    "m_dice_m_iou": "adaptive threshold min(2*mean(pred), 1)",
    "aggregation": "clip-level macro average (all clips weighted equally)",
}


def _clip_report(clip: ClipManifest, pred_root: Path) -> tuple[str, MetricReport]:
    frames = []
    for frame_gt in clip.gt_paths:
        pred_path = pred_root / clip.clip_id / Path(frame_gt).name
        frames.append(MaskPair(pred=load_pred_mask(str(pred_path)),
                               gt=load_gt_mask(frame_gt)))
    return clip.clip_id, evaluate_sequence(frames)


def cmd_eval(config: RunConfig) -> int:
    try:
        clips = load_manifest(config.manifest)
    except ManifestError as exc:
        log.error("manifest rejected: %s", exc)
        return EXIT_CONFIG

    pred_root = Path(config.pred)
    missing = []
    for clip in clips:
        for frame_gt in clip.gt_paths:
            p = pred_root / clip.clip_id / Path(frame_gt).name
            if not p.is_file():
                missing.append(str(p))
    if missing:
        log.error("missing %d prediction masks:", len(missing))
        for m in missing:
            log.error("  %s", m)
        return EXIT_MISSING

    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        results = dict(pool.map(lambda c: _clip_report(c, pred_root), clips))

    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)

    header = ["clip", "frames"] + list(METRIC_FIELDS)
    rows = []
    for cid in sorted(results):
        rep = results[cid]
        rows.append([cid, rep.frame_count] + [_fmt(v) for v in rep.as_row()])
    _write_csv(out / "per_clip.csv", header, rows)

    aggregate = mean_reports([results[c] for c in sorted(results)])
    _write_csv(out / "aggregate.csv",
               ["dataset", "clips", "frames"] + list(METRIC_FIELDS),
               [["all", len(results), aggregate.frame_count]
                + [_fmt(v) for v in aggregate.as_row()]])

    attr_rows = []
    for attr, (rep, n_clips) in attribute_report(clips, results).items():
        attr_rows.append([attr, n_clips, _fmt(rep.s_alpha), _fmt(rep.f_beta_w),
                          _fmt(rep.m_iou)])
    _write_csv(out / "attributes.csv",
               ["attribute", "clips", "s_alpha", "f_beta_w", "m_iou"], attr_rows)

    for name in ("per_clip", "aggregate", "attributes"):
        _write_meta(out / f"{name}.meta.json", _CONVENTIONS)
    log.info("evaluated %d clips -> %s", len(results), out)
    return EXIT_OK


def cmd_density(config: RunConfig) -> int:
    try:
        clips = load_manifest(config.manifest)
    except ManifestError as exc:
        log.error("manifest rejected: %s", exc)
        return EXIT_CONFIG

    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    groups: dict[str, list[str]] = {"all": []}
    for clip in clips:
        groups.setdefault(clip.split, []).extend(clip.gt_paths)
        groups["all"].extend(clip.gt_paths)

    for split in sorted(groups):
        paths = groups[split]
        if not paths:
            continue
        masks = [load_gt_mask(p) for p in paths]
        dmap = density_map(masks, DENSITY_GRID, config.normalization)
        if dmap.degenerate:
            log.warning("split %s: all masks empty, writing a zero map", split)
        write_density_png(dmap, out / f"density_{split}_16bit.png",
                          out / f"density_{split}_color.png")
        log.info("split %s: %d masks -> density_%s_*.png", split, len(masks), split)
    _write_meta(out / "density.meta.json",
                {"grid": list(DENSITY_GRID), "normalization": config.normalization,
                 "binarize": "resized mask >= 0.5"})
    return EXIT_OK


def cmd_gradcheck(config: RunConfig) -> int:
    seeds = [config.seed + i for i in range(5)]
    results = gradcheck_mod.run_suite(seeds, corrupt=config.corrupt_gradients)
    worst = max(results, key=lambda r: r.max_rel_error)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.op}/{r.argument} seed={r.seed} "
              f"max_rel_err={r.max_rel_error:.3e} at {tuple(int(i) for i in r.worst_coord)}")
    print(f"worst: {worst.op}/{worst.argument} seed={worst.seed} "
          f"{worst.max_rel_error:.3e} (tolerance {gradcheck_mod.FD_TOLERANCE:.0e})")
    if all(r.passed for r in results):
        return EXIT_OK
    for r in results:
        if not r.passed:
            log.error("gradient mismatch: %s seed=%d coordinate=%s",
                      f"{r.op}/{r.argument}", r.seed,
                      tuple(int(i) for i in r.worst_coord))
    return EXIT_VERIFY


def cmd_bench(config: RunConfig) -> int:
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for shape, channels, kernel in bench_mod.DEFAULT_CASES:
        for row in bench_mod.bench_case(shape, channels, kernel,
                                        theta=config.theta, seed=config.seed):
            shape_txt = "x".join(str(v) for v in row.shape)
            rows.append([shape_txt, row.form, _fmt(row.theta),
                         _fmt(row.ns_per_elem), _fmt(row.median_s)])
            print(f"{shape_txt:18s} {row.form:14s} theta={row.theta:<6.3g} "
                  f"{row.ns_per_elem:10.2f} ns/elem")
    _write_csv(out / "bench.csv",
               ["shape", "form", "theta", "ns_per_elem", "median_s"], rows)
    return EXIT_OK


def _demo_stage(out_dir: Path, index: int, name: str, tensor: Tensor5,
                expect: Shape5 | None = None) -> None:
    if expect is not None and tensor.shape != expect:
        raise AssertionError(
            f"stage {name}: shape {tuple(tensor.shape)} violates the "
            f"contract {tuple(expect)}")
    write_tensor(str(out_dir / f"{index:02d}_{name}.cst5"), tensor)
    print(f"  {name:18s} {tuple(tensor.shape)}")


def cmd_demo(config: RunConfig) -> int:
    out = Path(config.out) / "demo"
    c = config.dim
    base = gaussian_init(Shape5(1, c, DEMO_FRAMES, DEMO_BASE_HW, DEMO_BASE_HW),
                         config.seed, "demo.clip")
    bank = gaussian_bank(config.npairs, c, config.seed)
    attn = random_attention_spec(c, config.seed, config.concept_mode)
    conv = random_conv_spec(c, c, (3, 3, 3), config.seed, theta=config.theta,
                            scale=1.0 / np.sqrt(27.0 * c), label="demo.cdc")
    plain = ConvSpec3D(weights=conv.weights, theta=0.0)
    taa = random_taa_spec(c, config.seed, k_pts=config.kpts, offset_scale=0.05)
    concepts = mix_primitives(bank, config.concept_mode)

    try:
        for scale in DEMO_SCALES:
            tag = f"scale_{scale}".replace(".", "p")
            stage_dir = out / tag
            stage_dir.mkdir(parents=True, exist_ok=True)
            print(f"scale {scale}:")
            x_s = resize_bilinear_spatial(base, scale)
            hw = Shape5(1, c, DEMO_FRAMES, x_s.shape.h, x_s.shape.w)
            _demo_stage(stage_dir, 0, "input", x_s, hw)
            stabilized = augmented_attention(x_s, concepts, attn)
            _demo_stage(stage_dir, 1, "stabilized", stabilized, hw)
            temporal = cdc3d_forward_unified(stabilized, conv)
            _demo_stage(stage_dir, 2, "temporal", temporal, hw)
            baseline = conv3d_plain(stabilized, plain)
            _demo_stage(stage_dir, 3, "plain_conv", baseline, hw)
            diff = float(np.abs(temporal.data - baseline.data).max())
            print(f"  |cdc - plain_conv| = {diff:.3e}")
            if config.theta == 0.0 and diff >= 1e-12:
                raise AssertionError(
                    f"stage temporal: theta=0 output departs from the plain "
                    f"convolution by {diff:.3e}")
            fused = taa_fuse(temporal, stabilized, taa)
            _demo_stage(stage_dir, 4, "aligned", fused, hw)
    except AssertionError as exc:
        log.error("%s", exc)
        return EXIT_VERIFY
    print(f"demo artifacts in {out}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=os.environ.get("CAMO_STK_LOG", "INFO").upper(),
        format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = _merge_config(args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        log.error("bad configuration: %s", exc)
        return EXIT_CONFIG
    handlers = {
        "eval": cmd_eval,
        "density": cmd_density,
        "gradcheck": cmd_gradcheck,
        "bench": cmd_bench,
        "demo": cmd_demo,
    }
    return handlers[config.subcommand](config)


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
