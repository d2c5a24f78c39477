"""
Command-line front end.

Exit status: 0 on success, 1 for usage errors, 2 for bad input data.
Tensor directories use these file names:

* targets: ``score.pxat`` (H, W), ``geo.pxat`` (5, H, W), ``attention.pxat``
  (H, W), ``anchor_labels.pxat`` (N,), ``anchor_offsets.pxat`` (N, 8)
* predictions: ``pixel.pxat`` (6, H, W: score then geometry),
  ``attention.pxat`` (H, W), ``anchors.pxat`` (N, 9: score then offsets)
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .anchors import build_lattice, count_anchors, trim_for_inference
from .config import RunConfig, load_config
from .errors import QuadTextError
from .evaluation import evaluate, evaluate_many
from .formats import (
    atomic_write,
    detections_to_jsonl,
    read_detections,
    read_icdar_gt,
    read_tensor,
    write_detections,
    write_tensor,
)
from .losses import anchor_losses, make_rng, pixel_cls_loss, pixel_loc_loss, total_loss
from .postprocess import (
    ANCHOR,
    Detection,
    NmsStats,
    cascaded_nms,
    decode_anchor,
    decode_pixel,
    fuse_scores,
    fusion_nms_pipeline,
    quad_nms,
)
from .svg import render_svg
from .synthetic import random_candidates
from .targets import AnchorTargets, make_pixel_targets, match_anchors

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def worker_count() -> int:
    """Thread cap from ``PXA_THREADS`` (default: CPU count)."""
    raw = os.environ.get("PXA_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise UsageError(f"PXA_THREADS must be an integer, got {raw!r}") from None
    return os.cpu_count() or 1


def _input_size(text):
    try:
        w, h = text.lower().split("x")
        w, h = int(w), int(h)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}") from None
    if w <= 0 or h <= 0:
        raise argparse.ArgumentTypeError("input size must be positive")
    return w, h


def _emit(args, text: str) -> None:
    if args.out:
        atomic_write(args.out, text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _config(args) -> RunConfig:
    cfg = load_config(args.config)
    if args.input_size:
        cfg = cfg.with_input_size(args.input_size)
    return cfg


def _seed(args, cfg) -> int:
    return cfg.ohem.rng_seed if args.seed is None else args.seed


# -- subcommands -------------------------------------------------------------


def cmd_gen_anchors(args) -> int:
    cfg = _config(args)
    w, h = cfg.input_size
    lattice = build_lattice(cfg.anchors, w, h)
    trimmed = trim_for_inference(lattice)
    report = {
        "input_size": [w, h],
        "per_map": lattice.per_map_counts,
        "closed_form": count_anchors(cfg.anchors, w, h),
        "total": len(lattice),
        "trimmed": len(trimmed),
    }
    if args.dump:
        dets = [Detection(a.quad(), 0.0, ANCHOR) for a in (lattice if not args.trimmed else trimmed)]
        write_detections(args.dump, dets)
    _emit(args, _json(report))
    return EXIT_OK


def cmd_make_targets(args) -> int:
    cfg = _config(args)
    gt = read_icdar_gt(args.gt, cfg.input_size)
    pix = make_pixel_targets(gt, cfg.pixel_stride, cfg.shrink_ratio)
    lattice = build_lattice(cfg.anchors, *cfg.input_size)
    anc = match_anchors(lattice, gt, cfg.pos_iou)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    write_tensor(out / "score.pxat", pix.score_map)
    write_tensor(out / "geo.pxat", pix.geo_maps)
    write_tensor(out / "attention.pxat", pix.attention_map)
    write_tensor(out / "anchor_labels.pxat", anc.labels)
    write_tensor(out / "anchor_offsets.pxat", anc.offsets)
    summary = {
        "grid": list(pix.shape),
        "positive_pixels": int(pix.positive.sum()),
        "ignored_pixels": int((pix.score_map == -1).sum()),
        "anchors": len(lattice),
        "positive_anchors": int(anc.positive.sum()),
        "care_gt": sum(gt.care),
    }
    sys.stdout.write(_json(summary))
    return EXIT_OK


def _load_predictions(pred_dir: Path):
    pixel = read_tensor(pred_dir / "pixel.pxat")
    if pixel.ndim != 3 or pixel.shape[0] != 6:
        raise QuadTextError(f"pixel.pxat must be (6, H, W), got {pixel.shape}")
    anchors = read_tensor(pred_dir / "anchors.pxat")
    if anchors.ndim != 2 or anchors.shape[1] != 9:
        raise QuadTextError(f"anchors.pxat must be (N, 9), got {anchors.shape}")
    attention_path = pred_dir / "attention.pxat"
    attention = read_tensor(attention_path) if attention_path.exists() else None
    return pixel, attention, anchors


def cmd_loss(args) -> int:
    cfg = _config(args)
    tdir, pdir = Path(args.targets), Path(args.pred)
    score = read_tensor(tdir / "score.pxat")
    geo = read_tensor(tdir / "geo.pxat")
    att_gt = read_tensor(tdir / "attention.pxat")
    labels = read_tensor(tdir / "anchor_labels.pxat").astype(np.int8)
    offsets = read_tensor(tdir / "anchor_offsets.pxat").astype(np.float64)
    pixel, attention, anchors = _load_predictions(pdir)
    if pixel.shape[1:] != score.shape or anchors.shape[0] != len(labels):
        raise QuadTextError("prediction tensors do not match target shapes")
    if attention is None:
        attention = pixel[0]

    rng = make_rng(_seed(args, cfg))
    p_cls = pixel_cls_loss(pixel[0], score, attention, att_gt, cfg.ohem, rng)
    p_loc = pixel_loc_loss(pixel[1:], geo, score == 1, cfg.ohem, rng, cfg.weights)
    tgt = AnchorTargets(labels, np.full(len(labels), -1), np.zeros(len(labels)), offsets)
    a_cls, a_loc = anchor_losses(anchors[:, 0], anchors[:, 1:], tgt, cfg.ohem, rng, cfg.weights)
    w = cfg.weights
    report = {
        "pixel_cls": p_cls,
        "pixel_loc": p_loc,
        "pixel_total": p_cls + w.alpha_p * p_loc,
        "anchor_cls": a_cls,
        "anchor_loc": a_loc,
        "anchor_total": a_cls + w.alpha_a * a_loc,
        "total": total_loss(p_cls, p_loc, a_cls, a_loc, w),
    }
    _emit(args, _json(report))
    return EXIT_OK


def cmd_decode(args) -> int:
    cfg = _config(args)
    pixel, _, anchors = _load_predictions(Path(args.pred))
    lattice = build_lattice(cfg.anchors, *cfg.input_size)
    if len(anchors) != len(lattice):
        raise QuadTextError(f"anchors.pxat has {len(anchors)} rows, lattice has {len(lattice)}")
    stats = NmsStats()
    dets = decode_pixel(pixel[0], pixel[1:], cfg.pixel_stride, cfg.fusion, stats)
    dets += decode_anchor(trim_for_inference(lattice), anchors[:, 0], anchors[:, 1:], cfg.fusion, stats)
    _emit(args, detections_to_jsonl(dets))
    return EXIT_OK


def cmd_fuse_nms(args) -> int:
    cfg = _config(args)
    pixel, _, anchors = _load_predictions(Path(args.pred))
    lattice = build_lattice(cfg.anchors, *cfg.input_size)
    if len(anchors) != len(lattice):
        raise QuadTextError(f"anchors.pxat has {len(anchors)} rows, lattice has {len(lattice)}")
    result = fusion_nms_pipeline(pixel[0], pixel[1:], anchors[:, 0], anchors[:, 1:], lattice,
                                 cfg.fusion, cfg.pixel_stride)
    _emit(args, detections_to_jsonl(result.detections))
    if args.stats:
        atomic_write(args.stats, _json(result.stats.as_dict()))
    return EXIT_OK


def _pair_files(det_dir: Path, gt_dir: Path):
    pairs = []
    for gt_path in sorted(gt_dir.glob("*.txt")):
        stem = gt_path.stem[3:] if gt_path.stem.startswith("gt_") else gt_path.stem
        for name in (f"{stem}.jsonl", f"res_{stem}.jsonl"):
            cand = det_dir / name
            if cand.exists():
                pairs.append((cand, gt_path))
                break
        else:
            pairs.append((None, gt_path))
    return pairs


def cmd_eval(args) -> int:
    det, gt = Path(args.det), Path(args.gt)
    if gt.is_dir():
        if not det.is_dir():
            raise QuadTextError("--det must be a directory when --gt is")
        pairs = _pair_files(det, gt)

        def load(pair):
            d, g = pair
            return (read_detections(d) if d else []), read_icdar_gt(g)

        with ThreadPoolExecutor(max_workers=worker_count()) as pool:
            loaded = list(pool.map(load, pairs))
        metrics = evaluate_many(loaded, args.iou)
        report = metrics.as_dict()
        report["images"] = len(pairs)
    else:
        metrics = evaluate(read_detections(det), read_icdar_gt(gt), args.iou)
        report = metrics.as_dict()
    _emit(args, _json(report))
    return EXIT_OK


def cmd_viz_svg(args) -> int:
    cfg = _config(args)
    dets = read_detections(args.det)
    gt = read_icdar_gt(args.gt) if args.gt else None
    _emit(args, render_svg(dets, gt, cfg.input_size))
    return EXIT_OK


def cmd_bench_nms(args) -> int:
    cfg = _config(args)
    rng = make_rng(_seed(args, cfg))
    trials = []
    t_cascade = t_single = 0.0
    for _ in range(args.trials):
        dets = fuse_scores(random_candidates(rng, args.candidates), cfg.fusion)
        s_cascade, s_single = NmsStats(), NmsStats()
        t0 = time.perf_counter()
        cascaded_nms(dets, cfg.fusion, s_cascade)
        t1 = time.perf_counter()
        quad_nms(dets, cfg.fusion.quad_nms_iou, s_single)
        t2 = time.perf_counter()
        t_cascade += t1 - t0
        t_single += t2 - t1
        trials.append({
            "candidates": len(dets),
            "cascade_quad_iou_evals": s_cascade.quad_iou_evals,
            "cascade_mbr_iou_evals": s_cascade.mbr_iou_evals,
            "single_quad_iou_evals": s_single.quad_iou_evals,
            "cascade_kept": s_cascade.after_quad_nms,
            "single_kept": s_single.after_quad_nms,
        })
    report = {
        "trials": trials,
        "cascade_fewer_evals": sum(t["cascade_quad_iou_evals"] < t["single_quad_iou_evals"] for t in trials),
    }
    _emit(args, _json(report))
    # timings vary run to run; keep them off the reproducible output
    sys.stderr.write(f"cascade {t_cascade:.3f}s  single-stage {t_single:.3f}s over {args.trials} trials\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML run configuration")
    common.add_argument("--seed", type=int, default=None, help="RNG seed (default: ohem.rng_seed)")
    common.add_argument("--out", metavar="PATH", help="output file or directory (default: stdout)")
    common.add_argument("--input-size", type=_input_size, metavar="WxH")

    parser = _Parser(prog="quadtext", description=__doc__.split("\n\n")[1].strip())
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-anchors", parents=[common], help="anchor lattice statistics")
    p.add_argument("--dump", metavar="PATH", help="write the lattice as a detections file")
    p.add_argument("--trimmed", action="store_true", help="dump only the inference-time anchors")
    p.set_defaults(func=cmd_gen_anchors)

    p = sub.add_parser("make-targets", parents=[common], help="ground truth -> target tensors")
    p.add_argument("--gt", required=True, metavar="FILE")
    p.set_defaults(func=cmd_make_targets)

    p = sub.add_parser("loss", parents=[common], help="loss values for predictions vs targets")
    p.add_argument("--targets", required=True, metavar="DIR")
    p.add_argument("--pred", required=True, metavar="DIR")
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("decode", parents=[common], help="raw candidates from both branches")
    p.add_argument("--pred", required=True, metavar="DIR")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("fuse-nms", parents=[common], help="decode + fusion NMS")
    p.add_argument("--pred", required=True, metavar="DIR")
    p.add_argument("--stats", metavar="PATH", help="write pipeline counters as JSON")
    p.set_defaults(func=cmd_fuse_nms)

    p = sub.add_parser("eval", parents=[common], help="precision / recall / F")
    p.add_argument("--det", required=True, metavar="PATH", help="detections file or directory")
    p.add_argument("--gt", required=True, metavar="PATH", help="ICDAR gt file or directory")
    p.add_argument("--iou", type=float, default=0.5)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("viz-svg", parents=[common], help="render detections as SVG")
    p.add_argument("--det", required=True, metavar="FILE")
    p.add_argument("--gt", metavar="FILE")
    p.set_defaults(func=cmd_viz_svg)

    p = sub.add_parser("bench-nms", parents=[common], help="cascaded vs single-stage NMS")
    p.add_argument("--candidates", type=int, default=5000)
    p.add_argument("--trials", type=int, default=10)
    p.set_defaults(func=cmd_bench_nms)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_USAGE
    except (QuadTextError, OSError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_DATA
    except SystemExit as exc:
        # --help / --version
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
