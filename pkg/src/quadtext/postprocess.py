"""
Inference: decode both branches and merge them with fusion NMS.

Pixel-branch boxes are filtered by the size and shape of their bounding
rectangle, anchor-branch boxes get a fixed score boost so they win ties
against overlapping pixel boxes, and the union goes through a two-stage NMS:
a cheap pass on axis-aligned bounding rectangles, then an exact pass on the
quadrilaterals that survive.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from .anchors import AnchorLattice, trim_for_inference
from .errors import InvalidInputError
from .geometry import (
    Quad,
    aarect_iou_one_to_many,
    mbr,
    mbr_many,
    quad_iou_one_to_many,
    rbox_corners,
)
from .targets import cell_centers, decode_offsets_many

PIXEL = "pixel"
ANCHOR = "anchor"


@dataclass(frozen=True)
class Detection:
    quad: Quad
    score: float
    source: str

    def __post_init__(self):
        if self.source not in (PIXEL, ANCHOR):
            raise InvalidInputError(f"unknown detection source {self.source!r}")


@dataclass(frozen=True)
class FusionConfig:
    pixel_score_thresh: float = 0.8
    anchor_score_thresh: float = 0.5
    min_mbr_side: float = 10.0
    mbr_ratio_range: tuple = (1 / 15, 15.0)
    mbr_nms_iou: float = 0.5
    quad_nms_iou: float = 0.2
    anchor_score_boost: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "mbr_ratio_range", tuple(float(v) for v in self.mbr_ratio_range))
        for name in ("pixel_score_thresh", "anchor_score_thresh", "mbr_nms_iou", "quad_nms_iou"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvalidInputError(f"{name} must be in [0, 1], got {v}")
        if self.anchor_score_boost < 0:
            raise InvalidInputError("anchor_score_boost must be >= 0")
        lo, hi = self.mbr_ratio_range
        if not 0 < lo <= hi:
            raise InvalidInputError("mbr_ratio_range must satisfy 0 < lo <= hi")

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["mbr_ratio_range"] = list(self.mbr_ratio_range)
        return d


@dataclass
class NmsStats:
    """Counters filled in by :func:`cascaded_nms` and the pipeline."""

    candidates: int = 0
    after_mbr_nms: int = 0
    after_quad_nms: int = 0
    mbr_iou_evals: int = 0
    quad_iou_evals: int = 0
    pixel_decoded: int = 0
    pixel_dropped_degenerate: int = 0
    pixel_after_filter: int = 0
    anchor_decoded: int = 0
    anchor_dropped_degenerate: int = 0
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "extra"}
        d.update(self.extra)
        return d


def attention_multiplier(heat) -> np.ndarray:
    """Map attention probabilities onto ``[1, e]`` with ``exp``."""
    heat = np.asarray(heat, dtype=np.float64)
    if heat.size and (np.isnan(heat).any() or heat.min() < 0 or heat.max() > 1):
        raise InvalidInputError("attention probabilities must lie in [0, 1]")
    return np.exp(heat)


def _quads_from_corners(corners, scores, source, stats, counter):
    dets = []
    for pts, s in zip(corners, scores):
        try:
            q = Quad(pts)
        except InvalidInputError:
            if stats is not None:
                setattr(stats, counter, getattr(stats, counter) + 1)
            continue
        dets.append(Detection(q, float(s), source))
    return dets


def decode_pixel(score_map, geo_maps, stride: int, cfg: FusionConfig = FusionConfig(),
                 stats: NmsStats | None = None) -> list[Detection]:
    """Turn every cell scoring at least ``pixel_score_thresh`` into a quad.

    Cells are visited row-major. Boxes with zero width or height are dropped
    and counted in ``stats.pixel_dropped_degenerate``.
    """
    score_map = np.asarray(score_map, dtype=np.float64)
    geo_maps = np.asarray(geo_maps, dtype=np.float64)
    if score_map.ndim != 2 or geo_maps.shape != (5,) + score_map.shape:
        raise InvalidInputError(
            f"expected a (H, W) score map and (5, H, W) geometry, got {score_map.shape} and {geo_maps.shape}"
        )
    keep = score_map >= cfg.pixel_score_thresh
    xs, ys = cell_centers(score_map.shape, stride)
    g = geo_maps[:, keep]
    ok = (g[0] + g[1] > 0) & (g[2] + g[3] > 0)
    if stats is not None:
        stats.pixel_dropped_degenerate += int((~ok).sum())
    corners = rbox_corners(xs[keep][ok], ys[keep][ok], *g[:, ok])
    dets = _quads_from_corners(corners, score_map[keep][ok], PIXEL, stats, "pixel_dropped_degenerate")
    if stats is not None:
        stats.pixel_decoded += len(dets)
    return dets


def filter_pixel(dets, cfg: FusionConfig = FusionConfig()) -> list[Detection]:
    """Drop boxes whose bounding rectangle is too small or too elongated."""
    lo, hi = cfg.mbr_ratio_range
    out = []
    for d in dets:
        r = mbr(d.quad)
        w, h = r.width, r.height
        if min(w, h) < cfg.min_mbr_side:
            continue
        if not lo <= w / h <= hi:
            continue
        out.append(d)
    return out


def decode_anchor(trimmed: AnchorLattice, scores, offsets, cfg: FusionConfig = FusionConfig(),
                  stats: NmsStats | None = None) -> list[Detection]:
    """Decode anchors scoring at least ``anchor_score_thresh``.

    ``scores`` / ``offsets`` may be aligned either with ``trimmed`` itself or
    with the full lattice it was cut from (looked up through
    ``trimmed.index``).
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    offsets = np.asarray(offsets, dtype=np.float64).reshape(-1, 8) if np.size(offsets) else np.zeros((0, 8))
    if len(scores) != len(offsets):
        raise InvalidInputError(f"{len(scores)} scores but {len(offsets)} offset rows")
    n = len(trimmed)
    if len(scores) != n:
        if n and len(scores) > trimmed.index.max():
            scores = scores[trimmed.index]
            offsets = offsets[trimmed.index]
        else:
            raise InvalidInputError(f"{len(scores)} anchor predictions do not fit a lattice of {n}")
    keep = np.flatnonzero(scores >= cfg.anchor_score_thresh)
    sub = trimmed.subset(keep)
    wh = np.stack([sub.w, sub.h], axis=1)
    corners = decode_offsets_many(sub.corners(), wh, offsets[keep])
    dets = _quads_from_corners(corners, scores[keep], ANCHOR, stats, "anchor_dropped_degenerate")
    if stats is not None:
        stats.anchor_decoded += len(dets)
    return dets


def fuse_scores(dets, cfg: FusionConfig = FusionConfig()) -> list[Detection]:
    return [
        Detection(d.quad, d.score + cfg.anchor_score_boost, d.source) if d.source == ANCHOR else d
        for d in dets
    ]


def _priority_order(dets) -> list[int]:
    return sorted(range(len(dets)), key=lambda i: (-dets[i].score, dets[i].source != ANCHOR, i))


def _greedy(order, iou_one_to_many, thresh):
    """Greedy suppression over ``order``; returns kept positions and evaluation count."""
    alive = np.ones(len(order), dtype=bool)
    kept = []
    evals = 0
    for k in range(len(order)):
        if not alive[k]:
            continue
        kept.append(k)
        rest = np.flatnonzero(alive[k + 1:]) + k + 1
        if len(rest) == 0:
            continue
        evals += len(rest)
        iou = iou_one_to_many(k, rest)
        alive[rest[iou > thresh]] = False
    return kept, evals


def cascaded_nms(dets, cfg: FusionConfig = FusionConfig(), stats: NmsStats | None = None) -> list[Detection]:
    """Bounding-rectangle NMS at ``mbr_nms_iou`` followed by quad NMS at ``quad_nms_iou``.

    Candidates are ranked by score, then anchor before pixel, then input
    position. A candidate is suppressed when its IoU with a kept one is
    strictly greater than the threshold.
    """
    dets = list(dets)
    order = _priority_order(dets)
    pts = np.stack([dets[i].quad.points for i in order]) if dets else np.zeros((0, 4, 2))
    rects = mbr_many(pts)

    kept1, mbr_evals = _greedy(order, lambda k, rest: aarect_iou_one_to_many(rects[k], rects[rest]), cfg.mbr_nms_iou)
    pts1 = pts[kept1]
    kept2, quad_evals = _greedy(kept1, lambda k, rest: quad_iou_one_to_many(pts1[k], pts1[rest]), cfg.quad_nms_iou)
    survivors = [dets[order[kept1[k]]] for k in kept2]

    if stats is not None:
        stats.candidates += len(dets)
        stats.after_mbr_nms += len(kept1)
        stats.after_quad_nms += len(survivors)
        stats.mbr_iou_evals += mbr_evals
        stats.quad_iou_evals += quad_evals
    return survivors


def quad_nms(dets, iou_thresh: float = 0.2, stats: NmsStats | None = None) -> list[Detection]:
    """Single-stage greedy NMS on the quadrilaterals alone."""
    dets = list(dets)
    order = _priority_order(dets)
    pts = np.stack([dets[i].quad.points for i in order]) if dets else np.zeros((0, 4, 2))
    kept, evals = _greedy(order, lambda k, rest: quad_iou_one_to_many(pts[k], pts[rest]), iou_thresh)
    if stats is not None:
        stats.candidates += len(dets)
        stats.after_quad_nms += len(kept)
        stats.quad_iou_evals += evals
    return [dets[order[k]] for k in kept]


@dataclass
class FusionResult:
    detections: list
    stats: NmsStats


def fusion_nms_pipeline(score_map, geo_maps, anchor_scores, anchor_offsets, lattice: AnchorLattice,
                        cfg: FusionConfig = FusionConfig(), stride: int = 4) -> FusionResult:
    """Full inference post-processing for one image.

    ``lattice`` may be the full lattice or an already trimmed one; trimming
    is idempotent. Anchor tensors may be aligned with either.
    """
    stats = NmsStats()
    pixel = decode_pixel(score_map, geo_maps, stride, cfg, stats)
    pixel = filter_pixel(pixel, cfg)
    stats.pixel_after_filter = len(pixel)

    trimmed = trim_for_inference(lattice)
    anchor_scores = np.asarray(anchor_scores, dtype=np.float64).ravel()
    if len(anchor_scores) == len(lattice) and len(lattice) != len(trimmed):
        sel = np.searchsorted(lattice.index, trimmed.index)
        anchor_scores = anchor_scores[sel]
        anchor_offsets = np.asarray(anchor_offsets, dtype=np.float64).reshape(-1, 8)[sel]
    anchor = decode_anchor(trimmed, anchor_scores, anchor_offsets, cfg, stats)

    fused = fuse_scores(pixel + anchor, cfg)
    final = cascaded_nms(fused, cfg, stats)
    return FusionResult(final, stats)
