"""Synthetic scenes and prediction tensors for tests, demos and benchmarks."""
from __future__ import annotations

import math

import numpy as np

from .geometry import Point, Quad, RotRect, aarect_iou_one_to_many, rotrect_corners, rotrect_to_quad
from .postprocess import ANCHOR, PIXEL, Detection
from .targets import AnchorTargets, GroundTruth, PixelTargets


def random_convex_quad(rng: np.random.Generator, center=(0.0, 0.0), scale=5.0) -> Quad:
    """Affine image of four points on a circle; always convex."""
    while True:
        ang = np.sort(rng.uniform(0, 2 * np.pi, 4))
        a = rng.normal(size=(2, 2)) * scale
        pts = np.stack([np.cos(ang), np.sin(ang)], axis=1) @ a.T + np.asarray(center, dtype=float)
        try:
            q = Quad(pts)
        except ValueError:
            continue
        if q.area > 1e-3 * scale * scale:
            return q


def random_scene(rng: np.random.Generator, n: int, image_size=(256, 256), min_side=(24.0, 12.0),
                 max_side=(120.0, 32.0), max_angle=math.pi / 2, margin=4.0, max_tries=2000) -> list[RotRect]:
    """Up to ``n`` rotated rectangles inside the image whose bounding boxes do not touch."""
    w_img, h_img = image_size
    rects, boxes = [], []
    tries = 0
    while len(rects) < n and tries < max_tries:
        tries += 1
        w = rng.uniform(min_side[0], max_side[0])
        h = rng.uniform(min_side[1], min(max_side[1], w))
        theta = rng.uniform(-max_angle, max_angle)
        theta = theta if theta > -math.pi / 2 else theta + math.pi
        cx = rng.uniform(0, w_img)
        cy = rng.uniform(0, h_img)
        r = RotRect(Point(cx, cy), w, h, theta)
        pts = rotrect_corners(r)
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        if lo.min() < margin or hi[0] > w_img - margin or hi[1] > h_img - margin:
            continue
        box = np.array([lo[0] - margin, lo[1] - margin, hi[0] + margin, hi[1] + margin])
        if boxes and aarect_iou_one_to_many(box, np.array(boxes)).max() > 0:
            continue
        rects.append(r)
        boxes.append(box)
    return rects


def scene_ground_truth(rects, image_size, care=None) -> GroundTruth:
    return GroundTruth.from_quads([rotrect_to_quad(r) for r in rects], care, image_size)


def perfect_predictions(pixel: PixelTargets, anchors: AnchorTargets):
    """Prediction tensors that reproduce the targets exactly.

    Returns ``(pixel_tensor (6, H, W), attention (H, W), anchor_tensor (N, 9))``.
    """
    score = (pixel.score_map == 1).astype(np.float64)
    pix = np.concatenate([score[None], pixel.geo_maps], axis=0)
    attention = (pixel.attention_map == 1).astype(np.float64)
    anc = np.concatenate([(anchors.labels == 1).astype(np.float64)[:, None], anchors.offsets], axis=1)
    return pix, attention, anc


def random_candidates(rng: np.random.Generator, n: int, image_size=(1024, 1024), n_objects=None,
                      jitter=0.08, pixel_fraction=0.5) -> list[Detection]:
    """Clustered candidate boxes, as a detector emits around each text instance.

    Each candidate is a jittered copy of one of ``n_objects`` rotated
    rectangles (default ``max(1, n // 100)``).
    """
    w_img, h_img = image_size
    n_objects = n_objects or max(1, n // 100)
    objs = []
    for _ in range(n_objects):
        w = rng.uniform(20, 200)
        h = rng.uniform(8, max(9.0, min(60, w)))
        objs.append((rng.uniform(0, w_img), rng.uniform(0, h_img), w, h, rng.uniform(-0.6, 0.6)))
    which = rng.integers(0, n_objects, n)
    dets = []
    for k in which:
        cx, cy, w, h, th = objs[k]
        s = rng.normal(0, jitter, 5)
        r = RotRect(Point(cx + s[0] * w, cy + s[1] * h), w * math.exp(s[2]), h * math.exp(s[3]), th + s[4])
        src = PIXEL if rng.random() < pixel_fraction else ANCHOR
        score = float(rng.random())
        dets.append(Detection(rotrect_to_quad(r), score, src))
    return dets

