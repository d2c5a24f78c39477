"""
Training targets for both detector branches.

Label grids use ``POSITIVE = 1``, ``NEGATIVE = 0`` and ``IGNORED = -1``; the
same encoding is used for anchor labels and understood by the OHEM code.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .anchors import Anchor, AnchorLattice
from .errors import DegenerateResultError, InvalidInputError
from .geometry import (
    Quad,
    aarect_iou_one_to_many,
    as_quad,
    fit_rotated_rect,
    mbr,
    points_in_convex,
    shrink_quad,
)

POSITIVE = 1
NEGATIVE = 0
IGNORED = -1


@dataclass(frozen=True)
class GroundTruth:
    """Text quads of one image; ``care[i] is False`` marks a DO-NOT-CARE region."""

    quads: tuple
    care: tuple
    image_size: tuple[int, int] | None = None

    def __post_init__(self):
        quads = tuple(as_quad(q) for q in self.quads)
        care = tuple(bool(c) for c in self.care)
        if len(quads) != len(care):
            raise InvalidInputError("quads and care flags differ in length")
        object.__setattr__(self, "quads", quads)
        object.__setattr__(self, "care", care)

    @classmethod
    def from_quads(cls, quads, care=None, image_size=None) -> "GroundTruth":
        quads = list(quads)
        if care is None:
            care = [True] * len(quads)
        return cls(tuple(quads), tuple(care), image_size)

    def __len__(self):
        return len(self.quads)

    @property
    def care_indices(self) -> list[int]:
        return [i for i, c in enumerate(self.care) if c]


@dataclass(frozen=True, eq=False)
class PixelTargets:
    """Score, geometry and attention targets on one prediction grid.

    ``geo_maps`` channels are ``d_top, d_bottom, d_left, d_right, theta`` and
    are zero outside positive cells. ``gt_index`` records which ground-truth
    quad each positive cell belongs to (``-1`` elsewhere).
    """

    score_map: np.ndarray
    geo_maps: np.ndarray
    attention_map: np.ndarray
    gt_index: np.ndarray
    stride: int

    @property
    def shape(self) -> tuple[int, int]:
        return self.score_map.shape

    @property
    def positive(self) -> np.ndarray:
        return self.score_map == POSITIVE

    def cell_centers(self):
        return cell_centers(self.shape, self.stride)


def cell_centers(shape, stride):
    """Image coordinates of every grid cell center, as two ``(H, W)`` arrays."""
    h, w = shape
    ys = (np.arange(h) + 0.5) * stride
    xs = (np.arange(w) + 0.5) * stride
    return np.meshgrid(xs, ys)


def _grid_shape(gt: GroundTruth, stride: int, image_size) -> tuple[int, int]:
    size = image_size or gt.image_size
    if size is None:
        raise InvalidInputError("image size is required to build pixel targets")
    w, h = size
    return math.ceil(h / stride), math.ceil(w / stride)


def _region_mask(quad: Quad, xs, ys, stride) -> tuple[tuple[slice, slice], np.ndarray]:
    """Inside mask restricted to the cells around the quad's bounding box."""
    x0, y0, x1, y1 = mbr(quad)
    h, w = xs.shape
    r0 = max(int(math.floor(y0 / stride - 0.5)), 0)
    r1 = min(int(math.ceil(y1 / stride - 0.5)) + 1, h)
    c0 = max(int(math.floor(x0 / stride - 0.5)), 0)
    c1 = min(int(math.ceil(x1 / stride - 0.5)) + 1, w)
    sl = (slice(r0, max(r0, r1)), slice(c0, max(c0, c1)))
    pts = np.stack([xs[sl], ys[sl]], axis=-1)
    return sl, points_in_convex(pts, quad.points)


def make_pixel_targets(
    gt: GroundTruth, grid_stride: int = 4, shrink_ratio: float = 0.3, image_size=None
) -> PixelTargets:
    """Label every grid cell by where its center falls.

    Positive: inside the shrunk version of a care quad. Ignored: inside a
    care quad but outside its shrunk version, or anywhere inside a
    DO-NOT-CARE quad (these also override positives). Where shrunk quads
    overlap, the smaller quad owns the cell.
    """
    if grid_stride < 1:
        raise InvalidInputError("grid stride must be >= 1")
    if not 0.0 <= shrink_ratio < 0.5:
        raise InvalidInputError("shrink ratio must be in [0, 0.5)")
    shape = _grid_shape(gt, grid_stride, image_size)
    xs, ys = cell_centers(shape, grid_stride)

    score = np.zeros(shape, dtype=np.int8)
    attention = np.zeros(shape, dtype=np.int8)
    owner = np.full(shape, -1, dtype=np.int32)
    band = np.zeros(shape, dtype=bool)
    dont_care = np.zeros(shape, dtype=bool)

    care = gt.care_indices
    for i in sorted(care, key=lambda k: -gt.quads[k].area):
        quad = gt.quads[i]
        sl, inside = _region_mask(quad, xs, ys, grid_stride)
        attention[sl][inside] = POSITIVE
        band[sl] |= inside
        try:
            shrunk = shrink_quad(quad, shrink_ratio)
        except DegenerateResultError:
            continue
        sl, inside_s = _region_mask(shrunk, xs, ys, grid_stride)
        owner[sl][inside_s] = i

    for i, c in enumerate(gt.care):
        if not c:
            sl, inside = _region_mask(gt.quads[i], xs, ys, grid_stride)
            dont_care[sl] |= inside

    positive = (owner >= 0) & ~dont_care
    owner[~positive] = -1
    score[positive] = POSITIVE
    score[(band & ~positive) | dont_care] = IGNORED
    attention[dont_care] = IGNORED

    geo = np.zeros((5,) + shape, dtype=np.float64)
    for i in care:
        cells = owner == i
        if not cells.any():
            continue
        rect = fit_rotated_rect(gt.quads[i])
        c, s = math.cos(rect.theta), math.sin(rect.theta)
        dx = xs[cells] - rect.center.x
        dy = ys[cells] - rect.center.y
        lx = c * dx + s * dy
        ly = -s * dx + c * dy
        geo[0][cells] = rect.height / 2 + ly
        geo[1][cells] = rect.height / 2 - ly
        geo[2][cells] = rect.width / 2 + lx
        geo[3][cells] = rect.width / 2 - lx
        geo[4][cells] = rect.theta
    return PixelTargets(score, geo, attention, owner, grid_stride)


# ---------------------------------------------------------------------------
# anchor branch


def encode_offsets_many(corners: np.ndarray, wh: np.ndarray, quads: np.ndarray) -> np.ndarray:
    """``(N, 4, 2)`` anchor corners and quads -> ``(N, 8)`` normalized offsets."""
    d = (quads - corners) / wh[:, None, :]
    return d.reshape(len(d), 8)


def decode_offsets_many(corners: np.ndarray, wh: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """Inverse of :func:`encode_offsets_many`; returns raw ``(N, 4, 2)`` corners."""
    offsets = np.asarray(offsets, dtype=np.float64).reshape(-1, 4, 2)
    return corners + offsets * wh[:, None, :]


def encode_offsets(a: Anchor, q) -> np.ndarray:
    q = as_quad(q)
    out = encode_offsets_many(a.corners()[None], np.array([[a.w, a.h]]), q.points[None])
    return out[0]


def decode_offsets(a: Anchor, offsets) -> Quad:
    corners = decode_offsets_many(a.corners()[None], np.array([[a.w, a.h]]), offsets)[0]
    try:
        return Quad(corners)
    except InvalidInputError as exc:
        raise DegenerateResultError(f"decoded quad is invalid: {exc}") from None


@dataclass(frozen=True, eq=False)
class AnchorTargets:
    """Per-anchor labels, matched ground truth and offset targets.

    ``labels`` uses the grid encoding; ``IGNORED`` marks anchors whose best
    match is a DO-NOT-CARE quad. ``offsets`` is zero on non-positives.
    """

    labels: np.ndarray
    gt_index: np.ndarray
    best_iou: np.ndarray
    offsets: np.ndarray

    @property
    def positive(self) -> np.ndarray:
        return self.labels == POSITIVE

    def __len__(self):
        return len(self.labels)


def _forced_matches(ious: np.ndarray, centers: np.ndarray, gt_centers: np.ndarray) -> dict[int, int]:
    """Greedy one-to-one best-anchor assignment, one anchor per column.

    Columns are served in order of their best available IoU. Ties between
    anchors go to the nearest center, then the lowest index.
    """
    n, g = ious.shape
    taken = np.zeros(n, dtype=bool)
    result: dict[int, int] = {}
    remaining = list(range(g))
    while remaining:
        best = None
        for col in remaining:
            col_iou = np.where(taken, -1.0, ious[:, col])
            mx = col_iou.max()
            cand = np.flatnonzero(col_iou == mx)
            if len(cand) > 1:
                dist = np.hypot(*(centers[cand] - gt_centers[col]).T)
                cand = cand[np.argmin(dist)]
            else:
                cand = cand[0]
            if best is None or mx > best[0]:
                best = (mx, col, int(cand))
        _, col, anchor = best
        result[col] = anchor
        taken[anchor] = True
        remaining.remove(col)
    return result


def match_anchors(lattice: AnchorLattice, gt: GroundTruth, pos_iou: float = 0.5) -> AnchorTargets:
    """Assign anchors to ground-truth quads through their bounding rectangles.

    An anchor is positive when the quad it overlaps most (IoU of the anchor
    rectangle with the quad's MBR) gives an IoU above ``pos_iou``. Each care
    quad additionally claims its single best anchor. Anchors whose best match
    is a DO-NOT-CARE quad above the threshold are ignored.
    """
    n = len(lattice)
    if n == 0:
        raise InvalidInputError("empty anchor lattice")
    labels = np.full(n, NEGATIVE, dtype=np.int8)
    gt_index = np.full(n, -1, dtype=np.int32)
    offsets = np.zeros((n, 8))
    if len(gt) == 0:
        return AnchorTargets(labels, gt_index, np.zeros(n), offsets)

    rects = lattice.rects()
    gt_rects = [mbr(q) for q in gt.quads]
    ious = np.stack([aarect_iou_one_to_many(r, rects) for r in gt_rects], axis=1)
    best = ious.argmax(axis=1)
    best_iou = ious[np.arange(n), best]
    care = np.array(gt.care)

    above = best_iou > pos_iou
    pos = above & care[best]
    labels[pos] = POSITIVE
    gt_index[pos] = best[pos]
    labels[above & ~care[best]] = IGNORED

    care_cols = gt.care_indices
    if care_cols:
        centers = np.stack([lattice.cx, lattice.cy], axis=1)
        gt_centers = np.array([[(r[0] + r[2]) / 2, (r[1] + r[3]) / 2] for r in gt_rects])[care_cols]
        forced = _forced_matches(ious[:, care_cols], centers, gt_centers)
        for k, anchor in forced.items():
            labels[anchor] = POSITIVE
            gt_index[anchor] = care_cols[k]

    idx = np.flatnonzero(labels == POSITIVE)
    if len(idx):
        quads = np.stack([gt.quads[g].points for g in gt_index[idx]])
        wh = np.stack([lattice.w[idx], lattice.h[idx]], axis=1)
        offsets[idx] = encode_offsets_many(lattice.subset(idx).corners(), wh, quads)
    return AnchorTargets(labels, gt_index, best_iou, offsets)

