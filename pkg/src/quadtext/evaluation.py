"""Precision / recall / F-measure with greedy one-to-one IoU matching."""
from __future__ import annotations

from dataclasses import dataclass, field

from .geometry import quad_iou
from .targets import GroundTruth


@dataclass
class Metrics:
    precision: float
    recall: float
    f_measure: float
    true_positives: int = 0
    num_detections: int = 0
    num_care_gt: int = 0
    matches: list = field(default_factory=list)

    @classmethod
    def from_counts(cls, tp: int, n_det: int, n_gt: int, matches=None) -> "Metrics":
        p = tp / n_det if n_det else 0.0
        r = tp / n_gt if n_gt else 0.0
        f = 2 * p * r / (p + r) if p + r > 0 else 0.0
        return cls(p, r, f, tp, n_det, n_gt, list(matches or []))

    def as_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f_measure": self.f_measure,
            "true_positives": self.true_positives,
            "num_detections": self.num_detections,
            "num_care_gt": self.num_care_gt,
            "matches": [list(m) for m in self.matches],
        }


def match_detections(dets, gt: GroundTruth, iou_thresh: float = 0.5):
    """Greedy matching in score order.

    Returns ``(matches, ignored)`` where ``matches`` holds
    ``(det_index, gt_index, iou)`` for true positives and ``ignored`` is the
    set of detection indices that fell on a DO-NOT-CARE region instead.
    """
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    claimed = set()
    matches, ignored = [], set()
    care = [i for i, c in enumerate(gt.care) if c]
    dont_care = [i for i, c in enumerate(gt.care) if not c]
    for di in order:
        q = dets[di].quad
        best, best_iou = None, iou_thresh
        for gi in care:
            if gi in claimed:
                continue
            iou = quad_iou(q, gt.quads[gi])
            if iou >= best_iou and (best is None or iou > best_iou):
                best, best_iou = gi, iou
        if best is not None:
            claimed.add(best)
            matches.append((di, best, best_iou))
            continue
        if any(quad_iou(q, gt.quads[gi]) >= iou_thresh for gi in dont_care):
            ignored.add(di)
    return matches, ignored


def evaluate(dets, gt: GroundTruth, iou_thresh: float = 0.5) -> Metrics:
    """Single-image metrics.

    Detections matched to a DO-NOT-CARE region are left out of the
    precision denominator; DO-NOT-CARE quads are left out of recall.
    """
    dets = list(dets)
    matches, ignored = match_detections(dets, gt, iou_thresh)
    return Metrics.from_counts(len(matches), len(dets) - len(ignored), sum(gt.care), matches)


def evaluate_many(pairs, iou_thresh: float = 0.5) -> Metrics:
    """Dataset-level metrics pooled over ``(detections, ground_truth)`` pairs."""
    tp = n_det = n_gt = 0
    matches = []
    for k, (dets, gt) in enumerate(pairs):
        m = evaluate(dets, gt, iou_thresh)
        tp += m.true_positives
        n_det += m.num_detections
        n_gt += m.num_care_gt
        matches.extend((k,) + tuple(x) for x in m.matches)
    return Metrics.from_counts(tp, n_det, n_gt, matches)
