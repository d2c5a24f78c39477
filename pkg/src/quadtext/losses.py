"""
Loss values for both branches, with online hard example mining.

Everything here works on plain numpy arrays of probabilities and
regression values; there is no autodiff. Randomness comes only from the
``rng`` argument (see :func:`make_rng`), so results are reproducible.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .targets import NEGATIVE, POSITIVE, AnchorTargets

EPS = 1e-7


@dataclass(frozen=True)
class LossWeights:
    lambda_theta: float = 10.0
    alpha_p: float = 1.0
    alpha_a: float = 0.2
    alpha_all: float = 3.0

    def __post_init__(self):
        for name in ("lambda_theta", "alpha_p", "alpha_a", "alpha_all"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")


@dataclass(frozen=True)
class OhemPolicy:
    """Example-mining counts per image.

    ``normalize`` selects the divisor for the classification terms:
    ``"positive"`` (number of positives in the selected set) or ``"mean"``
    (size of the selected set).
    """

    pixel_hard_neg: int = 512
    pixel_rand_neg: int = 512
    pixel_loc_hard_pos: int = 128
    pixel_loc_rand_pos: int = 128
    anchor_neg_pos_ratio: float = 3.0
    rng_seed: int = 0
    normalize: str = "positive"

    def __post_init__(self):
        counts = (self.pixel_hard_neg, self.pixel_rand_neg, self.pixel_loc_hard_pos, self.pixel_loc_rand_pos)
        if any(c < 0 for c in counts):
            raise ValueError("OHEM counts must be >= 0")
        if self.anchor_neg_pos_ratio < 1:
            raise ValueError("anchor negative:positive ratio must be >= 1")
        if self.normalize not in ("positive", "mean"):
            raise ValueError(f"unknown normalization {self.normalize!r}")


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based (Philox) generator; one per image keeps runs reproducible."""
    return np.random.Generator(np.random.Philox(seed))


def cross_entropy(p, y):
    """Binary cross entropy on probabilities, clamped to ``[EPS, 1 - EPS]``."""
    p = np.clip(np.asarray(p, dtype=np.float64), EPS, 1 - EPS)
    y = np.asarray(y, dtype=np.float64)
    out = -y * np.log(p) - (1 - y) * np.log1p(-p)
    return float(out) if out.ndim == 0 else out


def _rank_desc(values: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """``idx`` ordered by value descending, index ascending on ties."""
    order = np.lexsort((idx, -values[idx]))
    return idx[order]


def ohem_select(scores, labels, n_hard: int, n_rand: int, rng: np.random.Generator | None = None) -> np.ndarray:
    """Indices used for classification: all positives plus mined negatives.

    The ``n_hard`` negatives with the highest loss (highest predicted text
    probability) are taken first, then ``n_rand`` more are drawn uniformly
    without replacement from the remaining negatives. Ignored elements are
    never selected. Returns sorted flat indices.
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    pos = np.flatnonzero(labels == POSITIVE)
    neg = np.flatnonzero(labels == NEGATIVE)
    hard = _rank_desc(np.atleast_1d(cross_entropy(scores, 0.0)), neg)[:n_hard]
    rest = np.setdiff1d(neg, hard, assume_unique=True)
    n_rand = min(n_rand, len(rest))
    if n_rand > 0:
        if rng is None:
            raise ValueError("an rng is required for random negative sampling")
        rand = rng.choice(rest, size=n_rand, replace=False)
    else:
        rand = np.zeros(0, dtype=np.int64)
    return np.sort(np.concatenate([pos, hard, rand]).astype(np.int64))


def _branch_cls(scores, labels, policy: OhemPolicy, rng) -> float:
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    sel = ohem_select(scores, labels, policy.pixel_hard_neg, policy.pixel_rand_neg, rng)
    n_pos = int(np.count_nonzero(labels[sel] == POSITIVE))
    denom = n_pos if policy.normalize == "positive" else len(sel)
    if n_pos == 0 or denom == 0:
        return 0.0
    y = (labels[sel] == POSITIVE).astype(np.float64)
    return float(np.sum(cross_entropy(scores[sel], y)) / denom)


def pixel_cls_loss(rbox_scores, rbox_labels, heat_scores, heat_labels, policy: OhemPolicy, rng) -> float:
    """Score-map plus attention-map classification loss.

    Each branch draws its own OHEM sample and is normalized by the number of
    positives in its selected set (a branch without positives adds 0).
    """
    return _branch_cls(rbox_scores, rbox_labels, policy, rng) + _branch_cls(heat_scores, heat_labels, policy, rng)


def iou_loss(pred, target):
    """``-ln IoU`` of two boxes sharing one pixel, from their edge distances.

    Inputs have trailing dimension 4 or 5 ordered ``top, bottom, left,
    right[, theta]``; angles are ignored.
    """
    p = np.asarray(pred, dtype=np.float64)
    g = np.asarray(target, dtype=np.float64)
    t, b, l, r = (p[..., k] for k in range(4))
    ts, bs, ls, rs = (g[..., k] for k in range(4))
    area_p = (t + b) * (l + r)
    area_g = (ts + bs) * (ls + rs)
    w_i = np.minimum(l, ls) + np.minimum(r, rs)
    h_i = np.minimum(t, ts) + np.minimum(b, bs)
    inter = w_i * h_i
    union = area_p + area_g - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        iou = np.where(union > 0, inter / union, 0.0)
    out = -np.log(np.maximum(iou, EPS))
    return float(out) if out.ndim == 0 else out


def angle_loss(theta, theta_star):
    out = 1.0 - np.cos(np.asarray(theta, dtype=np.float64) - np.asarray(theta_star, dtype=np.float64))
    return float(out) if out.ndim == 0 else out


def pixel_loc_loss(preds, targets, positives, policy: OhemPolicy, rng, w: LossWeights = LossWeights()) -> float:
    """Box regression loss over mined positive pixels.

    ``preds`` and ``targets`` hold 5 channels (4 distances and the angle)
    along axis 0; ``positives`` is a mask over the remaining axes.
    """
    preds = np.asarray(preds, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    mask = np.asarray(positives, dtype=bool)
    p = preds.reshape(5, -1)[:, mask.ravel()].T
    g = targets.reshape(5, -1)[:, mask.ravel()].T
    if len(p) == 0:
        return 0.0
    per = iou_loss(p, g) + w.lambda_theta * angle_loss(p[:, 4], g[:, 4])
    per = np.atleast_1d(per)
    idx = np.arange(len(per))
    hard = _rank_desc(per, idx)[: policy.pixel_loc_hard_pos]
    rest = np.setdiff1d(idx, hard, assume_unique=True)
    n_rand = min(policy.pixel_loc_rand_pos, len(rest))
    rand = rng.choice(rest, size=n_rand, replace=False) if n_rand > 0 else np.zeros(0, dtype=np.int64)
    sel = np.concatenate([hard, rand])
    return float(per[sel].sum() / len(sel))


def smooth_l1(x):
    x = np.asarray(x, dtype=np.float64)
    ax = np.abs(x)
    out = np.where(ax < 1, 0.5 * x * x, ax - 0.5)
    return float(out) if out.ndim == 0 else out


def anchor_select(scores, labels, ratio: float = 3.0) -> np.ndarray:
    """All positive anchors plus ``ratio`` times as many hardest negatives."""
    labels = np.asarray(labels).ravel()
    n_pos = int(np.count_nonzero(labels == POSITIVE))
    return ohem_select(scores, labels, int(round(ratio * n_pos)), 0)


def anchor_losses(scores, offset_preds, targets: AnchorTargets, policy: OhemPolicy, rng=None,
                  w: LossWeights = LossWeights()) -> tuple[float, float]:
    """Classification and offset-regression loss of the anchor branch.

    Both are divided by the number of positive anchors; with no positives
    both are 0. ``rng`` is accepted for interface symmetry; anchor mining
    has no random part.
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(targets.labels).ravel()
    if len(scores) != len(labels):
        raise ValueError(f"{len(scores)} scores for {len(labels)} anchors")
    sel = anchor_select(scores, labels, policy.anchor_neg_pos_ratio)
    pos = sel[labels[sel] == POSITIVE]
    n_pos = len(pos)
    if n_pos == 0:
        return 0.0, 0.0
    y = (labels[sel] == POSITIVE).astype(np.float64)
    denom = n_pos if policy.normalize == "positive" else len(sel)
    cls = float(np.sum(cross_entropy(scores[sel], y)) / denom)
    diff = np.asarray(offset_preds, dtype=np.float64).reshape(-1, 8)[pos] - targets.offsets[pos]
    loc = float(np.sum(smooth_l1(diff)) / n_pos)
    return cls, loc


def total_loss(pixel_cls: float, pixel_loc: float, anchor_cls: float, anchor_loc: float,
               w: LossWeights = LossWeights()) -> float:
    return w.alpha_all * (pixel_cls + w.alpha_p * pixel_loc) + (anchor_cls + w.alpha_a * anchor_loc)

