"""
Loss values and hard example mining
===================================

The loss terms evaluated on small hand-built arrays.
"""

import math

import numpy as np

from quadtext.losses import OhemPolicy, iou_loss, make_rng, ohem_select, pixel_cls_loss, smooth_l1, total_loss

# IoU loss from shared-pixel distances: boxes 2x2 and 4x4 around one pixel.
print("iou_loss:", iou_loss([1, 1, 1, 1], [2, 2, 2, 2]), "= ln 4 =", math.log(4))
print("smooth_l1(0.5):", smooth_l1(0.5))

# %%
# OHEM keeps every positive, the hardest negatives, then a random draw.
rng = np.random.default_rng(1)
scores = rng.random(20)
labels = np.zeros(20, dtype=int)
labels[[3, 11]] = 1
sel = ohem_select(scores, labels, n_hard=4, n_rand=2, rng=make_rng(0))
print("selected:", sel.tolist())
print("same seed, same set:", sel.tolist() == ohem_select(scores, labels, 4, 2, make_rng(0)).tolist())

# %%
# Classification loss of both pixel maps, normalized by positives.
policy = OhemPolicy(pixel_hard_neg=4, pixel_rand_neg=2)
print("pixel cls:", pixel_cls_loss(scores, labels, scores, labels, policy, make_rng(0)))

# %%
# The weighted total: 3 * (1 + 1) + (1 + 0.2).
print("total_loss(1, 1, 1, 1):", total_loss(1, 1, 1, 1))
