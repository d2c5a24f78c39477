"""
Training targets for both branches
==================================

Score, geometry and attention maps for the pixel branch, and labels plus
corner offsets for the anchor branch, built from one synthetic scene.
"""

import numpy as np

from quadtext.anchors import APLConfig, build_lattice
from quadtext.synthetic import random_scene, scene_ground_truth
from quadtext.targets import IGNORED, POSITIVE, decode_offsets, make_pixel_targets, match_anchors

rng = np.random.default_rng(0)
size = (320, 320)
gt = scene_ground_truth(random_scene(rng, 4, size), size)
print("ground-truth quads:", len(gt))

# %%
# Pixel targets live on a stride-4 grid. Cells inside the shrunk quad are
# positive, the band between shrunk and full quad is ignored.
pix = make_pixel_targets(gt, grid_stride=4, shrink_ratio=0.3)
print("grid:", pix.shape)
print("positive cells:", int((pix.score_map == POSITIVE).sum()), " ignored:", int((pix.score_map == IGNORED).sum()))
print("attention positives:", int((pix.attention_map == POSITIVE).sum()))

# %%
# Each positive cell stores distances to the four sides of the fitted rect
# and its angle.
r, c = (int(v) for v in np.argwhere(pix.positive)[0])
print("geo at", (r, c), np.round(pix.geo_maps[:, r, c], 2))

# %%
# Anchors match on bounding-rectangle IoU; each quad also claims its best anchor.
lattice = build_lattice(APLConfig(), *size)
anc = match_anchors(lattice, gt, pos_iou=0.5)
pos = np.flatnonzero(anc.positive)
print("positive anchors:", len(pos), "of", len(lattice))

# %%
# Offsets are corner displacements normalized by anchor size; decoding them
# gives the ground-truth quad back.
k = pos[0]
back = decode_offsets(lattice[k], anc.offsets[k])
print("recovered:", np.allclose(back.points, gt.quads[anc.gt_index[k]].points))
