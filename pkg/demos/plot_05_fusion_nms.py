"""
Fusion NMS
==========

Decode perfect predictions for a scene through both branches, merge them
and check the result.
"""

import numpy as np

from quadtext.anchors import APLConfig, build_lattice
from quadtext.evaluation import evaluate
from quadtext.postprocess import NmsStats, cascaded_nms, fusion_nms_pipeline, quad_nms
from quadtext.synthetic import perfect_predictions, random_candidates, random_scene, scene_ground_truth
from quadtext.targets import make_pixel_targets, match_anchors

rng = np.random.default_rng(3)
size = (512, 512)
lattice = build_lattice(APLConfig(), *size)
gt = scene_ground_truth(random_scene(rng, 5, size), size)

# %%
# Targets turned into prediction tensors that a perfect network would emit.
pix, attention, anc = perfect_predictions(make_pixel_targets(gt), match_anchors(lattice, gt))
result = fusion_nms_pipeline(pix[0], pix[1:], anc[:, 0], anc[:, 1:], lattice)
for key, value in result.stats.as_dict().items():
    print(f"  {key:26s} {value}")

m = evaluate(result.detections, gt)
print(f"P={m.precision:.3f} R={m.recall:.3f} F={m.f_measure:.3f}")

# %%
# The bounding-rectangle pass removes most duplicates cheaply, so far fewer
# exact quad intersections are needed.
dets = random_candidates(rng, 3000)
s1, s2 = NmsStats(), NmsStats()
cascaded_nms(dets, stats=s1)
quad_nms(dets, stats=s2)
print("quad IoU evaluations, cascade:", s1.quad_iou_evals, " single stage:", s2.quad_iou_evals)
