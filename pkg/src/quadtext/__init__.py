"""
quadtext
========

Post-network machinery for an oriented scene-text detector that combines a
per-pixel rotated-box branch with an SSD-style anchor branch: anchor lattice
construction, training targets, loss values with hard example mining, fusion
NMS over both branches and an ICDAR-style evaluator.

Quick example
-------------

.. code:: python

    from quadtext import APLConfig, build_lattice, trim_for_inference

    lattice = build_lattice(APLConfig(), 640, 640)
    trimmed = trim_for_inference(lattice)
"""
__version__ = "0.1.0"

from .anchors import APLConfig, Anchor, AnchorCategory, AnchorLattice, build_lattice, count_anchors, trim_for_inference
from .errors import DegenerateResultError, FormatError, InvalidInputError, ParseError, QuadTextError
from .evaluation import Metrics, evaluate, evaluate_many
from .geometry import (
    AARect,
    Point,
    Quad,
    RBoxPred,
    RotRect,
    aarect_iou,
    clip_convex,
    fit_rotated_rect,
    mbr,
    polygon_area,
    quad_iou,
    rbox_to_quad,
    shrink_quad,
)
from .losses import (
    LossWeights,
    OhemPolicy,
    anchor_losses,
    angle_loss,
    cross_entropy,
    iou_loss,
    make_rng,
    ohem_select,
    pixel_cls_loss,
    pixel_loc_loss,
    smooth_l1,
    total_loss,
)
from .postprocess import (
    Detection,
    FusionConfig,
    attention_multiplier,
    cascaded_nms,
    decode_anchor,
    decode_pixel,
    filter_pixel,
    fuse_scores,
    fusion_nms_pipeline,
    quad_nms,
)
from .targets import (
    AnchorTargets,
    GroundTruth,
    PixelTargets,
    decode_offsets,
    encode_offsets,
    make_pixel_targets,
    match_anchors,
)
