"""Shared fixture builders for the test modules."""
import numpy as np

from quadtext.anchors import APLConfig, AnchorCategory, build_lattice
from quadtext.geometry import Point, RotRect, rotrect_to_quad
from quadtext.targets import GroundTruth


def random_config(rng):
    return APLConfig(
        strides=tuple(int(s) for s in rng.choice([2, 4, 8, 16, 32], 6)),
        base_scales=tuple(float(x) for x in rng.uniform(4, 40, 6)),
        medium_density=tuple(int(d) for d in rng.integers(1, 5, 6)),
        long_density=tuple(int(d) for d in rng.integers(1, 7, 6)),
        long_enabled=(False,) + tuple(bool(b) for b in rng.random(5) < 0.7),
        map_enabled=tuple(bool(b) for b in rng.random(6) < 0.85),
    )


def long_anchor_rect(lattice, row=10, col=10):
    """A horizontal rect that a ratio-15 map-3 anchor matches with IoU 0.9.

    It is also within the pixel branch's size and aspect filter, so both
    branches cover it.
    """
    sel = np.flatnonzero((lattice.map_index == 3) & (lattice.category == AnchorCategory.LONG_HORIZONTAL)
                         & np.isclose(lattice.w / lattice.h, 15) & (lattice.row == row) & (lattice.col == col))
    a = lattice[int(sel[0])]
    return RotRect(Point(a.cx, a.cy), 0.9 * a.w, a.h, 0.0)


def long_anchor_scene(size=(640, 640)):
    lattice = build_lattice(APLConfig(), *size)
    gt = GroundTruth.from_quads([rotrect_to_quad(long_anchor_rect(lattice))], image_size=size)
    return lattice, gt
