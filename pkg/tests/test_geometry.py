import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quadtext.errors import DegenerateResultError, InvalidInputError
from quadtext.geometry import (
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
    quad_iou_one_to_many,
    quads_to_array,
    rbox_distances,
    rbox_to_quad,
    rotrect_corners,
    rotrect_to_quad,
    shrink_quad,
)
from quadtext.synthetic import random_convex_quad

from oracles import min_area_rect_sweep, monte_carlo_iou, shoelace

UNIT = [(0, 0), (1, 0), (1, 1), (0, 1)]


def rotate(pts, angle, about=(0.0, 0.0)):
    c, s = math.cos(angle), math.sin(angle)
    p = np.asarray(pts, float) - about
    return p @ np.array([[c, -s], [s, c]]).T + about


def square(x0, y0, side):
    return [(x0, y0), (x0 + side, y0), (x0 + side, y0 + side), (x0, y0 + side)]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# -- construction ------------------------------------------------------------


class TestQuad:
    def test_canonical_order_from_any_start_and_winding(self):
        ref = Quad(UNIT)
        for k in range(4):
            rolled = UNIT[k:] + UNIT[:k]
            assert Quad(rolled) == ref
            assert Quad(rolled[::-1]) == ref
        assert ref.vertices[0] == Point(0, 0)
        assert ref.area == 1.0

    def test_flat_constructor(self):
        assert Quad([0, 0, 1, 0, 1, 1, 0, 1]) == Quad(UNIT)

    @pytest.mark.parametrize(
        "pts",
        [
            [(0, 0), (1, 1), (1, 0), (0, 1)],  # bow-tie
            [(0, 0), (1, 0), (0.2, 0.2), (0, 1)],  # reflex vertex
            [(0, 0), (1, 0), (1, 0), (0, 1)],  # repeated
            [(0, 0), (1, 0), (2, 0), (3, 0)],  # collinear
            [(0, 0), (1, 0), (1, float("nan")), (0, 1)],
        ],
    )
    def test_invalid(self, pts):
        with pytest.raises(InvalidInputError):
            Quad(pts)

    def test_wrong_vertex_count(self):
        with pytest.raises(InvalidInputError):
            Quad([(0, 0), (1, 0), (1, 1)])


# -- areas and clipping ----------------------------------------------------------


def test_polygon_area_examples():
    assert polygon_area(UNIT) == 1.0
    assert polygon_area([(0, 0), (1, 1), (2, 2)]) == 0.0
    assert polygon_area(square(3, 4, 10)) == 100.0
    with pytest.raises(InvalidInputError):
        polygon_area([(0, 0), (1, 1)])


def test_clip_convex_examples():
    a = Quad(UNIT)
    assert polygon_area(clip_convex(a, a)) == pytest.approx(1.0)
    assert clip_convex(a, Quad(square(5, 5, 1))) == []
    half = clip_convex(a, Quad(square(0.5, 0, 1)))
    assert polygon_area(half) == pytest.approx(0.5)
    xs = sorted({round(p.x, 12) for p in half})
    assert xs == [0.5, 1.0]


def test_clip_output_is_clockwise(rng):
    for _ in range(50):
        a = random_convex_quad(rng, (0, 0), 5)
        b = random_convex_quad(rng, (1, 1), 5)
        poly = clip_convex(a, b)
        if poly:
            s = sum(poly[i].x * poly[(i + 1) % len(poly)].y - poly[(i + 1) % len(poly)].x * poly[i].y
                    for i in range(len(poly)))
            assert s >= -1e-9


def test_quad_iou_examples():
    a = Quad(UNIT)
    assert quad_iou(a, a) == 1.0
    assert quad_iou(a, Quad(square(3, 3, 1))) == 0.0
    assert quad_iou(a, Quad(square(0.5, 0, 1))) == pytest.approx(1 / 3, abs=1e-12)
    # shared edge only
    assert quad_iou(a, Quad(square(1, 0, 1))) == 0.0


def test_aarect_iou_examples():
    assert aarect_iou(AARect(0, 0, 2, 2), AARect(0, 0, 2, 2)) == 1.0
    assert aarect_iou(AARect(0, 0, 1, 1), AARect(1, 0, 2, 1)) == 0.0
    assert aarect_iou(AARect(0, 0, 2, 2), AARect(1, 1, 3, 3)) == pytest.approx(1 / 7)


def test_quad_iou_matches_monte_carlo(rng):
    for _ in range(20):
        a = random_convex_quad(rng, (0, 0), 4)
        b = random_convex_quad(rng, rng.uniform(-3, 3, 2), 4)
        est = monte_carlo_iou(a.points, b.points, 100_000, rng)
        assert quad_iou(a, b) == pytest.approx(est, abs=0.01)


def test_vectorized_iou_matches_clipping(rng):
    pairs = [(random_convex_quad(rng, (0, 0), 5), random_convex_quad(rng, rng.uniform(-4, 4, 2), 5))
             for _ in range(300)]
    a = Quad(UNIT)
    # touching, nested, identical, shared-edge cases
    pairs += [(a, a), (a, Quad(square(1, 0, 1))), (a, Quad(square(0.25, 0.25, 0.5))),
              (a, Quad(square(0, 0.5, 1))), (a, Quad(rotate(UNIT, math.pi / 4, (0.5, 0.5))))]
    for p, q in pairs:
        vec = quad_iou_one_to_many(p, quads_to_array([q]))[0]
        assert vec == pytest.approx(quad_iou(p, q), abs=1e-9)


quad_strategy = st.builds(
    lambda seed, cx, cy, scale: random_convex_quad(np.random.default_rng(seed), (cx, cy), scale),
    st.integers(0, 2**32 - 1),
    st.floats(-20, 20),
    st.floats(-20, 20),
    st.floats(0.5, 20),
)


@settings(max_examples=150, deadline=None)
@given(quad_strategy, quad_strategy, st.floats(-50, 50), st.floats(-50, 50), st.floats(-math.pi, math.pi))
def test_quad_iou_properties(a, b, tx, ty, angle):
    iou = quad_iou(a, b)
    assert 0.0 <= iou <= 1.0
    assert iou == pytest.approx(quad_iou(b, a), abs=1e-9)
    assert quad_iou(a, a) == pytest.approx(1.0, abs=1e-12)
    moved_a = Quad(rotate(a.points, angle) + (tx, ty))
    moved_b = Quad(rotate(b.points, angle) + (tx, ty))
    assert quad_iou(moved_a, moved_b) == pytest.approx(iou, abs=1e-6)


# -- bounding rectangles ------------------------------------------------------------


def test_mbr_examples(rng):
    assert mbr(Quad(square(2, 3, 4))) == AARect(2, 3, 6, 7)
    r = mbr(Quad(rotate(UNIT, math.pi / 4)))
    h = math.sqrt(2) / 2
    assert r.xmin == pytest.approx(-h) and r.xmax == pytest.approx(h)
    assert r.ymin == pytest.approx(0, abs=1e-12) and r.ymax == pytest.approx(math.sqrt(2))
    for _ in range(100):
        q = random_convex_quad(rng, (0, 0), 10)
        pts = q.points.tolist()
        expected = (min(p[0] for p in pts), min(p[1] for p in pts), max(p[0] for p in pts), max(p[1] for p in pts))
        assert tuple(mbr(q)) == expected
        assert mbr(q).area >= q.area - 1e-9


# -- shrinking -----------------------------------------------------------------------


def test_shrink_identity():
    q = Quad(square(0, 0, 10))
    assert shrink_quad(q, 0.0) == q


def test_shrink_square():
    s = shrink_quad(Quad(square(0, 0, 10)), 0.3)
    np.testing.assert_allclose(s.points, [(3, 3), (7, 3), (7, 7), (3, 7)], atol=1e-12)


def test_shrink_rotated_square():
    angle = 0.7
    q = Quad(rotate(square(0, 0, 10), angle, (5, 5)))
    s = shrink_quad(q, 0.3)
    assert s.area == pytest.approx(16.0)
    expected = Quad(rotate([(3, 3), (7, 3), (7, 7), (3, 7)], angle, (5, 5)))
    np.testing.assert_allclose(s.points, expected.points, atol=1e-9)


def test_shrink_rejects_bad_ratio():
    with pytest.raises(InvalidInputError):
        shrink_quad(Quad(UNIT), 0.5)
    with pytest.raises(InvalidInputError):
        shrink_quad(Quad(UNIT), -0.1)


@settings(max_examples=100, deadline=None)
@given(quad_strategy, st.floats(0.01, 0.45))
def test_shrink_contained_and_monotone(q, ratio):
    s = shrink_quad(q, ratio)
    assert s.area < q.area
    from oracles import half_plane_inside

    assert half_plane_inside(s.points[:, 0], s.points[:, 1], q.points).all()
    assert shrink_quad(q, ratio / 2).area >= s.area - 1e-9


# -- rotated rectangles ------------------------------------------------------------------


def test_fit_axis_aligned():
    r = fit_rotated_rect(Quad([(2, 3), (12, 3), (12, 7), (2, 7)]))
    assert r.theta == 0.0
    assert (r.width, r.height) == pytest.approx((10, 4))
    assert tuple(r.center) == pytest.approx((7, 5))


def test_fit_rotated_by_03():
    pts = rotate([(0, 0), (10, 0), (10, 4), (0, 4)], 0.3, (5, 2))
    r = fit_rotated_rect(Quad(pts))
    assert r.theta == pytest.approx(0.3, abs=1e-6)
    assert (r.width, r.height) == pytest.approx((10, 4))


def test_fit_is_minimal(rng):
    for _ in range(30):
        q = random_convex_quad(rng, (0, 0), 10)
        r = fit_rotated_rect(q)
        assert r.area >= q.area - 1e-9
        assert r.area <= min_area_rect_sweep(q.points, 4000) + 1e-9
        # oracle over the four edge directions, computed independently
        best = math.inf
        pts = q.points
        for i in range(4):
            e = pts[(i + 1) % 4] - pts[i]
            t = math.atan2(e[1], e[0])
            u = pts @ np.array([math.cos(t), math.sin(t)])
            v = pts @ np.array([-math.sin(t), math.cos(t)])
            best = min(best, (u.max() - u.min()) * (v.max() - v.min()))
        assert r.area == pytest.approx(best, rel=1e-9)
        assert -math.pi / 2 < r.theta <= math.pi / 2
        assert r.width >= r.height


@settings(max_examples=100, deadline=None)
@given(quad_strategy, st.floats(-math.pi, math.pi))
def test_fit_rotation_equivariant(q, angle):
    r0 = fit_rotated_rect(q)
    if abs(r0.width - r0.height) < 1e-3 * r0.width:
        return  # orientation of a square is ambiguous
    r1 = fit_rotated_rect(Quad(rotate(q.points, angle)))
    assert r1.width == pytest.approx(r0.width, abs=1e-4)
    assert r1.height == pytest.approx(r0.height, abs=1e-4)
    diff = (r1.theta - r0.theta - angle) % math.pi
    assert min(diff, math.pi - diff) < 1e-6


# -- RBox ----------------------------------------------------------------------------------


def test_rbox_axis_aligned():
    q = rbox_to_quad(5, 5, RBoxPred(2, 2, 3, 3, 0.0))
    assert q.flat() == [2, 3, 8, 3, 8, 7, 2, 7]


def test_rbox_quarter_turn():
    q0 = rbox_to_quad(5, 5, RBoxPred(2, 2, 3, 3, 0.0))
    q1 = rbox_to_quad(5, 5, RBoxPred(2, 2, 3, 3, math.pi / 2))
    expected = rotate(q0.points, math.pi / 2, (5, 5))
    assert quad_iou(q1, Quad(expected)) == pytest.approx(1.0)
    assert {tuple(np.round(p, 9)) for p in q1.points} == {tuple(np.round(p, 9)) for p in expected}


def test_rbox_theta_zero_is_exact():
    rng = np.random.default_rng(3)
    for _ in range(50):
        px, py = rng.uniform(0, 100, 2)
        t, b, l, r = rng.uniform(0.1, 30, 4)
        q = rbox_to_quad(px, py, RBoxPred(t, b, l, r, 0.0))
        assert q == Quad([(px - l, py - t), (px + r, py - t), (px + r, py + b), (px - l, py + b)])


def test_rbox_degenerate():
    with pytest.raises(DegenerateResultError):
        rbox_to_quad(0, 0, RBoxPred(0, 0, 1, 1, 0))


def test_rbox_roundtrip(rng):
    for _ in range(200):
        w, h = rng.uniform(5, 80), rng.uniform(2, 30)
        rect = RotRect(Point(*rng.uniform(0, 200, 2)), max(w, h), min(w, h), rng.uniform(-1.5, 1.5))
        # random interior point
        lx, ly = rng.uniform(-0.5, 0.5, 2) * (rect.width, rect.height)
        c, s = math.cos(rect.theta), math.sin(rect.theta)
        px = rect.center.x + c * lx - s * ly
        py = rect.center.y + s * lx + c * ly
        d = rbox_distances(px, py, rect)
        assert min(d[:4]) >= 0
        q = rbox_to_quad(px, py, d)
        np.testing.assert_allclose(q.points, rotrect_to_quad(rect).points, atol=1e-4)


def test_rotrect_corners_area():
    r = RotRect(Point(0, 0), 6, 2, 0.4)
    assert shoelace(rotrect_corners(r)) == pytest.approx(12)
