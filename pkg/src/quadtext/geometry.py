"""
Planar geometry for convex quadrilaterals in image coordinates.

Image coordinates have ``y`` pointing down, so a polygon listed clockwise on
screen has a *positive* shoelace sum. Every :class:`Quad` is stored in that
orientation, starting from the vertex with the smallest ``(y, x)``.

The scalar functions (:func:`clip_convex`, :func:`quad_iou`) are exact
Sutherland-Hodgman implementations on Python floats. The ``*_many`` helpers
are vectorized numpy equivalents used by the hot loops (NMS, target
generation).
"""
from __future__ import annotations

import math
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DegenerateResultError, InvalidInputError

#: vertex classification tolerance for clipping and point-in-polygon tests
CLIP_TOL = 1e-7


class Point(NamedTuple):
    x: float
    y: float


class AARect(NamedTuple):
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    @property
    def area(self) -> float:
        return self.width * self.height


class RotRect(NamedTuple):
    """Rectangle of size ``width x height`` rotated by ``theta`` about ``center``.

    ``width`` runs along ``(cos theta, sin theta)``. Fitted rectangles always
    put the longer side on that axis.
    """

    center: Point
    width: float
    height: float
    theta: float

    @property
    def area(self) -> float:
        return self.width * self.height


class RBoxPred(NamedTuple):
    d_top: float
    d_bottom: float
    d_left: float
    d_right: float
    theta: float


_NEXT = np.array([1, 2, 3, 0])
_PAIRS = np.triu_indices(4, 1)


def _signed_area2(pts: np.ndarray) -> float:
    x, y = pts[:, 0], pts[:, 1]
    return float(np.dot(x, y[_NEXT]) - np.dot(x[_NEXT], y))


def canonical_quad_points(points) -> np.ndarray:
    """Validate four vertices and return them in canonical order.

    Raises InvalidInputError for non-finite, repeated, self-intersecting,
    non-convex or zero-area input.
    """
    pts = np.array(points, dtype=np.float64)
    if pts.size != 8:
        raise InvalidInputError(f"a quad needs 4 vertices, got {pts.size / 2:g}")
    pts = pts.reshape(4, 2)
    if not np.all(np.isfinite(pts)):
        raise InvalidInputError("quad vertices must be finite")
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])[_PAIRS]
    if dist.min() <= CLIP_TOL:
        raise InvalidInputError("quad has repeated vertices")
    area2 = _signed_area2(pts)
    if area2 < 0:
        pts = pts[::-1].copy()
        area2 = -area2
    scale = float(np.abs(pts - pts.mean(axis=0)).max())
    if area2 <= 1e-12 * max(scale * scale, 1.0):
        raise InvalidInputError("quad has zero area")
    edges = pts[_NEXT] - pts
    nxt = edges[_NEXT]
    cross = edges[:, 0] * nxt[:, 1] - edges[:, 1] * nxt[:, 0]
    lens = np.hypot(edges[:, 0], edges[:, 1]) * np.hypot(nxt[:, 0], nxt[:, 1])
    if np.any(cross < -1e-9 * lens):
        raise InvalidInputError("quad is not convex (or is self-intersecting)")
    start = int(np.lexsort((pts[:, 0], pts[:, 1]))[0])
    return pts[(np.arange(4) + start) % 4]


class Quad:
    """Convex quadrilateral, canonicalized on construction.

    Accepts anything reshapeable to ``(4, 2)``: four points, or eight flat
    coordinates.
    """

    __slots__ = ("_pts",)

    def __init__(self, points):
        pts = canonical_quad_points(points)
        pts.flags.writeable = False
        self._pts = pts

    @classmethod
    def from_rect(cls, rect: AARect) -> "Quad":
        x0, y0, x1, y1 = rect
        return cls([(x0, y0), (x1, y0), (x1, y1), (x0, y1)])

    @property
    def points(self) -> np.ndarray:
        """Read-only ``(4, 2)`` float64 array."""
        return self._pts

    @property
    def vertices(self) -> tuple[Point, ...]:
        return tuple(Point(float(x), float(y)) for x, y in self._pts)

    def flat(self) -> list[float]:
        return [float(v) for v in self._pts.ravel()]

    @property
    def area(self) -> float:
        return 0.5 * _signed_area2(self._pts)

    def __iter__(self):
        return iter(self.vertices)

    def __len__(self):
        return 4

    def __eq__(self, other):
        if not isinstance(other, Quad):
            return NotImplemented
        return bool(np.array_equal(self._pts, other._pts))

    def __hash__(self):
        return hash(self._pts.tobytes())

    def __repr__(self):
        coords = ", ".join(f"({x:g}, {y:g})" for x, y in self._pts)
        return f"Quad({coords})"


def as_quad(q) -> Quad:
    return q if isinstance(q, Quad) else Quad(q)


def polygon_area(poly: Sequence) -> float:
    """Absolute shoelace area of a simple polygon."""
    if len(poly) < 3:
        raise InvalidInputError("a polygon needs at least 3 vertices")
    s = 0.0
    n = len(poly)
    for i in range(n):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % n]
        s += x0 * y1 - x1 * y0
    return abs(s) * 0.5


def clip_convex(subject, clip) -> list[Point]:
    """Intersection of two convex quads by Sutherland-Hodgman clipping.

    Returns the (clockwise) intersection polygon, or ``[]`` when the quads
    do not overlap in a region of positive area. Points on a clip edge count
    as inside.
    """
    subject = as_quad(subject)
    clip = as_quad(clip)
    output = [(float(x), float(y)) for x, y in subject.points]
    cpts = [(float(x), float(y)) for x, y in clip.points]

    for k in range(4):
        if not output:
            break
        ax, ay = cpts[k]
        bx, by = cpts[(k + 1) % 4]
        ex, ey = bx - ax, by - ay
        tol = CLIP_TOL * math.hypot(ex, ey)

        def side(p):
            return ex * (p[1] - ay) - ey * (p[0] - ax)

        inp = output
        output = []
        prev = inp[-1]
        sp = side(prev)
        for cur in inp:
            sc = side(cur)
            if sc >= -tol:
                if sp < -tol:
                    output.append(_cut(prev, cur, sp, sc))
                output.append(cur)
            elif sp >= -tol:
                output.append(_cut(prev, cur, sp, sc))
            prev, sp = cur, sc

    if len(output) < 3:
        return []
    return [Point(*p) for p in output]


def _cut(p, q, sp, sq):
    t = sp / (sp - sq)
    return (p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]))


def quad_iou(a, b) -> float:
    a = as_quad(a)
    b = as_quad(b)
    inter_poly = clip_convex(a, b)
    inter = polygon_area(inter_poly) if inter_poly else 0.0
    # same summation for all three areas, so identical quads give exactly 1
    union = polygon_area(a.points.tolist()) + polygon_area(b.points.tolist()) - inter
    if union <= 0.0:
        return 0.0
    return min(max(inter / union, 0.0), 1.0)


def aarect_iou(a: AARect, b: AARect) -> float:
    iw = min(a[2], b[2]) - max(a[0], b[0])
    ih = min(a[3], b[3]) - max(a[1], b[1])
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    if union <= 0:
        return 0.0
    return inter / union


def mbr(q) -> AARect:
    """Axis-aligned bounding rectangle of a quad."""
    pts = as_quad(q).points
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    return AARect(float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))


def shrink_quad(q, ratio: float = 0.3) -> Quad:
    """Pull every vertex inward along both of its edges.

    Vertex ``i`` moves ``ratio * r_i`` along each adjacent edge, where
    ``r_i`` is the shorter of those two edges. The pair of opposite edges
    with the larger total length is processed first (EAST ordering).
    """
    if not 0.0 <= ratio < 0.5:
        raise InvalidInputError(f"shrink ratio must be in [0, 0.5), got {ratio}")
    q = as_quad(q)
    if ratio == 0.0:
        return q
    p = q.points.copy()
    edge_len = [math.hypot(*(p[(i + 1) % 4] - p[i])) for i in range(4)]
    r = [min(edge_len[i - 1], edge_len[i]) for i in range(4)]

    first = [(0, 1), (2, 3)]
    second = [(3, 0), (1, 2)]
    if edge_len[0] + edge_len[2] < edge_len[1] + edge_len[3]:
        first, second = second, first
    for i, j in first + second:
        d = p[j] - p[i]
        n = math.hypot(*d)
        if n <= 0:
            raise DegenerateResultError("shrinking collapsed an edge")
        u = d / n
        p[i] = p[i] + ratio * r[i] * u
        p[j] = p[j] - ratio * r[j] * u
    try:
        return Quad(p)
    except InvalidInputError as exc:
        raise DegenerateResultError(f"shrunk quad is degenerate: {exc}") from None


def _normalize_theta(theta: float) -> float:
    """Map an undirected axis angle into (-pi/2, pi/2]."""
    t = math.fmod(theta, math.pi)
    if t <= -math.pi / 2:
        t += math.pi
    elif t > math.pi / 2:
        t -= math.pi
    return t


def fit_rotated_rect(q) -> RotRect:
    """Minimum-area enclosing rectangle via rotating calipers.

    For a convex quad the hull is the quad itself, so one side of the optimum
    is collinear with one of its four edges. The returned rectangle has
    ``width >= height``; ``theta`` is the direction of the long side.
    """
    pts = as_quad(q).points
    best = None
    for i in range(4):
        e = pts[(i + 1) % 4] - pts[i]
        n = math.hypot(*e)
        if n <= 0:
            raise InvalidInputError("degenerate quad edge")
        u = e / n
        v = np.array([-u[1], u[0]])
        a = pts @ u
        b = pts @ v
        area = (a.max() - a.min()) * (b.max() - b.min())
        if best is None or area < best[0] * (1 - 1e-12):
            best = (area, u, v, a, b)
    area, u, v, a, b = best
    if area <= 0:
        raise InvalidInputError("degenerate quad")
    span_u = float(a.max() - a.min())
    span_v = float(b.max() - b.min())
    mid_u = 0.5 * float(a.max() + a.min())
    mid_v = 0.5 * float(b.max() + b.min())
    center = mid_u * u + mid_v * v

    theta_u = _normalize_theta(math.atan2(u[1], u[0]))
    theta_v = _normalize_theta(math.atan2(v[1], v[0]))
    if abs(span_u - span_v) <= 1e-9 * max(span_u, span_v):
        # square: prefer the axis closest to horizontal
        theta = theta_u if abs(theta_u) <= abs(theta_v) else theta_v
        width = height = max(span_u, span_v)
    elif span_u > span_v:
        theta, width, height = theta_u, span_u, span_v
    else:
        theta, width, height = theta_v, span_v, span_u
    return RotRect(Point(float(center[0]), float(center[1])), width, height, theta)


def rotrect_corners(r: RotRect) -> np.ndarray:
    """``(4, 2)`` corners (unordered clockwise) of a rotated rectangle."""
    c, s = math.cos(r.theta), math.sin(r.theta)
    hw, hh = r.width / 2, r.height / 2
    local = np.array([(-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh)])
    rot = np.array([[c, -s], [s, c]])
    return local @ rot.T + np.array(r.center)


def rotrect_to_quad(r: RotRect) -> Quad:
    return Quad(rotrect_corners(r))


def rbox_distances(px: float, py: float, r: RotRect) -> RBoxPred:
    """Distances from ``(px, py)`` to the four sides of ``r``, in its own frame."""
    c, s = math.cos(r.theta), math.sin(r.theta)
    dx, dy = px - r.center.x, py - r.center.y
    lx = c * dx + s * dy
    ly = -s * dx + c * dy
    return RBoxPred(
        d_top=r.height / 2 + ly,
        d_bottom=r.height / 2 - ly,
        d_left=r.width / 2 + lx,
        d_right=r.width / 2 - lx,
        theta=r.theta,
    )


def rbox_corners(px, py, d_top, d_bottom, d_left, d_right, theta) -> np.ndarray:
    """Vectorized RBox decode: returns ``(..., 4, 2)`` corner arrays."""
    px, py, t, b, l, r, th = np.broadcast_arrays(
        *(np.asarray(v, dtype=np.float64) for v in (px, py, d_top, d_bottom, d_left, d_right, theta))
    )
    c, s = np.cos(th), np.sin(th)
    lx = np.stack([-l, r, r, -l], axis=-1)
    ly = np.stack([-t, -t, b, b], axis=-1)
    x = px[..., None] + c[..., None] * lx - s[..., None] * ly
    y = py[..., None] + s[..., None] * lx + c[..., None] * ly
    return np.stack([x, y], axis=-1)


def rbox_to_quad(px: float, py: float, r: RBoxPred) -> Quad:
    """Decode one pixel's RBox prediction into a quad."""
    t, b, l, rr, theta = r
    if t + b <= 0 or l + rr <= 0:
        raise DegenerateResultError("RBox has zero width or height")
    if theta == 0:
        corners = [(px - l, py - t), (px + rr, py - t), (px + rr, py + b), (px - l, py + b)]
    else:
        corners = rbox_corners(px, py, t, b, l, rr, theta)
    try:
        return Quad(corners)
    except InvalidInputError as exc:
        raise DegenerateResultError(str(exc)) from None


# ---------------------------------------------------------------------------
# vectorized helpers


def quads_to_array(quads) -> np.ndarray:
    if len(quads) == 0:
        return np.zeros((0, 4, 2))
    return np.stack([as_quad(q).points for q in quads])


def mbr_many(pts: np.ndarray) -> np.ndarray:
    """``(N, 4, 2)`` quads -> ``(N, 4)`` rects ``xmin, ymin, xmax, ymax``."""
    pts = np.asarray(pts, dtype=np.float64)
    return np.concatenate([pts.min(axis=1), pts.max(axis=1)], axis=1)


def aarect_iou_one_to_many(rect, rects: np.ndarray) -> np.ndarray:
    rects = np.asarray(rects, dtype=np.float64).reshape(-1, 4)
    iw = np.minimum(rect[2], rects[:, 2]) - np.maximum(rect[0], rects[:, 0])
    ih = np.minimum(rect[3], rects[:, 3]) - np.maximum(rect[1], rects[:, 1])
    inter = np.where((iw > 0) & (ih > 0), iw * ih, 0.0)
    area_a = (rect[2] - rect[0]) * (rect[3] - rect[1])
    area_b = (rects[:, 2] - rects[:, 0]) * (rects[:, 3] - rects[:, 1])
    union = area_a + area_b - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        iou = np.where(union > 0, inter / union, 0.0)
    return iou


def points_in_convex(points: np.ndarray, quad_pts: np.ndarray, tol: float = CLIP_TOL) -> np.ndarray:
    """Boolean mask of ``points`` (``(..., 2)``) inside a canonical convex quad.

    Boundary points (within ``tol`` pixels) count as inside.
    """
    points = np.asarray(points, dtype=np.float64)
    inside = np.ones(points.shape[:-1], dtype=bool)
    for k in range(4):
        a = quad_pts[k]
        b = quad_pts[(k + 1) % 4]
        ex, ey = b[0] - a[0], b[1] - a[1]
        side = ex * (points[..., 1] - a[1]) - ey * (points[..., 0] - a[0])
        inside &= side >= -tol * math.hypot(ex, ey)
    return inside


def _inside_many(points: np.ndarray, polys: np.ndarray) -> np.ndarray:
    """``points (N, P, 2)`` vs ``polys (N, 4, 2)`` -> ``(N, P)`` inside mask."""
    inside = np.ones(points.shape[:2], dtype=bool)
    for k in range(4):
        a = polys[:, k, None, :]
        e = polys[:, (k + 1) % 4, None, :] - a
        side = e[..., 0] * (points[..., 1] - a[..., 1]) - e[..., 1] * (points[..., 0] - a[..., 0])
        inside &= side >= -CLIP_TOL * np.hypot(e[..., 0], e[..., 1])
    return inside


def convex_intersection_area_many(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Intersection areas of quads ``a`` and ``b`` (both ``(N, 4, 2)``, canonical).

    Collects every vertex of one quad inside the other plus every edge/edge
    crossing, orders them by angle about their centroid and applies the
    shoelace formula. Works on fixed-size arrays so it vectorizes over N.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n = a.shape[0]
    if n == 0:
        return np.zeros(0)

    a_in_b = _inside_many(a, b)
    b_in_a = _inside_many(b, a)

    # edge crossings: a edges (i) x b edges (j) -> (N, 4, 4)
    pa = a[:, :, None, :]
    ra = (np.roll(a, -1, axis=1) - a)[:, :, None, :]
    pb = b[:, None, :, :]
    rb = (np.roll(b, -1, axis=1) - b)[:, None, :, :]
    denom = ra[..., 0] * rb[..., 1] - ra[..., 1] * rb[..., 0]
    qp = pb - pa
    num_t = qp[..., 0] * rb[..., 1] - qp[..., 1] * rb[..., 0]
    num_u = qp[..., 0] * ra[..., 1] - qp[..., 1] * ra[..., 0]
    scale = np.hypot(ra[..., 0], ra[..., 1]) * np.hypot(rb[..., 0], rb[..., 1])
    ok = np.abs(denom) > 1e-12 * scale
    safe = np.where(ok, denom, 1.0)
    t = num_t / safe
    u = num_u / safe
    eps = 1e-12
    cross_ok = ok & (t >= -eps) & (t <= 1 + eps) & (u >= -eps) & (u <= 1 + eps)
    cross_pts = pa + t[..., None] * ra

    pts = np.concatenate([a, b, cross_pts.reshape(n, 16, 2)], axis=1)
    valid = np.concatenate([a_in_b, b_in_a, cross_ok.reshape(n, 16)], axis=1)

    count = valid.sum(axis=1)
    w = valid.astype(np.float64)
    centroid = (pts * w[..., None]).sum(axis=1) / np.maximum(count, 1)[:, None]
    rel = pts - centroid[:, None, :]
    ang = np.arctan2(rel[..., 1], rel[..., 0])
    ang = np.where(valid, ang, np.inf)
    order = np.argsort(ang, axis=1, kind="stable")
    spts = np.take_along_axis(pts, order[..., None], axis=1)
    svalid = np.take_along_axis(valid, order, axis=1)
    first = spts[:, :1, :]
    spts = np.where(svalid[..., None], spts, first)
    x, y = spts[..., 0], spts[..., 1]
    area2 = (x * np.roll(y, -1, axis=1) - np.roll(x, -1, axis=1) * y).sum(axis=1)
    area = 0.5 * np.abs(area2)
    return np.where(count >= 3, area, 0.0)


def quad_area_many(pts: np.ndarray) -> np.ndarray:
    x, y = pts[..., 0], pts[..., 1]
    return 0.5 * np.abs((x * np.roll(y, -1, axis=-1) - np.roll(x, -1, axis=-1) * y).sum(axis=-1))


def quad_iou_one_to_many(q, others: np.ndarray) -> np.ndarray:
    """IoU of one quad against ``(N, 4, 2)`` canonical quads."""
    qp = as_quad(q).points if not isinstance(q, np.ndarray) else q
    others = np.asarray(others, dtype=np.float64).reshape(-1, 4, 2)
    if len(others) == 0:
        return np.zeros(0)
    # only pairs whose bounding boxes overlap can intersect
    lo, hi = qp.min(axis=0), qp.max(axis=0)
    olo, ohi = others.min(axis=1), others.max(axis=1)
    near = np.all((olo < hi) & (ohi > lo), axis=1)
    inter = np.zeros(len(others))
    if near.any():
        sub = others[near]
        inter[near] = convex_intersection_area_many(np.broadcast_to(qp, sub.shape), sub)
    union = quad_area_many(qp) + quad_area_many(others) - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        iou = np.where(union > 0, inter / union, 0.0)
    return np.clip(iou, 0.0, 1.0)
