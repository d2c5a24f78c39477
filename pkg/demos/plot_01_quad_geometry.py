"""
Quadrilateral geometry
======================

Convex quads, their overlap, and the rotated rectangles the pixel branch
regresses.
"""

import math

import numpy as np

from quadtext.geometry import Quad, fit_rotated_rect, quad_iou, rotrect_to_quad, shrink_quad

# Two unit squares, the second shifted right by half a side.
a = Quad.from_rect((0, 0, 1, 1))
b = Quad.from_rect((0.5, 0, 1.5, 1))
print("IoU of half-overlapping squares:", quad_iou(a, b))  # 0.5 / 1.5

# %%
# Vertex order does not matter; quads are canonicalized on construction.
c = Quad([(1, 1), (0, 1), (0, 0), (1, 0)])
print("same quad after reordering:", c == a)

# %%
# Shrinking moves every vertex inward along both adjacent edges by 0.3 of
# its shorter neighbouring edge. A 10 x 10 square becomes (3, 3)-(7, 7).
square = Quad.from_rect((0, 0, 10, 10))
print("shrunk square:", shrink_quad(square, 0.3).vertices)

# %%
# An arbitrary convex quad and its minimum-area enclosing rectangle.
q = Quad([(10, 10), (60, 18), (58, 34), (8, 25)])
rect = fit_rotated_rect(q)
print(f"fitted rect: {rect.width:.2f} x {rect.height:.2f} at {math.degrees(rect.theta):.1f} deg")
print("area ratio rect / quad:", rect.area / q.area)
print("IoU(quad, rect):", round(quad_iou(q, rotrect_to_quad(rect)), 4))

# %%
# Rotating both quads leaves the IoU unchanged.
rot = np.array([[math.cos(0.7), -math.sin(0.7)], [math.sin(0.7), math.cos(0.7)]])
print("rotated IoU:", quad_iou(Quad(a.points @ rot.T), Quad(b.points @ rot.T)))
