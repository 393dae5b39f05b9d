"""Rotated boxes, their corners, and exact IoU.

A box is (x_a, y_a, x_c, y_c, theta): two opposite corners plus the angle of
edge AB, clockwise on screen (y grows down). At theta = 0 the tuple is a
plain VOC box.
"""

import math

import numpy as np

from rboxkit import (
    box_corners,
    box_dims,
    box_from_center,
    canonicalize,
    clip_polygon,
    iou_matrix,
    polygon_area,
    rotated_iou,
)

# an axis-aligned 4 x 2 box, then the same rectangle tilted by 30 degrees
flat = np.array([0.0, 0.0, 4.0, 2.0, 0.0])
tilted = box_from_center(2.0, 1.0, 4.0, 2.0, math.pi / 6)

print("flat  dims:", box_dims(flat))
print("tilted dims:", box_dims(tilted))
print("tilted corners:\n", np.round(box_corners(tilted), 3))

# the IoU is computed exactly: clip one rectangle with the edges of the
# other, then take the shoelace area of the intersection polygon
print("\nIoU(flat, tilted) =", rotated_iou(flat, tilted))

inter = clip_polygon(box_corners(flat), box_corners(tilted))
print("intersection polygon has", len(inter), "vertices, area", round(polygon_area(inter), 6))

# the classic sanity fixture: a unit square against itself rotated 45
# degrees about its center gives IoU = sqrt(2)/2 exactly
square = np.array([0.0, 0.0, 1.0, 1.0, 0.0])
spun = box_from_center(0.5, 0.5, 1.0, 1.0, math.pi / 4)
print("\n45-degree fixture:", rotated_iou(square, spun), "vs sqrt(2)/2 =", math.sqrt(2) / 2)

# batch form: (N, 5) x (M, 5) -> (N, M), parallel inside, deterministic out
rng = np.random.default_rng(0)
n = 400
boxes_a = box_from_center(rng.uniform(0, 100, n), rng.uniform(0, 100, n),
                          rng.uniform(5, 25, n), rng.uniform(5, 25, n),
                          rng.uniform(0, 2 * np.pi, n))
boxes_b = boxes_a + np.array([3.0, -2.0, 3.0, -2.0, 0.1])
m = iou_matrix(boxes_a, boxes_b)
print("\nmatrix shape", m.shape, "mean diagonal IoU", round(float(np.diag(m).mean()), 4))

# rectangles are pi-periodic: canonicalize brings theta into [0, pi) by
# swapping the stored corner pair, without moving the rectangle
upside_down = box_from_center(2.0, 1.0, 4.0, 2.0, math.pi / 6 + math.pi)
print("\ncanonical twin of the pi-shifted box:", np.round(canonicalize(upside_down), 6))
print("IoU with the original tilted box:", rotated_iou(canonicalize(upside_down), tilted))
