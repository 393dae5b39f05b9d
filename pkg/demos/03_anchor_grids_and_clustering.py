"""Rotated anchor grids, ground-truth matching, and shape clustering.

The region-proposal stage tiles every grid cell with anchors at several
sizes, aspect ratios and a fan of angles spanning [0, pi). A dense
configuration (2 sizes x 2 ratios x 9 angles = 36 anchors per cell) covers
orientation space without biasing toward any dominant direction.
"""

import numpy as np

from rboxkit import (
    AnchorGridSpec,
    box_from_center,
    generate_anchors,
    kmeans_anchors,
    match_anchors,
    shape_distance_matrix,
)

spec = AnchorGridSpec(
    image_size=(1024, 1024),
    stride=16.0,
    sizes=(32.0, 64.0),
    aspect_ratios=(0.5, 1.0),
    num_angles=9,
)
anchors = generate_anchors(spec)
print("grid", spec.grid_shape, "->", anchors.shape[0], "anchors",
      f"({spec.anchors_per_cell} per cell)")
print("angle fan:", np.round(np.unique(anchors[:, 4]), 4))

# matching labels anchors positive / negative / ignore against ground truth
rng = np.random.default_rng(1)
gts = box_from_center(
    rng.uniform(100, 900, 20), rng.uniform(100, 900, 20),
    rng.uniform(24, 80, 20), rng.uniform(16, 48, 20),
    rng.uniform(0, np.pi, 20),
)
matches = match_anchors(anchors, gts, pos_thresh=0.7, neg_thresh=0.3)
print("\npositives:", int((matches.labels == 1).sum()),
      "negatives:", int((matches.labels == 0).sum()),
      "ignored:", int((matches.labels == -1).sum()))
print("best anchor IoU overall:", round(float(matches.max_ious.max()), 4))

# anchor-shape clustering: reduce ground-truth boxes to centered,
# angle-normalized shapes and run k-means++ under the 1 - IoU distance
wide = box_from_center(0, 0, rng.normal(60, 3, 40).clip(40, 80), rng.normal(24, 2, 40).clip(16, 32), 0)
small = box_from_center(0, 0, rng.normal(20, 1.5, 40).clip(14, 26), rng.normal(10, 1, 40).clip(7, 13), 0)
shapes = kmeans_anchors(np.vstack([wide, small]), k=2, seed=0)
print("\nclustered anchor shapes (AB, BC):\n", np.round(shapes, 2))

d = shape_distance_matrix(shapes, shapes)
print("distance between the two shapes:", round(float(d[0, 1]), 4))
