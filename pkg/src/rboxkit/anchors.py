"""Rotated anchor grids, anchor/ground-truth matching and shape clustering."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .geometry import box_dims, box_from_center, iou_matrix

LABEL_POSITIVE = 1
LABEL_NEGATIVE = 0
LABEL_IGNORE = -1


@dataclass(frozen=True)
class AnchorGridSpec:
    """Layout of a rotated anchor grid.

    ``image_size`` is (height, width) in pixels; one cell of ``stride``
    pixels yields ``len(sizes) * len(aspect_ratios) * num_angles`` anchors,
    with angles evenly spanning [0, pi).
    """

    image_size: tuple[int, int]
    stride: float
    sizes: tuple[float, ...]
    aspect_ratios: tuple[float, ...]
    num_angles: int

    def __post_init__(self):
        if self.stride <= 0:
            raise ValueError("stride must be > 0")
        if len(self.image_size) != 2 or any(s <= 0 for s in self.image_size):
            raise ValueError("image_size must be two positive pixel counts")
        if not self.sizes or any(s <= 0 for s in self.sizes):
            raise ValueError("sizes must be positive")
        if not self.aspect_ratios or any(r <= 0 for r in self.aspect_ratios):
            raise ValueError("aspect_ratios must be positive")
        if self.num_angles < 1:
            raise ValueError("num_angles must be >= 1")

    @property
    def grid_shape(self) -> tuple[int, int]:
        h, w = self.image_size
        return math.ceil(h / self.stride), math.ceil(w / self.stride)

    @property
    def anchors_per_cell(self) -> int:
        return len(self.sizes) * len(self.aspect_ratios) * self.num_angles

    @classmethod
    def from_json(cls, text_or_path, image_size=None) -> "AnchorGridSpec":
        try:
            data = json.loads(text_or_path)
        except (json.JSONDecodeError, TypeError):
            with open(text_or_path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        size = image_size if image_size is not None else data.get("image_size")
        if size is None:
            raise ValueError("image_size missing from config and not supplied")
        return cls(
            image_size=tuple(int(v) for v in size),
            stride=float(data["stride"]),
            sizes=tuple(float(v) for v in data["sizes"]),
            aspect_ratios=tuple(float(v) for v in data["ratios"]),
            num_angles=int(data["num_angles"]),
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "image_size": list(self.image_size),
                "stride": self.stride,
                "sizes": list(self.sizes),
                "ratios": list(self.aspect_ratios),
                "num_angles": self.num_angles,
            }
        )


def generate_anchors(spec: AnchorGridSpec) -> np.ndarray:
    """All anchors of the grid, ordered (row, col, size, ratio, angle).

    For size ``s`` and aspect ratio ``r`` (= BC/AB) the anchor sides are
    ``AB = s / sqrt(r)`` and ``BC = s * sqrt(r)``, so the area is ``s**2`` at
    every ratio. Angles are ``k * pi / num_angles``. Anchors may extend past
    the image border; border handling is left to the matcher.
    """
    rows, cols = spec.grid_shape
    cy = (np.arange(rows, dtype=np.float64) + 0.5) * spec.stride
    cx = (np.arange(cols, dtype=np.float64) + 0.5) * spec.stride
    sizes = np.asarray(spec.sizes, dtype=np.float64)
    ratios = np.asarray(spec.aspect_ratios, dtype=np.float64)
    angles = np.arange(spec.num_angles, dtype=np.float64) * (math.pi / spec.num_angles)

    w = sizes[:, None] / np.sqrt(ratios)[None, :]
    h = sizes[:, None] * np.sqrt(ratios)[None, :]

    # broadcast to (rows, cols, sizes, ratios, angles)
    shape = (rows, cols, sizes.size, ratios.size, angles.size)
    out = box_from_center(
        np.broadcast_to(cx[None, :, None, None, None], shape),
        np.broadcast_to(cy[:, None, None, None, None], shape),
        np.broadcast_to(w[None, None, :, :, None], shape),
        np.broadcast_to(h[None, None, :, :, None], shape),
        np.broadcast_to(angles[None, None, None, None, :], shape),
    )
    return out.reshape(-1, 5)


@dataclass
class AnchorMatches:
    """Per-anchor assignment: label, matched gt index (-1 if none), max IoU."""

    labels: np.ndarray      # (N,) int8; 1 positive, 0 negative, -1 ignore
    gt_indices: np.ndarray  # (N,) int64; argmax gt for each anchor
    max_ious: np.ndarray    # (N,) float64


def match_anchors(anchors, gts, pos_thresh: float = 0.7, neg_thresh: float = 0.3) -> AnchorMatches:
    """Assign anchors to ground truth by rotated IoU.

    An anchor is positive when its best IoU reaches ``pos_thresh`` or when it
    is the best anchor for some gt (so every gt with nonzero overlap gets at
    least one positive); negative when its best IoU is below ``neg_thresh``;
    ignored otherwise. With no gts, all anchors are negative.
    """
    if pos_thresh < neg_thresh:
        raise ValueError("pos_thresh must be >= neg_thresh")
    a = np.atleast_2d(np.asarray(anchors, dtype=np.float64))
    g = np.atleast_2d(np.asarray(gts, dtype=np.float64))
    n = a.shape[0]
    if g.shape[0] == 0 or g.size == 0:
        return AnchorMatches(
            labels=np.full(n, LABEL_NEGATIVE, dtype=np.int8),
            gt_indices=np.full(n, -1, dtype=np.int64),
            max_ious=np.zeros(n, dtype=np.float64),
        )
    m = iou_matrix(a, g)
    best = m.max(axis=1)
    best_gt = m.argmax(axis=1)
    labels = np.full(n, LABEL_IGNORE, dtype=np.int8)
    labels[best < neg_thresh] = LABEL_NEGATIVE
    labels[best >= pos_thresh] = LABEL_POSITIVE
    # argmax guarantee: anchors tied with the per-gt maximum become positive
    gt_best = m.max(axis=0)
    forced = (m == gt_best[None, :]) & (gt_best[None, :] > 0.0)
    labels[forced.any(axis=1)] = LABEL_POSITIVE
    gt_idx = np.where(labels == LABEL_POSITIVE, best_gt, -1).astype(np.int64)
    return AnchorMatches(labels=labels, gt_indices=gt_idx, max_ious=best)


def shape_distance_matrix(shapes_a, shapes_b) -> np.ndarray:
    """1 - IoU between (AB, BC) shapes placed concentric and angle-aligned."""
    sa = np.atleast_2d(np.asarray(shapes_a, dtype=np.float64))
    sb = np.atleast_2d(np.asarray(shapes_b, dtype=np.float64))
    boxes_a = box_from_center(0.0, 0.0, sa[:, 0], sa[:, 1], 0.0)
    boxes_b = box_from_center(0.0, 0.0, sb[:, 0], sb[:, 1], 0.0)
    return 1.0 - iou_matrix(boxes_a, boxes_b)


def _pp_seed(shapes: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = shapes.shape[0]
    centroids = np.empty((k, 2), dtype=np.float64)
    centroids[0] = shapes[rng.integers(n)]
    for i in range(1, k):
        d = shape_distance_matrix(shapes, centroids[:i]).min(axis=1)
        weights = d * d
        total = weights.sum()
        if total <= 0.0:
            centroids[i] = shapes[rng.integers(n)]
            continue
        centroids[i] = shapes[rng.choice(n, p=weights / total)]
    return centroids


def kmeans_anchors(
    gts,
    k: int,
    seed: int = 0,
    max_iter: int = 100,
    return_history: bool = False,
):
    """Cluster ground-truth shapes into k anchor shapes (AB, BC).

    Boxes are reduced to their side lengths (angle normalized away, centered
    at the origin) and clustered with k-means++ seeding followed by Lloyd
    iterations under the 1 - IoU distance. Centroids are arithmetic means of
    the member shapes; an empty cluster is re-seeded from the point farthest
    from its centroid. Iteration stops as soon as the total distance stops
    improving, so the objective history is non-increasing. Deterministic for
    a fixed seed.

    Returns ``(k, 2)`` shapes sorted by area, or ``(shapes, history)`` when
    ``return_history`` is set.
    """
    shapes = np.atleast_2d(box_dims(gts))
    n = shapes.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    if n < k:
        raise ValueError(f"need at least k={k} boxes, got {n}")
    rng = np.random.default_rng(seed)
    centroids = _pp_seed(shapes, k, rng)
    history: list[float] = []
    best_centroids = centroids
    best_assign = np.zeros(n, dtype=np.int64)
    prev_assign = None
    for _ in range(max_iter):
        d = shape_distance_matrix(shapes, centroids)
        assign = d.argmin(axis=1)
        obj = float(d[np.arange(n), assign].sum())
        # the mean is not the 1 - IoU minimizer, so an update can regress;
        # stop at the best state seen to keep the objective non-increasing
        if history and obj >= history[-1]:
            break
        history.append(obj)
        best_centroids = centroids
        best_assign = assign
        if prev_assign is not None and np.array_equal(assign, prev_assign):
            break
        prev_assign = assign
        new_centroids = np.empty_like(centroids)
        point_dist = d[np.arange(n), assign].copy()
        for c in range(k):
            members = shapes[assign == c]
            if members.shape[0] == 0:
                far = int(np.argmax(point_dist))
                new_centroids[c] = shapes[far]
                point_dist[far] = -1.0  # keep reseeds distinct
            else:
                new_centroids[c] = members.mean(axis=0)
        centroids = new_centroids
    # the reported shapes are the member means of the final clustering
    result = np.empty((k, 2), dtype=np.float64)
    for c in range(k):
        members = shapes[best_assign == c]
        result[c] = members.mean(axis=0) if members.shape[0] else best_centroids[c]
    order = np.lexsort((result[:, 0], result[:, 0] * result[:, 1]))
    result = result[order]
    if return_history:
        return result, history
    return result
