"""Greedy non-maximum suppression over rotated boxes."""

from __future__ import annotations

import numpy as np
from numba import njit, prange

from .geometry import InvalidBoxError, _corners_and_areas, _pair_iou


@njit(cache=True, parallel=True)
def _nms_kernel(corners, areas, aabbs, order, iou_thresh, max_keep):
    n = order.shape[0]
    alive = np.ones(n, dtype=np.bool_)
    keep = np.empty(n, dtype=np.int64)
    nkeep = 0
    for i in range(n):
        if not alive[i]:
            continue
        bi = order[i]
        keep[nkeep] = bi
        nkeep += 1
        if nkeep >= max_keep:
            break
        # candidate IoUs for this row only; each slot is written independently
        # so the outcome does not depend on the thread count
        for j in prange(i + 1, n):
            if alive[j]:
                bj = order[j]
                if not (
                    aabbs[bi, 0] > aabbs[bj, 1]
                    or aabbs[bj, 0] > aabbs[bi, 1]
                    or aabbs[bi, 2] > aabbs[bj, 3]
                    or aabbs[bj, 2] > aabbs[bi, 3]
                ):
                    if _pair_iou(corners[bi], corners[bj], areas[bi], areas[bj]) > iou_thresh:
                        alive[j] = False
    return keep[:nkeep].copy()


def _score_order(scores: np.ndarray) -> np.ndarray:
    # descending score, ties broken by ascending input index
    return np.lexsort((np.arange(scores.shape[0]), -scores))


def rotated_nms(boxes, scores, iou_threshold: float, max_keep: int | None = None) -> np.ndarray:
    """Greedy rotated NMS.

    Detections are visited in descending score order (equal scores: ascending
    input index); a detection is suppressed iff its rotated IoU with an
    already-kept detection is strictly greater than ``iou_threshold``.

    Args:
        boxes: ``(N, 5)`` rotated boxes.
        scores: ``(N,)`` finite scores.
        iou_threshold: suppression threshold in [0, 1].
        max_keep: optional cap on the number of kept detections.

    Returns:
        int64 indices of the kept detections, in descending score order.
    """
    if not 0.0 <= iou_threshold <= 1.0:
        raise ValueError(f"iou_threshold must be in [0, 1], got {iou_threshold}")
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    rows = np.ascontiguousarray(boxes, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != 5:
        raise ValueError(f"expected boxes of shape (N, 5), got {rows.shape}")
    if rows.shape[0] != scores.shape[0]:
        raise ValueError("boxes and scores must have the same length")
    if rows.shape[0] == 0:
        return np.empty(0, dtype=np.int64)
    if not np.all(np.isfinite(scores)):
        bad = int(np.flatnonzero(~np.isfinite(scores))[0])
        raise ValueError(f"detection {bad} has a non-finite score")
    try:
        corners, areas = _corners_and_areas(rows)
    except InvalidBoxError as exc:
        raise InvalidBoxError(f"invalid detection box: {exc}") from exc
    aabbs = np.empty((rows.shape[0], 4), dtype=np.float64)
    aabbs[:, 0] = corners[:, :, 0].min(axis=1)
    aabbs[:, 1] = corners[:, :, 0].max(axis=1)
    aabbs[:, 2] = corners[:, :, 1].min(axis=1)
    aabbs[:, 3] = corners[:, :, 1].max(axis=1)
    order = _score_order(scores)
    cap = rows.shape[0] if max_keep is None else int(max_keep)
    if cap <= 0:
        return np.empty(0, dtype=np.int64)
    return _nms_kernel(corners, areas, aabbs, order, float(iou_threshold), cap)


def batched_nms(
    boxes,
    scores,
    group_ids,
    iou_threshold: float,
    max_keep: int | None = None,
) -> np.ndarray:
    """Rotated NMS applied independently within each group.

    ``group_ids`` is typically the class id or the image id of each
    detection; boxes never suppress boxes from another group. ``max_keep``
    applies per group. The merged result is ordered by descending score
    (ties: ascending input index).
    """
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    groups = np.asarray(group_ids).reshape(-1)
    rows = np.ascontiguousarray(boxes, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] != groups.shape[0]:
        raise ValueError("boxes and group_ids must have the same length")
    if rows.shape[0]:
        _corners_and_areas(rows)  # validate now so errors carry global indices
    kept: list[np.ndarray] = []
    for g in np.unique(groups):
        idx = np.flatnonzero(groups == g)
        sub = rotated_nms(rows[idx], scores[idx], iou_threshold, max_keep)
        kept.append(idx[sub])
    if not kept:
        return np.empty(0, dtype=np.int64)
    merged = np.concatenate(kept)
    return merged[np.lexsort((merged, -scores[merged]))]
