"""Oriented-detection evaluation: matching, 11-point AP and recall at FPPI.

Two hit criteria are provided: the center-in-inscribed-ellipse test used by
the VeDAI benchmark, which only scores the position of the detection center,
and the rotated-IoU threshold test in the Pascal VOC style.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import box_center, box_dims, iou_matrix, rotated_iou, validate_boxes

# recall levels are compared with this slack so an exact-recall operating
# point is not missed to floating-point representation of 0.1 steps
_RECALL_EPS = 1e-9


@dataclass
class Detections:
    """Column-wise batch of scored detections."""

    boxes: np.ndarray
    scores: np.ndarray
    class_ids: np.ndarray
    image_ids: np.ndarray
    ids: np.ndarray | None = None

    def __post_init__(self):
        self.boxes = np.atleast_2d(np.asarray(self.boxes, dtype=np.float64))
        self.scores = np.asarray(self.scores, dtype=np.float64).reshape(-1)
        self.class_ids = np.asarray(self.class_ids, dtype=np.int64).reshape(-1)
        self.image_ids = np.asarray(self.image_ids, dtype=object).reshape(-1)
        n = self.boxes.shape[0]
        if not (self.scores.shape[0] == self.class_ids.shape[0] == self.image_ids.shape[0] == n):
            raise ValueError("detection columns must have equal lengths")
        if n and (not np.all(np.isfinite(self.scores)) or self.scores.min() < 0 or self.scores.max() > 1):
            raise ValueError("scores must be finite and in [0, 1]")
        if n:
            validate_boxes(self.boxes)

    def __len__(self) -> int:
        return self.boxes.shape[0]


@dataclass
class GroundTruths:
    """Column-wise batch of ground-truth boxes."""

    boxes: np.ndarray
    class_ids: np.ndarray
    image_ids: np.ndarray
    difficult: np.ndarray | None = None
    ids: np.ndarray | None = None

    def __post_init__(self):
        self.boxes = np.atleast_2d(np.asarray(self.boxes, dtype=np.float64))
        self.class_ids = np.asarray(self.class_ids, dtype=np.int64).reshape(-1)
        self.image_ids = np.asarray(self.image_ids, dtype=object).reshape(-1)
        n = self.boxes.shape[0]
        if self.difficult is None:
            self.difficult = np.zeros(n, dtype=bool)
        else:
            self.difficult = np.asarray(self.difficult, dtype=bool).reshape(-1)
        if not (self.class_ids.shape[0] == self.image_ids.shape[0] == self.difficult.shape[0] == n):
            raise ValueError("ground-truth columns must have equal lengths")
        if n:
            validate_boxes(self.boxes)

    def __len__(self) -> int:
        return self.boxes.shape[0]


def vedai_hit(det_center, gt_box) -> bool:
    """Center-in-inscribed-ellipse test (boundary inclusive).

    The detection center is moved into the ground-truth frame (translate by
    the gt center, rotate by -theta); it hits when
    ``(u / (W/2))**2 + (v / (H/2))**2 <= 1``.
    """
    c = np.asarray(det_center, dtype=np.float64).reshape(2)
    return bool(_ellipse_values(c[None, :], gt_box)[0] <= 1.0)


def _ellipse_values(centers: np.ndarray, gt_box) -> np.ndarray:
    rows = validate_boxes(gt_box)
    w, h = box_dims(rows)[0]
    gx, gy = box_center(rows)[0]
    theta = float(np.asarray(gt_box, dtype=np.float64).reshape(-1)[4])
    ct, st = math.cos(theta), math.sin(theta)
    dx = centers[:, 0] - gx
    dy = centers[:, 1] - gy
    u = ct * dx + st * dy
    v = -st * dx + ct * dy
    return (u / (w / 2.0)) ** 2 + (v / (h / 2.0)) ** 2


def voc_hit(det_box, gt_box, iou_threshold: float) -> bool:
    """Rotated-IoU threshold test: hit iff IoU >= threshold."""
    if not 0.0 < iou_threshold <= 1.0:
        raise ValueError("iou_threshold must be in (0, 1]")
    return rotated_iou(det_box, gt_box) >= iou_threshold


@dataclass(frozen=True)
class VocCriterion:
    """VOC-style hit: rotated IoU at or above a threshold."""

    iou_threshold: float = 0.5

    @property
    def name(self) -> str:
        return f"voc@{self.iou_threshold:g}"


@dataclass(frozen=True)
class VedaiCriterion:
    """Center-in-ellipse hit; candidate gts are ranked by center distance."""

    @property
    def name(self) -> str:
        return "vedai"


MATCH_TP = 1
MATCH_FP = 0
MATCH_IGNORED = -1


def match_detections(dets: Detections, gts: GroundTruths, criterion) -> np.ndarray:
    """Greedy TP/FP assignment of detections to ground truth.

    Detections are processed in descending score order (ties: input order).
    Each one matches the best unclaimed, non-difficult gt of its class and
    image that passes the criterion: highest IoU for the VOC criterion,
    nearest gt center for the ellipse criterion. A detection whose only
    passing gts are 'difficult' is ignored; anything else unmatched is a FP.

    Returns per-detection labels: 1 TP, 0 FP, -1 ignored.
    """
    n = len(dets)
    labels = np.full(n, MATCH_FP, dtype=np.int8)
    if n == 0:
        return labels
    claimed = np.zeros(len(gts), dtype=bool)
    gt_centers = box_center(gts.boxes) if len(gts) else np.empty((0, 2))
    groups: dict[tuple, np.ndarray] = {}
    if len(gts):
        keys = [(int(c), i) for c, i in zip(gts.class_ids, gts.image_ids)]
        for pos, key in enumerate(keys):
            groups.setdefault(key, []).append(pos)
        groups = {key: np.asarray(v, dtype=np.int64) for key, v in groups.items()}
    det_centers = box_center(dets.boxes)
    order = np.lexsort((np.arange(n), -dets.scores))
    for di in order:
        key = (int(dets.class_ids[di]), dets.image_ids[di])
        cand = groups.get(key)
        if cand is None:
            continue
        if isinstance(criterion, VocCriterion):
            ious = iou_matrix(dets.boxes[di], gts.boxes[cand])[0]
            passing = ious >= criterion.iou_threshold
            quality = ious
        else:
            vals = _gt_frame_ellipse(det_centers[di], gts.boxes[cand])
            passing = vals <= 1.0
            # nearest gt center wins when several ellipses contain the point
            d = gt_centers[cand] - det_centers[di]
            quality = -np.hypot(d[:, 0], d[:, 1])
        if not passing.any():
            continue
        usable = passing & ~claimed[cand] & ~gts.difficult[cand]
        if usable.any():
            local = np.flatnonzero(usable)
            best = local[np.argmax(quality[local])]
            claimed[cand[best]] = True
            labels[di] = MATCH_TP
        elif (passing & gts.difficult[cand]).any():
            labels[di] = MATCH_IGNORED
    return labels


def _gt_frame_ellipse(center: np.ndarray, gt_rows: np.ndarray) -> np.ndarray:
    dims = box_dims(gt_rows)
    ctrs = box_center(gt_rows)
    theta = np.asarray(gt_rows, dtype=np.float64)[:, 4]
    ct = np.cos(theta)
    st = np.sin(theta)
    dx = center[0] - ctrs[:, 0]
    dy = center[1] - ctrs[:, 1]
    u = ct * dx + st * dy
    v = -st * dx + ct * dy
    return (u / (dims[:, 0] / 2.0)) ** 2 + (v / (dims[:, 1] / 2.0)) ** 2


def precision_recall_curve(tp, scores, num_gt: int):
    """Operating points after each distinct score threshold.

    Returns (recalls, precisions, thresholds) arrays; recalls are zero when
    ``num_gt`` is zero.
    """
    tp = np.asarray(tp, dtype=bool).reshape(-1)
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    order = np.lexsort((np.arange(scores.shape[0]), -scores))
    s_sorted = scores[order]
    tp_sorted = tp[order]
    cum_tp = np.cumsum(tp_sorted)
    cum_fp = np.cumsum(~tp_sorted)
    # keep only the last entry of each tied-score run: those are the
    # achievable thresholds
    if s_sorted.shape[0]:
        last = np.flatnonzero(np.r_[s_sorted[1:] != s_sorted[:-1], True])
    else:
        last = np.empty(0, dtype=np.int64)
    thresholds = s_sorted[last]
    tps = cum_tp[last].astype(np.float64)
    fps = cum_fp[last].astype(np.float64)
    recalls = tps / num_gt if num_gt > 0 else np.zeros_like(tps)
    precisions = np.divide(tps, tps + fps, out=np.zeros_like(tps), where=(tps + fps) > 0)
    return recalls, precisions, thresholds


def ap_11point(tp, scores, num_gt: int) -> float:
    """11-point interpolated average precision (recall levels 0, 0.1, ..., 1)."""
    if num_gt < 0:
        raise ValueError("num_gt must be >= 0")
    if num_gt == 0:
        return 0.0
    recalls, precisions, _ = precision_recall_curve(tp, scores, num_gt)
    total = 0.0
    for r in np.linspace(0.0, 1.0, 11):
        mask = recalls >= r - _RECALL_EPS
        total += float(precisions[mask].max()) if mask.any() else 0.0
    return total / 11.0


def recall_at_fppi(tp, scores, num_gt: int, num_images: int, fppi_levels) -> dict[float, float]:
    """Highest recall whose false-positive rate per image stays within budget.

    For each level f the score threshold is swept over all achievable cut
    points; among those with ``FP / num_images <= f`` the best recall is
    reported (0 when even the empty set is the only feasible point).
    """
    if num_images < 1:
        raise ValueError("num_images must be >= 1")
    recalls, _, _ = precision_recall_curve(tp, scores, num_gt)
    tp_arr = np.asarray(tp, dtype=bool).reshape(-1)
    n_dets = tp_arr.shape[0]
    # recompute fp counts on the same cut points
    scores_arr = np.asarray(scores, dtype=np.float64).reshape(-1)
    order = np.lexsort((np.arange(n_dets), -scores_arr))
    s_sorted = scores_arr[order]
    fp_sorted = np.cumsum(~tp_arr[order])
    if n_dets:
        last = np.flatnonzero(np.r_[s_sorted[1:] != s_sorted[:-1], True])
        fps = fp_sorted[last].astype(np.float64)
    else:
        fps = np.empty(0, dtype=np.float64)
    out: dict[float, float] = {}
    for level in fppi_levels:
        budget = float(level) * num_images + 1e-12
        feasible = fps <= budget
        out[float(level)] = float(recalls[feasible].max()) if feasible.any() else 0.0
    return out


@dataclass
class ClassEval:
    """Evaluation summary for one class."""

    ap: float
    num_gt: int
    num_detections: int
    pr_points: list[tuple[float, float, float]]
    recall_at_fppi: dict[float, float]


@dataclass
class EvalReport:
    """Full evaluation report over all annotated classes."""

    criterion: str
    per_class: dict[int, ClassEval]
    mean_ap: float
    num_images: int
    diagnostics: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "criterion": self.criterion,
            "mean_ap": self.mean_ap,
            "num_images": self.num_images,
            "per_class": {
                str(cid): {
                    "ap": ce.ap,
                    "num_gt": ce.num_gt,
                    "num_detections": ce.num_detections,
                    "recall_at_fppi": {f"{lvl:g}": rec for lvl, rec in ce.recall_at_fppi.items()},
                    "pr_points": [list(p) for p in ce.pr_points],
                }
                for cid, ce in self.per_class.items()
            },
            "diagnostics": self.diagnostics,
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_json_dict(), indent=indent, sort_keys=True)

    def to_text_table(self) -> str:
        levels = sorted({lvl for ce in self.per_class.values() for lvl in ce.recall_at_fppi})
        header = ["class", "num_gt", "AP"] + [f"R@{lvl:g}FPPI" for lvl in levels]
        rows = [header]
        for cid in sorted(self.per_class):
            ce = self.per_class[cid]
            rows.append(
                [str(cid), str(ce.num_gt), f"{ce.ap:.4f}"]
                + [f"{ce.recall_at_fppi.get(lvl, 0.0):.4f}" for lvl in levels]
            )
        rows.append(["mean", "", f"{self.mean_ap:.4f}"] + ["" for _ in levels])
        widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
        lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip() for row in rows]
        return "\n".join(lines)


def evaluate(
    dets: Detections,
    gts: GroundTruths,
    criterion,
    fppi_levels=(0.01, 0.1, 1.0),
    num_images: int | None = None,
) -> EvalReport:
    """Match detections, then compute per-class AP and recall at FPPI.

    Classes are those present in the ground truth; detections of any other
    class are excluded from the APs and counted in the diagnostics. The mean
    AP averages over the annotated classes.
    """
    labels = match_detections(dets, gts, criterion)
    classes = sorted(int(c) for c in np.unique(gts.class_ids)) if len(gts) else []
    if num_images is None:
        imgs = set(gts.image_ids.tolist()) | set(dets.image_ids.tolist())
        num_images = max(1, len(imgs))
    per_class: dict[int, ClassEval] = {}
    for cid in classes:
        det_mask = (dets.class_ids == cid) & (labels != MATCH_IGNORED)
        tp = labels[det_mask] == MATCH_TP
        scores = dets.scores[det_mask]
        num_gt = int(((gts.class_ids == cid) & ~gts.difficult).sum())
        recalls, precisions, thresholds = precision_recall_curve(tp, scores, num_gt)
        per_class[cid] = ClassEval(
            ap=ap_11point(tp, scores, num_gt),
            num_gt=num_gt,
            num_detections=int(det_mask.sum()),
            pr_points=[(float(r), float(p), float(t)) for r, p, t in zip(recalls, precisions, thresholds)],
            recall_at_fppi=recall_at_fppi(tp, scores, num_gt, num_images, fppi_levels),
        )
    mean_ap = float(np.mean([ce.ap for ce in per_class.values()])) if per_class else 0.0
    unknown = int(np.sum(~np.isin(dets.class_ids, list(classes)))) if len(dets) else 0
    return EvalReport(
        criterion=criterion.name,
        per_class=per_class,
        mean_ap=mean_ap,
        num_images=num_images,
        diagnostics={"unknown_class_detections": unknown},
    )
