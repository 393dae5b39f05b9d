"""rboxkit: CPU kernels for rotated-box object detection.

Exact rotated IoU via convex clipping, greedy rotated NMS, anchor grids and
shape clustering, angle-aware regression targets and loss, rotated RoI max
pooling with exact backward, and oriented-detection evaluation metrics.
"""

from .anchors import (
    AnchorGridSpec,
    AnchorMatches,
    generate_anchors,
    kmeans_anchors,
    match_anchors,
    shape_distance_matrix,
)
from .annot import (
    AnnotationError,
    AnnotationRecord,
    MappingSpec,
    load_annotations,
    load_boxes,
    load_corner_annotations,
    load_detections,
    load_ground_truths,
    normalize_annotation,
    normalize_center_box,
    normalize_corner_quad,
    normalize_voc_box,
    save_boxes,
    save_detections,
    save_ground_truths,
)
from .evaluate import (
    Detections,
    EvalReport,
    GroundTruths,
    VedaiCriterion,
    VocCriterion,
    ap_11point,
    evaluate,
    match_detections,
    precision_recall_curve,
    recall_at_fppi,
    vedai_hit,
    voc_hit,
)
from .geometry import (
    InvalidBoxError,
    RotatedBox,
    box_center,
    box_corners,
    box_dims,
    box_from_center,
    canonicalize,
    clip_polygon,
    iou_matrix,
    polygon_area,
    rotated_iou,
    validate_boxes,
)
from .nms import batched_nms, rotated_nms
from .regress import (
    LossConfig,
    angle_delta,
    decode,
    encode,
    rpn_regression_loss,
    smooth_l1,
    smooth_l1_grad,
)
from .roipool import (
    FeatureMap,
    PoolResult,
    load_feature_map,
    rotated_roi_pool,
    rotated_roi_pool_backward,
    save_feature_map,
)
from .threads import get_thread_count, max_thread_count, set_thread_count

__version__ = "0.1.0"

__all__ = [
    "AnchorGridSpec",
    "AnchorMatches",
    "AnnotationError",
    "AnnotationRecord",
    "Detections",
    "EvalReport",
    "FeatureMap",
    "GroundTruths",
    "InvalidBoxError",
    "LossConfig",
    "MappingSpec",
    "PoolResult",
    "RotatedBox",
    "VedaiCriterion",
    "VocCriterion",
    "angle_delta",
    "ap_11point",
    "batched_nms",
    "box_center",
    "box_corners",
    "box_dims",
    "box_from_center",
    "canonicalize",
    "clip_polygon",
    "decode",
    "encode",
    "evaluate",
    "generate_anchors",
    "get_thread_count",
    "iou_matrix",
    "kmeans_anchors",
    "load_annotations",
    "load_boxes",
    "load_corner_annotations",
    "load_detections",
    "load_feature_map",
    "load_ground_truths",
    "match_anchors",
    "match_detections",
    "max_thread_count",
    "normalize_annotation",
    "normalize_center_box",
    "normalize_corner_quad",
    "normalize_voc_box",
    "polygon_area",
    "precision_recall_curve",
    "recall_at_fppi",
    "rotated_iou",
    "rotated_nms",
    "rotated_roi_pool",
    "rotated_roi_pool_backward",
    "rpn_regression_loss",
    "save_boxes",
    "save_detections",
    "save_feature_map",
    "save_ground_truths",
    "set_thread_count",
    "shape_distance_matrix",
    "smooth_l1",
    "smooth_l1_grad",
    "validate_boxes",
    "vedai_hit",
    "voc_hit",
]
