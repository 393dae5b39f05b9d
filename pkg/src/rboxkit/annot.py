"""Annotation parsing, convention normalization and box-list file I/O.

Aerial-imagery datasets annotate rotated boxes in incompatible ways: corner
quadrilaterals, center + size + angle with per-dataset angle ranges and
units, or plain axis-aligned VOC boxes. Everything here funnels into the
canonical corner-pair form with theta in [0, pi).

File formats:

- canonical box CSV, header ``id,x_a,y_a,x_c,y_c,theta`` (theta radians);
- the same fields as a JSON array of objects;
- detections CSV, header ``id,x_a,y_a,x_c,y_c,theta,score,class_id,image_id``;
- ground-truth CSV, header ``id,x_a,y_a,x_c,y_c,theta,class_id,image_id``
  plus an optional trailing ``difficult`` column;
- corner CSV, columns ``x1,y1,x2,y2,x3,y3,x4,y4,class,image`` (header
  optional);
- a JSON mapping file describing any other column layout, with the angle
  unit and declared angle range stated explicitly (never inferred).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .evaluate import Detections, GroundTruths
from .geometry import (
    box_center,
    box_dims,
    box_from_center,
    canonicalize,
    validate_boxes,
)

BOX_FIELDS = ("id", "x_a", "y_a", "x_c", "y_c", "theta")
DET_FIELDS = BOX_FIELDS + ("score", "class_id", "image_id")
GT_FIELDS = BOX_FIELDS + ("class_id", "image_id")

# opposite sides of a corner quadrilateral may differ by this fraction
RECT_SIDE_TOL = 0.02


class AnnotationError(ValueError):
    """Malformed annotation input; carries the offending line when known."""

    def __init__(self, message: str, path=None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


@dataclass
class AnnotationRecord:
    """One annotation, normalized to the canonical box form."""

    box: np.ndarray
    class_id: int | None = None
    image_id: str | None = None
    difficult: bool = False
    record_id: str | None = None
    convention: str = "canonical"
    raw: dict = field(default_factory=dict)


@dataclass(frozen=True)
class MappingSpec:
    """Declared layout of a dataset-specific annotation file."""

    convention: str                      # center_wh_angle | corners | voc
    columns: tuple[str, ...]
    angle_unit: str = "radians"          # radians | degrees
    angle_range: tuple[float, float] | None = None
    has_header: bool = False
    delimiter: str = ","

    def __post_init__(self):
        if self.convention not in ("center_wh_angle", "corners", "voc"):
            raise ValueError(f"unknown convention {self.convention!r}")
        if self.angle_unit not in ("radians", "degrees"):
            raise ValueError(f"unknown angle unit {self.angle_unit!r}")

    @classmethod
    def from_json(cls, text_or_path) -> "MappingSpec":
        try:
            data = json.loads(text_or_path)
        except (json.JSONDecodeError, TypeError):
            with open(text_or_path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        rng = data.get("angle_range")
        return cls(
            convention=data["convention"],
            columns=tuple(data["columns"]),
            angle_unit=data.get("angle_unit", "radians"),
            angle_range=tuple(float(v) for v in rng) if rng is not None else None,
            has_header=bool(data.get("has_header", False)),
            delimiter=data.get("delimiter", ","),
        )


def normalize_voc_box(xmin, ymin, xmax, ymax) -> np.ndarray:
    """A VOC box is already canonical at theta = 0."""
    box = np.array([xmin, ymin, xmax, ymax, 0.0], dtype=np.float64)
    validate_boxes(box)
    return box


def normalize_center_box(cx, cy, width, height, angle) -> np.ndarray:
    """Canonicalize a center + size + angle annotation, keeping side roles."""
    box = box_from_center(float(cx), float(cy), float(width), float(height), float(angle))
    validate_boxes(box)
    return canonicalize(box)


def normalize_corner_quad(corners) -> np.ndarray:
    """Canonical box from four corners given in any cyclic order.

    Opposite sides must agree within 2 percent, or the quad is rejected. The
    labeling is chosen so that AB >= BC (squares take the smaller angle),
    since a bare corner list carries no front/back semantics.
    """
    pts = np.asarray(corners, dtype=np.float64).reshape(-1, 2)
    if pts.shape[0] != 4:
        raise AnnotationError(f"need exactly 4 corner points, got {pts.shape[0]}")
    if not np.all(np.isfinite(pts)):
        raise AnnotationError("corner coordinates must be finite")
    x = pts[:, 0]
    y = pts[:, 1]
    signed = float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)) / 2.0
    if signed == 0.0:
        raise AnnotationError("degenerate corner quadrilateral (zero area)")
    if signed < 0.0:
        pts = pts[::-1].copy()
    sides = np.hypot(*(np.roll(pts, -1, axis=0) - pts).T)
    for a, b in ((0, 2), (1, 3)):
        ref = max(sides[a], sides[b])
        if abs(sides[a] - sides[b]) > RECT_SIDE_TOL * ref:
            raise AnnotationError(
                f"not a rectangle: opposite sides {sides[a]:.4g} and {sides[b]:.4g} "
                f"differ by more than {RECT_SIDE_TOL:.0%}"
            )
    center = pts.mean(axis=0)
    e1 = (pts[1] - pts[0] + pts[2] - pts[3]) / 2.0
    e2 = (pts[3] - pts[0] + pts[2] - pts[1]) / 2.0
    w = float(np.hypot(*e1))
    h = float(np.hypot(*e2))
    theta = math.atan2(e1[1], e1[0])
    box = canonicalize(box_from_center(center[0], center[1], w, h, theta))
    ab, bc = box_dims(box)
    if ab < bc or (ab == bc and box[4] >= math.pi / 2.0):
        cx, cy = box_center(box)
        box = canonicalize(box_from_center(cx, cy, bc, ab, box[4] + math.pi / 2.0))
    return box


def normalize_annotation(
    fields,
    convention: str,
    angle_unit: str = "radians",
    angle_range: tuple[float, float] | None = None,
) -> np.ndarray:
    """Normalize one annotation to the canonical box under its convention.

    ``fields`` is the numeric payload of the record: 8 corner coordinates for
    ``corners``, (cx, cy, w, h, angle) for ``center_wh_angle``, or
    (xmin, ymin, xmax, ymax) for ``voc``. The angle unit and the declared
    angle range are trusted as given; an out-of-range angle is rejected.
    """
    vals = [float(v) for v in np.asarray(fields, dtype=np.float64).reshape(-1)]
    if convention == "corners":
        if len(vals) != 8:
            raise AnnotationError(f"corner records need 8 values, got {len(vals)}")
        return normalize_corner_quad(np.asarray(vals).reshape(4, 2))
    if convention == "voc":
        if len(vals) != 4:
            raise AnnotationError(f"voc records need 4 values, got {len(vals)}")
        return normalize_voc_box(*vals)
    if convention == "center_wh_angle":
        if len(vals) != 5:
            raise AnnotationError(f"center records need 5 values, got {len(vals)}")
        cx, cy, w, h, angle = vals
        if angle_range is not None:
            lo, hi = angle_range
            if not (lo - 1e-9 <= angle <= hi + 1e-9):
                raise AnnotationError(
                    f"angle {angle:g} outside the declared range [{lo:g}, {hi:g}]"
                )
        if angle_unit == "degrees":
            angle = math.radians(angle)
        return normalize_center_box(cx, cy, w, h, angle)
    raise AnnotationError(f"unknown convention {convention!r}")


def _fmt(x) -> str:
    return repr(float(x))


def _parse_float(raw: str, what: str, path, line: int) -> float:
    try:
        return float(raw)
    except ValueError:
        raise AnnotationError(f"bad {what} value {raw!r}", path, line) from None


def _read_rows(path, expected_header: tuple[str, ...], optional: tuple[str, ...] = ()):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            return [], []
        header = [h.strip() for h in header]
        n_req = len(expected_header)
        if tuple(header[:n_req]) != expected_header:
            raise AnnotationError(
                f"expected header {','.join(expected_header)}, got {','.join(header)}", path, 1
            )
        extra = tuple(header[n_req:])
        if tuple(extra) not in {(), *(tuple(optional[: i + 1]) for i in range(len(optional)))}:
            raise AnnotationError(f"unexpected trailing columns {extra}", path, 1)
        return list(reader), extra


def load_boxes(path, fmt: str = "auto") -> tuple[list[str], np.ndarray]:
    """Load a canonical box list (CSV or JSON). Returns (ids, (N, 5) boxes)."""
    fmt = _resolve_format(path, fmt)
    ids: list[str] = []
    rows: list[list[float]] = []
    if fmt == "json":
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, list):
            raise AnnotationError("JSON box list must be an array", path)
        for i, obj in enumerate(data):
            ids.append(str(obj["id"]))
            rows.append([float(obj[k]) for k in BOX_FIELDS[1:]])
    else:
        raw, _ = _read_rows(path, BOX_FIELDS)
        for ln, cells in enumerate(raw, start=2):
            if not cells:
                continue
            if len(cells) != len(BOX_FIELDS):
                raise AnnotationError(f"expected {len(BOX_FIELDS)} columns, got {len(cells)}", path, ln)
            ids.append(cells[0])
            rows.append([_parse_float(c, name, path, ln) for c, name in zip(cells[1:], BOX_FIELDS[1:])])
    boxes = np.asarray(rows, dtype=np.float64).reshape(-1, 5)
    if boxes.shape[0]:
        validate_boxes(boxes)
    return ids, boxes


def save_boxes(path, boxes, ids=None, fmt: str = "auto") -> None:
    """Write a canonical box list (CSV or JSON); floats keep full precision."""
    fmt = _resolve_format(path, fmt)
    rows = np.atleast_2d(np.asarray(boxes, dtype=np.float64))
    if ids is None:
        ids = [str(i) for i in range(rows.shape[0])]
    if fmt == "json":
        payload = [
            {"id": str(i), **{k: float(v) for k, v in zip(BOX_FIELDS[1:], row)}}
            for i, row in zip(ids, rows)
        ]
        Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(BOX_FIELDS) + "\n")
        for i, row in zip(ids, rows):
            fh.write(",".join([str(i)] + [_fmt(v) for v in row]) + "\n")


def _resolve_format(path, fmt: str) -> str:
    if fmt != "auto":
        if fmt not in ("csv", "json"):
            raise AnnotationError(f"unknown format {fmt!r}", path)
        return fmt
    return "json" if str(path).endswith(".json") else "csv"


def load_detections(path) -> Detections:
    """Load the detections CSV (id, box, score, class_id, image_id)."""
    raw, _ = _read_rows(path, DET_FIELDS)
    ids, boxes, scores, classes, images = [], [], [], [], []
    for ln, cells in enumerate(raw, start=2):
        if not cells:
            continue
        if len(cells) != len(DET_FIELDS):
            raise AnnotationError(f"expected {len(DET_FIELDS)} columns, got {len(cells)}", path, ln)
        ids.append(cells[0])
        boxes.append([_parse_float(c, n, path, ln) for c, n in zip(cells[1:6], DET_FIELDS[1:6])])
        scores.append(_parse_float(cells[6], "score", path, ln))
        try:
            classes.append(int(cells[7]))
        except ValueError:
            raise AnnotationError(f"bad class_id {cells[7]!r}", path, ln) from None
        images.append(cells[8])
    return Detections(
        boxes=np.asarray(boxes, dtype=np.float64).reshape(-1, 5),
        scores=np.asarray(scores, dtype=np.float64),
        class_ids=np.asarray(classes, dtype=np.int64),
        image_ids=np.asarray(images, dtype=object),
        ids=np.asarray(ids, dtype=object),
    )


def save_detections(path, dets: Detections) -> None:
    ids = dets.ids if dets.ids is not None else [str(i) for i in range(len(dets))]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(DET_FIELDS) + "\n")
        for i in range(len(dets)):
            cells = [str(ids[i])] + [_fmt(v) for v in dets.boxes[i]]
            cells += [_fmt(dets.scores[i]), str(int(dets.class_ids[i])), str(dets.image_ids[i])]
            fh.write(",".join(cells) + "\n")


def load_ground_truths(path) -> GroundTruths:
    """Load the ground-truth CSV; a trailing ``difficult`` column is honored."""
    raw, extra = _read_rows(path, GT_FIELDS, optional=("difficult",))
    has_difficult = "difficult" in extra
    ids, boxes, classes, images, difficult = [], [], [], [], []
    want = len(GT_FIELDS) + (1 if has_difficult else 0)
    for ln, cells in enumerate(raw, start=2):
        if not cells:
            continue
        if len(cells) != want:
            raise AnnotationError(f"expected {want} columns, got {len(cells)}", path, ln)
        ids.append(cells[0])
        boxes.append([_parse_float(c, n, path, ln) for c, n in zip(cells[1:6], GT_FIELDS[1:6])])
        try:
            classes.append(int(cells[6]))
        except ValueError:
            raise AnnotationError(f"bad class_id {cells[6]!r}", path, ln) from None
        images.append(cells[7])
        difficult.append(_parse_bool(cells[8], path, ln) if has_difficult else False)
    return GroundTruths(
        boxes=np.asarray(boxes, dtype=np.float64).reshape(-1, 5),
        class_ids=np.asarray(classes, dtype=np.int64),
        image_ids=np.asarray(images, dtype=object),
        difficult=np.asarray(difficult, dtype=bool),
        ids=np.asarray(ids, dtype=object),
    )


def save_ground_truths(path, gts: GroundTruths) -> None:
    ids = gts.ids if gts.ids is not None else [str(i) for i in range(len(gts))]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(GT_FIELDS + ("difficult",)) + "\n")
        for i in range(len(gts)):
            cells = [str(ids[i])] + [_fmt(v) for v in gts.boxes[i]]
            cells += [str(int(gts.class_ids[i])), str(gts.image_ids[i]), str(int(gts.difficult[i]))]
            fh.write(",".join(cells) + "\n")


def _parse_bool(raw: str, path, line: int) -> bool:
    val = raw.strip().lower()
    if val in ("1", "true", "yes"):
        return True
    if val in ("0", "false", "no", ""):
        return False
    raise AnnotationError(f"bad difficult flag {raw!r}", path, line)


def load_corner_annotations(path, strict: bool = True):
    """Load the corner CSV (x1,y1,...,x4,y4,class,image); header optional.

    Returns a list of :class:`AnnotationRecord`. In strict mode the first
    malformed line aborts with its line number; in lenient mode malformed
    lines are skipped and returned as ``(records, errors)``.
    """
    mapping = MappingSpec(
        convention="corners",
        columns=("x1", "y1", "x2", "y2", "x3", "y3", "x4", "y4", "class_id", "image_id"),
        has_header=False,
    )
    return load_annotations(path, mapping, strict=strict)


def load_annotations(path, mapping: MappingSpec, strict: bool = True):
    """Parse an arbitrary-layout annotation file described by ``mapping``.

    Column names ``x1..y4`` / ``cx, cy, w, h, angle`` / ``xmin..ymax`` select
    the convention payload; ``id``, ``class_id``, ``image_id``, ``difficult``
    are picked up when present; ``_`` skips a column.
    """
    if not isinstance(mapping, MappingSpec):
        mapping = MappingSpec.from_json(mapping)
    payload_cols = {
        "corners": ("x1", "y1", "x2", "y2", "x3", "y3", "x4", "y4"),
        "center_wh_angle": ("cx", "cy", "w", "h", "angle"),
        "voc": ("xmin", "ymin", "xmax", "ymax"),
    }[mapping.convention]
    col_index = {name: i for i, name in enumerate(mapping.columns)}
    missing = [c for c in payload_cols if c not in col_index]
    if missing:
        raise AnnotationError(f"mapping lacks required columns {missing}", path)
    records: list[AnnotationRecord] = []
    errors: list[tuple[int, str]] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter=mapping.delimiter)
        start = 1
        if mapping.has_header:
            next(reader, None)
            start = 2
        for ln, cells in enumerate(reader, start=start):
            if not cells or all(not c.strip() for c in cells):
                continue
            try:
                if len(cells) != len(mapping.columns):
                    raise AnnotationError(
                        f"expected {len(mapping.columns)} columns, got {len(cells)}", path, ln
                    )
                vals = [
                    _parse_float(cells[col_index[c]], c, path, ln) for c in payload_cols
                ]
                box = normalize_annotation(
                    vals, mapping.convention, mapping.angle_unit, mapping.angle_range
                )
                records.append(
                    AnnotationRecord(
                        box=box,
                        class_id=int(cells[col_index["class_id"]]) if "class_id" in col_index else None,
                        image_id=cells[col_index["image_id"]] if "image_id" in col_index else None,
                        difficult=_parse_bool(cells[col_index["difficult"]], path, ln)
                        if "difficult" in col_index
                        else False,
                        record_id=cells[col_index["id"]] if "id" in col_index else str(ln),
                        convention=mapping.convention,
                        raw={name: cells[col_index[name]] for name in mapping.columns if name != "_"},
                    )
                )
            except (AnnotationError, ValueError) as exc:
                if strict:
                    if not isinstance(exc, AnnotationError) or exc.line is None:
                        raise AnnotationError(str(exc), path, ln) from exc
                    raise
                errors.append((ln, str(exc)))
    if strict:
        return records
    return records, errors
