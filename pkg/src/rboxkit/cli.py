"""Command-line front end: file-in/file-out workflows over the kernels.

Primary results go to stdout (or ``--out``) and are byte-identical for fixed
inputs, seed and flags; timing lines go to stderr. Exit codes: 0 success,
1 input error, 2 internal error.
"""

from __future__ import annotations

import argparse
import json
import statistics
import sys
import time
import traceback

import numpy as np

from . import threads
from .anchors import AnchorGridSpec, generate_anchors, kmeans_anchors
from .annot import (
    AnnotationError,
    load_boxes,
    load_corner_annotations,
    load_annotations,
    load_detections,
    load_ground_truths,
    save_detections,
)
from .evaluate import Detections, GroundTruths, VedaiCriterion, VocCriterion, evaluate
from .geometry import InvalidBoxError, box_from_center, canonicalize, iou_matrix, rotated_iou
from .nms import batched_nms, rotated_nms
from .regress import angle_delta, decode, encode
from .roipool import (
    FeatureMap,
    PoolResult,
    load_feature_map,
    rotated_roi_pool,
    rotated_roi_pool_backward,
    save_feature_map,
)

DELTA_FIELDS = ("id", "dx", "dy", "dlogw", "dlogh", "dtheta")


def _fmt(x) -> str:
    return repr(float(x))


def _write_text(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _load_delta_rows(path) -> tuple[list[str], np.ndarray]:
    import csv

    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != DELTA_FIELDS:
            raise AnnotationError(f"expected header {','.join(DELTA_FIELDS)}", path, 1)
        ids, rows = [], []
        for ln, cells in enumerate(reader, start=2):
            if not cells:
                continue
            if len(cells) != len(DELTA_FIELDS):
                raise AnnotationError(f"expected {len(DELTA_FIELDS)} columns", path, ln)
            ids.append(cells[0])
            try:
                rows.append([float(c) for c in cells[1:]])
            except ValueError:
                raise AnnotationError("bad delta value", path, ln) from None
    return ids, np.asarray(rows, dtype=np.float64).reshape(-1, 5)


def cmd_iou(args) -> int:
    _, a = load_boxes(args.a)
    _, b = load_boxes(args.b)
    lines = []
    if args.mode == "pairwise":
        if a.shape[0] != b.shape[0]:
            raise ValueError("pairwise mode needs equally long box lists")
        for i in range(a.shape[0]):
            lines.append(_fmt(rotated_iou(a[i], b[i])))
    else:
        m = iou_matrix(a, b)
        for row in m:
            lines.append(",".join(_fmt(v) for v in row))
    _write_text(args.out, "\n".join(lines) + "\n")
    return 0


def cmd_nms(args) -> int:
    dets = load_detections(args.dets)
    if args.per == "none":
        keep = rotated_nms(dets.boxes, dets.scores, args.iou_thresh, args.max_keep)
    else:
        groups = dets.class_ids if args.per == "class" else dets.image_ids
        keep = batched_nms(dets.boxes, dets.scores, groups, args.iou_thresh, args.max_keep)
    kept = Detections(
        boxes=dets.boxes[keep],
        scores=dets.scores[keep],
        class_ids=dets.class_ids[keep],
        image_ids=dets.image_ids[keep],
        ids=dets.ids[keep] if dets.ids is not None else None,
    )
    if args.out is None or args.out == "-":
        import io

        buf = io.StringIO()
        _save_detections_to(buf, kept)
        sys.stdout.write(buf.getvalue())
    else:
        save_detections(args.out, kept)
    return 0


def _save_detections_to(fh, dets: Detections) -> None:
    from .annot import DET_FIELDS

    ids = dets.ids if dets.ids is not None else [str(i) for i in range(len(dets))]
    fh.write(",".join(DET_FIELDS) + "\n")
    for i in range(len(dets)):
        cells = [str(ids[i])] + [_fmt(v) for v in dets.boxes[i]]
        cells += [_fmt(dets.scores[i]), str(int(dets.class_ids[i])), str(dets.image_ids[i])]
        fh.write(",".join(cells) + "\n")


def _boxes_csv(boxes, ids=None) -> str:
    from .annot import BOX_FIELDS

    rows = np.atleast_2d(boxes)
    if ids is None:
        ids = [str(i) for i in range(rows.shape[0])]
    lines = [",".join(BOX_FIELDS)]
    for i, row in zip(ids, rows):
        lines.append(",".join([str(i)] + [_fmt(v) for v in row]))
    return "\n".join(lines) + "\n"


def cmd_anchors_generate(args) -> int:
    image_size = None
    if args.image_size:
        try:
            h, w = (int(v) for v in args.image_size.lower().split("x"))
        except ValueError:
            raise ValueError(f"bad --image-size {args.image_size!r}, expected HxW") from None
        image_size = (h, w)
    spec = AnchorGridSpec.from_json(args.config, image_size=image_size)
    boxes = generate_anchors(spec)
    _write_text(args.out, _boxes_csv(boxes, ids=[f"a{i}" for i in range(boxes.shape[0])]))
    return 0


def cmd_anchors_cluster(args) -> int:
    _, boxes = load_boxes(args.boxes)
    shapes = kmeans_anchors(boxes, args.k, seed=args.seed)
    lines = ["id,ab,bc"]
    for i, (ab, bc) in enumerate(shapes):
        lines.append(f"c{i},{_fmt(ab)},{_fmt(bc)}")
    _write_text(args.out, "\n".join(lines) + "\n")
    return 0


def cmd_encode(args) -> int:
    t_ids, t = load_boxes(args.targets)
    _, a = load_boxes(args.anchors)
    deltas = np.atleast_2d(encode(t, a))
    lines = [",".join(DELTA_FIELDS)]
    for i, row in zip(t_ids, deltas):
        lines.append(",".join([str(i)] + [_fmt(v) for v in row]))
    _write_text(args.out, "\n".join(lines) + "\n")
    return 0


def cmd_decode(args) -> int:
    d_ids, deltas = _load_delta_rows(args.deltas)
    _, a = load_boxes(args.anchors)
    boxes = np.atleast_2d(decode(deltas, a))
    _write_text(args.out, _boxes_csv(boxes, ids=d_ids))
    return 0


def cmd_angle_delta(args) -> int:
    import csv

    with open(args.pairs, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != ("theta_target", "theta_pred"):
            raise AnnotationError("expected header theta_target,theta_pred", args.pairs, 1)
        lines = ["delta"]
        for ln, cells in enumerate(reader, start=2):
            if not cells:
                continue
            try:
                tt, tp = float(cells[0]), float(cells[1])
            except (ValueError, IndexError):
                raise AnnotationError("bad angle pair", args.pairs, ln) from None
            lines.append(_fmt(angle_delta(tt, tp)))
    _write_text(args.out, "\n".join(lines) + "\n")
    return 0


def _parse_roi(raw: str) -> np.ndarray:
    try:
        vals = [float(v) for v in raw.split(",")]
    except ValueError:
        raise ValueError(f"bad --roi {raw!r}") from None
    if len(vals) != 5:
        raise ValueError("--roi needs 5 comma-separated values: x_a,y_a,x_c,y_c,theta")
    return np.asarray(vals, dtype=np.float64)


def cmd_roipool(args) -> int:
    if args.backward:
        if not (args.grad and args.argmax and args.out):
            raise ValueError("--backward needs --grad, --argmax and --out")
        with open(args.argmax, "r", encoding="utf-8") as fh:
            meta = json.load(fh)
        grad_map = load_feature_map(args.grad)
        result = PoolResult(
            output=grad_map.data,  # shape donor only
            argmax=np.asarray(meta["argmax"], dtype=np.int64),
            fill_mask=np.asarray(meta["fill_mask"], dtype=bool),
        )
        grid = rotated_roi_pool_backward(
            grad_map.data, result, (meta["fmap_height"], meta["fmap_width"], meta["channels"])
        )
        save_feature_map(args.out, FeatureMap(data=grid, spatial_stride=1.0))
        return 0
    if not args.out:
        raise ValueError("roipool needs --out for the pooled binary output")
    fmap = load_feature_map(args.fmap, spatial_stride=args.stride)
    result = rotated_roi_pool(fmap, _parse_roi(args.roi), args.k)
    save_feature_map(args.out, FeatureMap(data=result.output, spatial_stride=1.0))
    if args.argmax_out:
        meta = {
            "fmap_height": fmap.height,
            "fmap_width": fmap.width,
            "channels": fmap.channels,
            "argmax": result.argmax.tolist(),
            "fill_mask": result.fill_mask.tolist(),
        }
        with open(args.argmax_out, "w", encoding="utf-8") as fh:
            json.dump(meta, fh)
    return 0


def cmd_eval(args) -> int:
    dets = load_detections(args.dets)
    gts = load_ground_truths(args.gt)
    if args.criterion == "vedai":
        criterion = VedaiCriterion()
    else:
        criterion = VocCriterion(iou_threshold=args.iou_thresh)
    levels = tuple(float(v) for v in args.fppi.split(","))
    report = evaluate(dets, gts, criterion, fppi_levels=levels, num_images=args.num_images)
    if args.table:
        sys.stdout.write(report.to_text_table() + "\n")
    if args.json is not None:
        _write_text(args.json, report.to_json() + "\n")
    elif not args.table:
        sys.stdout.write(report.to_json() + "\n")
    return 0


def cmd_normalize(args) -> int:
    if args.convention == "canonical":
        ids, boxes = load_boxes(args.input)
        out = canonicalize(np.atleast_2d(boxes)) if boxes.shape[0] else boxes
        _write_text(args.out, _boxes_csv(out, ids=ids))
        return 0
    if args.convention == "corners":
        loaded = load_corner_annotations(args.input, strict=not args.lenient)
    else:
        loaded = load_annotations(args.input, args.convention, strict=not args.lenient)
    if args.lenient:
        records, errors = loaded
        for ln, msg in errors:
            print(f"skipped line {ln}: {msg}", file=sys.stderr)
    else:
        records = loaded
    from .annot import GT_FIELDS

    lines = [",".join(GT_FIELDS)]
    for rec in records:
        lines.append(
            ",".join(
                [str(rec.record_id)]
                + [_fmt(v) for v in rec.box]
                + [str(rec.class_id if rec.class_id is not None else 0), str(rec.image_id or "")]
            )
        )
    _write_text(args.out, "\n".join(lines) + "\n")
    return 0


def _random_boxes(rng: np.random.Generator, n: int, extent: float = 1024.0) -> np.ndarray:
    cx = rng.uniform(0, extent, n)
    cy = rng.uniform(0, extent, n)
    w = rng.uniform(8, 64, n)
    h = rng.uniform(8, 64, n)
    theta = rng.uniform(0, 2 * np.pi, n)
    return box_from_center(cx, cy, w, h, theta)


def cmd_bench(args) -> int:
    rng = np.random.default_rng(args.seed)
    kind = args.kind

    if kind == "iou":
        a = _random_boxes(rng, args.n)
        b = _random_boxes(rng, args.n)

        def run():
            return iou_matrix(a, b)

        def digest(res):
            return f"pairs={res.size} mean_iou={_fmt(res.mean())}"

    elif kind == "nms":
        boxes = _random_boxes(rng, args.n)
        scores = rng.uniform(0, 1, args.n)

        def run():
            return rotated_nms(boxes, scores, args.iou_thresh)

        def digest(res):
            return f"kept={res.shape[0]}"

    else:  # roipool
        fmap = FeatureMap(data=rng.standard_normal((64, 64, 8)))
        rois = _random_boxes(rng, args.n, extent=60.0)

        def run():
            acc = 0.0
            for i in range(rois.shape[0]):
                acc += rotated_roi_pool(fmap, rois[i], 7).output.sum()
            return acc

        def digest(res):
            return f"checksum={_fmt(res)}"

    for _ in range(args.warmup):
        result = run()
    times = []
    for _ in range(args.runs):
        t0 = time.perf_counter()
        result = run()
        times.append(time.perf_counter() - t0)
    med = statistics.median(times)
    print(
        f"bench {kind}: n={args.n} runs={args.runs} median={med:.6f}s "
        f"min={min(times):.6f}s threads={threads.get_thread_count()}",
        file=sys.stderr,
    )
    sys.stdout.write(digest(result) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rboxkit", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None, help="worker thread count")
    common.add_argument("--out", default=None, help="output path (default: stdout)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("iou", parents=[common], help="rotated IoU matrix between two box lists")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--mode", choices=("matrix", "pairwise"), default="matrix")
    p.set_defaults(func=cmd_iou)

    p = sub.add_parser("nms", parents=[common], help="greedy rotated non-maximum suppression")
    p.add_argument("--dets", required=True)
    p.add_argument("--iou-thresh", type=float, default=0.7,
                   help="suppression threshold (0.7 is a convention, not a tuned value)")
    p.add_argument("--max-keep", type=int, default=None)
    p.add_argument("--per", choices=("none", "class", "image"), default="none")
    p.set_defaults(func=cmd_nms)

    p = sub.add_parser("anchors", help="anchor grid generation and shape clustering")
    asub = p.add_subparsers(dest="anchors_command", required=True)
    g = asub.add_parser("generate", parents=[common])
    g.add_argument("--config", required=True, help="JSON with stride/sizes/ratios/num_angles")
    g.add_argument("--image-size", default=None, help="HxW override, e.g. 1024x1024")
    g.set_defaults(func=cmd_anchors_generate)
    c = asub.add_parser("cluster", parents=[common])
    c.add_argument("--boxes", required=True, help="canonical box CSV/JSON of ground truths")
    c.add_argument("--k", type=int, required=True)
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=cmd_anchors_cluster)

    p = sub.add_parser("encode", parents=[common], help="regression deltas from anchors to targets")
    p.add_argument("--targets", required=True)
    p.add_argument("--anchors", required=True)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", parents=[common], help="apply regression deltas to anchors")
    p.add_argument("--deltas", required=True)
    p.add_argument("--anchors", required=True)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("angle-delta", parents=[common], help="minimal pi-periodic angle deltas")
    p.add_argument("--pairs", required=True, help="CSV with header theta_target,theta_pred")
    p.set_defaults(func=cmd_angle_delta)

    p = sub.add_parser("roipool", parents=[common], help="rotated RoI max pooling over a feature map")
    p.add_argument("--fmap", help="binary feature map (forward)")
    p.add_argument("--roi", help="x_a,y_a,x_c,y_c,theta in image coordinates")
    p.add_argument("--k", type=int, default=7)
    p.add_argument("--stride", type=float, default=1.0, help="feature-to-image scale")
    p.add_argument("--argmax-out", default=None, help="JSON sidecar with argmax/fill metadata")
    p.add_argument("--backward", action="store_true")
    p.add_argument("--grad", default=None, help="binary k x k x C gradient (backward)")
    p.add_argument("--argmax", default=None, help="JSON sidecar from the forward pass (backward)")
    p.set_defaults(func=cmd_roipool)

    p = sub.add_parser("eval", parents=[common], help="oriented-detection evaluation report")
    p.add_argument("--dets", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--criterion", choices=("vedai", "voc"), required=True)
    p.add_argument("--iou-thresh", type=float, default=0.5)
    p.add_argument("--fppi", default="0.01,0.1,1")
    p.add_argument("--num-images", type=int, default=None)
    p.add_argument("--json", default=None, help="write the JSON report here")
    p.add_argument("--table", action="store_true", help="print an aligned text table")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("normalize", parents=[common], help="normalize annotations to canonical form")
    p.add_argument("--input", required=True)
    p.add_argument(
        "--convention",
        default="canonical",
        help="'canonical', 'corners', or a path to a JSON mapping file",
    )
    p.add_argument("--lenient", action="store_true", help="skip malformed lines instead of aborting")
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("bench", parents=[common], help="micro-benchmarks of the kernels")
    p.add_argument("kind", choices=("iou", "nms", "roipool"))
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--iou-thresh", type=float, default=0.3)
    p.add_argument("--runs", type=int, default=20)
    p.add_argument("--warmup", type=int, default=3)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else 1
        return 0 if code == 0 else 1
    try:
        threads.apply_env_default()
        if getattr(args, "threads", None):
            threads.set_thread_count(args.threads)
        return int(args.func(args) or 0)
    except (AnnotationError, InvalidBoxError, FileNotFoundError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
