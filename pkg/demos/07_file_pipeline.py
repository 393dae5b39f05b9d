"""End-to-end file pipeline through the command-line interface.

Everything the library does is reachable as file-in/file-out subcommands:
annotation normalization, anchor generation, encode/decode, NMS and
evaluation, all over the shared CSV/JSON/binary formats.
"""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np

from rboxkit import Detections, GroundTruths, box_from_center, save_detections, save_ground_truths


def cli(*args):
    proc = subprocess.run(
        [sys.executable, "-m", "rboxkit.cli", *args], capture_output=True, text=True
    )
    if proc.returncode != 0:
        raise RuntimeError(proc.stderr)
    return proc.stdout


work = Path(tempfile.mkdtemp(prefix="rboxkit_demo_"))
print("working in", work)

# 1. normalize a corner-quad annotation file to the canonical schema
corners = work / "annotations.csv"
corners.write_text("10,10,50,10,50,30,10,30,0,im0\n70,12,98,26,89,44,61,30,0,im0\n")
normalized = cli("normalize", "--input", str(corners), "--convention", "corners")
print("\nnormalized annotations:\n" + normalized)

# 2. generate a small rotated anchor grid from a JSON config
config = work / "anchors.json"
config.write_text(json.dumps({"stride": 32, "sizes": [48], "ratios": [0.5], "num_angles": 3}))
anchors_csv = cli("anchors", "generate", "--config", str(config), "--image-size", "128x128")
print(f"anchor grid rows: {len(anchors_csv.strip().splitlines()) - 1}")

# 3. run NMS over a noisy detection file and evaluate against ground truth
rng = np.random.default_rng(2)
gt_boxes = box_from_center(rng.uniform(40, 200, 6), rng.uniform(40, 200, 6),
                           rng.uniform(24, 48, 6), rng.uniform(12, 24, 6),
                           rng.uniform(0, np.pi, 6))
gts = GroundTruths(boxes=gt_boxes, class_ids=[0] * 6,
                   image_ids=np.asarray(["im0"] * 6, object))
# three noisy copies of each ground truth
noisy = np.vstack([gt_boxes + rng.normal(0, 0.8, (6, 5)) * np.array([1, 1, 1, 1, 0.02])
                   for _ in range(3)])
dets = Detections(boxes=noisy, scores=rng.uniform(0.3, 1.0, 18),
                  class_ids=[0] * 18, image_ids=np.asarray(["im0"] * 18, object))

det_path = work / "dets.csv"
gt_path = work / "gt.csv"
save_detections(det_path, dets)
save_ground_truths(gt_path, gts)

kept_csv = cli("nms", "--dets", str(det_path), "--iou-thresh", "0.3")
kept_path = work / "kept.csv"
kept_path.write_text(kept_csv)
print(f"NMS kept {len(kept_csv.strip().splitlines()) - 1} of 18 detections")

report = json.loads(cli("eval", "--dets", str(kept_path), "--gt", str(gt_path),
                        "--criterion", "vedai", "--fppi", "0.01,1"))
print("mean AP after NMS:", report["mean_ap"])

# 4. micro-benchmark: stdout carries only the deterministic digest
digest = cli("bench", "nms", "--n", "2000", "--seed", "1", "--runs", "3", "--warmup", "1")
print("bench digest:", digest.strip())
