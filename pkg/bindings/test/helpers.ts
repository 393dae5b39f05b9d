import { spawnSync } from "node:child_process";
import { mkdtempSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

/** mulberry32: small deterministic PRNG for reproducible test data. */
export function makeRng(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function uniform(rng: () => number, lo: number, hi: number): number {
  return lo + (hi - lo) * rng();
}

/** Valid random boxes as a flat N x 5 array (center/size/angle construction). */
export function randomBoxes(rng: () => number, n: number, extent = 100): Float64Array {
  const out = new Float64Array(n * 5);
  for (let i = 0; i < n; i++) {
    const cx = uniform(rng, 0, extent);
    const cy = uniform(rng, 0, extent);
    const w = uniform(rng, 4, 30);
    const h = uniform(rng, 4, 30);
    const theta = uniform(rng, 0, 2 * Math.PI);
    const c = Math.cos(theta);
    const s = Math.sin(theta);
    const hx = (w * c - h * s) / 2;
    const hy = (w * s + h * c) / 2;
    out[i * 5] = cx - hx;
    out[i * 5 + 1] = cy - hy;
    out[i * 5 + 2] = cx + hx;
    out[i * 5 + 3] = cy + hy;
    out[i * 5 + 4] = theta;
  }
  return out;
}

/**
 * Reference oracle: run a snippet against the core library DIRECTLY (python
 * import, no CLI), exchanging float64 values losslessly through JSON.
 */
export function coreReference(mode: string, payload: unknown): any {
  const dir = mkdtempSync(join(tmpdir(), "rboxkit-ref-"));
  try {
    const inPath = join(dir, "in.json");
    writeFileSync(inPath, JSON.stringify(payload));
    const script = `
import json, sys
import numpy as np
from rboxkit import (FeatureMap, angle_delta, decode, encode, rotated_iou,
                     rotated_nms, rotated_roi_pool)

mode = sys.argv[1]
data = json.load(open(sys.argv[2]))
if mode == "iou_pairwise":
    a = np.asarray(data["a"], float).reshape(-1, 5)
    b = np.asarray(data["b"], float).reshape(-1, 5)
    out = [rotated_iou(a[i], b[i]) for i in range(a.shape[0])]
elif mode == "nms":
    boxes = np.asarray(data["boxes"], float).reshape(-1, 5)
    out = rotated_nms(boxes, np.asarray(data["scores"], float), data["thresh"]).tolist()
elif mode == "encode":
    t = np.asarray(data["targets"], float).reshape(-1, 5)
    a = np.asarray(data["anchors"], float).reshape(-1, 5)
    out = np.atleast_2d(encode(t, a)).ravel().tolist()
elif mode == "decode":
    d = np.asarray(data["deltas"], float).reshape(-1, 5)
    a = np.asarray(data["anchors"], float).reshape(-1, 5)
    out = np.atleast_2d(decode(d, a)).ravel().tolist()
elif mode == "angle_delta":
    out = np.atleast_1d(angle_delta(np.asarray(data["tt"], float), np.asarray(data["tp"], float))).tolist()
elif mode == "roi_pool":
    fmap = FeatureMap(np.asarray(data["fmap"], float).reshape(data["h"], data["w"], data["c"]),
                      spatial_stride=data.get("stride", 1.0))
    res = rotated_roi_pool(fmap, np.asarray(data["roi"], float), data["k"])
    out = {
        "output": res.output.ravel().tolist(),
        "argmax": res.argmax.ravel().tolist(),
        "fill": res.fill_mask.ravel().astype(int).tolist(),
    }
else:
    raise SystemExit(f"unknown mode {mode}")
print(json.dumps(out))
`;
    const scriptPath = join(dir, "ref.py");
    writeFileSync(scriptPath, script);
    const proc = spawnSync(process.env.RBOXKIT_PYTHON ?? "python3", [scriptPath, mode, inPath], {
      encoding: "utf8",
      maxBuffer: 512 * 1024 * 1024,
    });
    if (proc.status !== 0) {
      throw new Error(`reference script failed: ${proc.stderr}`);
    }
    return JSON.parse(proc.stdout);
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}
