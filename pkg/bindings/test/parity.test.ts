/**
 * Parity harness: every exported kernel is compared against a direct
 * python-library invocation on identical inputs. IoU values and NMS keep
 * sets must agree bit for bit; box-valued results within 1e-12; pooled
 * values and argmaxes exactly.
 */

import assert from "node:assert/strict";
import { test } from "node:test";

import {
  angleDelta,
  decode,
  encode,
  iouPairwise,
  nms,
  roiPool,
} from "../src/index";
import { coreReference, makeRng, randomBoxes, uniform } from "./helpers";

function overlappingPairs(seed: number, n: number): { a: Float64Array; b: Float64Array } {
  const rng = makeRng(seed);
  const a = randomBoxes(rng, n);
  const b = new Float64Array(n * 5);
  for (let i = 0; i < n; i++) {
    const cx = (a[i * 5] + a[i * 5 + 2]) / 2 + uniform(rng, -15, 15);
    const cy = (a[i * 5 + 1] + a[i * 5 + 3]) / 2 + uniform(rng, -15, 15);
    const w = uniform(rng, 4, 30);
    const h = uniform(rng, 4, 30);
    const theta = uniform(rng, 0, 2 * Math.PI);
    const c = Math.cos(theta);
    const s = Math.sin(theta);
    b[i * 5] = cx - (w * c - h * s) / 2;
    b[i * 5 + 1] = cy - (w * s + h * c) / 2;
    b[i * 5 + 2] = cx + (w * c - h * s) / 2;
    b[i * 5 + 3] = cy + (w * s + h * c) / 2;
    b[i * 5 + 4] = theta;
  }
  return { a, b };
}

test("IoU parity: 1000 random pairs, bit-exact", () => {
  const { a, b } = overlappingPairs(101, 1000);
  const got = iouPairwise(a, b);
  const want: number[] = coreReference("iou_pairwise", {
    a: Array.from(a),
    b: Array.from(b),
  });
  assert.equal(got.length, 1000);
  for (let i = 0; i < 1000; i++) {
    assert.equal(got[i], want[i], `pair ${i}`);
  }
});

test("NMS parity: keep set identical on 1000 random detections", () => {
  const rng = makeRng(202);
  const boxes = randomBoxes(rng, 1000, 400);
  const scores = Array.from({ length: 1000 }, () => rng());
  for (const thresh of [0.1, 0.3, 0.5]) {
    const got = Array.from(nms(boxes, scores, thresh));
    const want: number[] = coreReference("nms", {
      boxes: Array.from(boxes),
      scores,
      thresh,
    });
    assert.deepEqual(got, want, `threshold ${thresh}`);
  }
});

test("encode/decode parity within 1e-12", () => {
  const rng = makeRng(303);
  const targets = randomBoxes(rng, 200);
  const anchors = randomBoxes(rng, 200);
  const gotDeltas = encode(targets, anchors);
  const wantDeltas: number[] = coreReference("encode", {
    targets: Array.from(targets),
    anchors: Array.from(anchors),
  });
  for (let i = 0; i < gotDeltas.length; i++) {
    assert.ok(Math.abs(gotDeltas[i] - wantDeltas[i]) <= 1e-12, `delta ${i}`);
  }
  const gotBoxes = decode(gotDeltas, anchors);
  const wantBoxes: number[] = coreReference("decode", {
    deltas: Array.from(gotDeltas),
    anchors: Array.from(anchors),
  });
  for (let i = 0; i < gotBoxes.length; i++) {
    assert.ok(Math.abs(gotBoxes[i] - wantBoxes[i]) <= 1e-12, `coordinate ${i}`);
  }
});

test("angle delta parity on raw [0, 2pi) angles", () => {
  const rng = makeRng(404);
  const tt = Array.from({ length: 500 }, () => uniform(rng, 0, 2 * Math.PI));
  const tp = Array.from({ length: 500 }, () => uniform(rng, 0, 2 * Math.PI));
  const got = angleDelta(tt, tp);
  const want: number[] = coreReference("angle_delta", { tt, tp });
  for (let i = 0; i < 500; i++) {
    assert.equal(got[i], want[i], `pair ${i}`);
  }
});

test("roi pool parity: outputs within 1e-12, argmax and fill identical", () => {
  const rng = makeRng(505);
  const h = 16, w = 16, c = 2;
  const data = Float32Array.from({ length: h * w * c }, () => uniform(rng, -2, 2));
  const fromCenter = (cx: number, cy: number, bw: number, bh: number, theta: number): number[] => {
    const cs = Math.cos(theta);
    const sn = Math.sin(theta);
    const hx = (bw * cs - bh * sn) / 2;
    const hy = (bw * sn + bh * cs) / 2;
    return [cx - hx, cy - hy, cx + hx, cy + hy, theta];
  };
  for (const [roi, k] of [
    [[2, 2, 13, 11, 0.0], 3],
    [fromCenter(8, 6.3, 9.6, 7.6, 0.7), 4],
    [fromCenter(5.7, 5.6, 1.4, 1.2, 1.2), 2],
  ] as Array<[number[], number]>) {
    const got = roiPool({ data, height: h, width: w, channels: c }, roi, k);
    const want = coreReference("roi_pool", {
      fmap: Array.from(data),
      h, w, c,
      roi,
      k,
    });
    for (let i = 0; i < got.output.length; i++) {
      assert.ok(Math.abs(got.output[i] - want.output[i]) <= 1e-12, `output ${i}`);
    }
    assert.deepEqual(Array.from(got.argmax), want.argmax);
    assert.deepEqual(Array.from(got.fillMask), want.fill);
  }
});
