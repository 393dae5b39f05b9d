/**
 * Typed-array wrappers over the rotated-box kernels.
 *
 * Each call shuttles its inputs through the core's file interfaces and runs
 * one CLI subprocess; results come back numerically identical to the core
 * (bit-exact for IoU and NMS keep sets, float32-exact for pooled values).
 * Errors surface as exceptions; the host process is never taken down.
 */

import { join } from "node:path";
import { readFileSync, writeFileSync } from "node:fs";

import { asBoxBatch, asFiniteArray, asSingleBox, BoxInput } from "./boxes";
import {
  BOX_HEADER,
  DELTA_HEADER,
  formatFloat,
  parseCsvFloats,
  parseKeptIds,
  readFeatureMapFile,
  runCli,
  withTempDir,
  writeBoxCsv,
  writeDeltaCsv,
  writeDetectionsCsv,
  writeFeatureMapFile,
} from "./runner";

export interface IouMatrix {
  /** row-major rows x cols IoU values */
  data: Float64Array;
  rows: number;
  cols: number;
}

/** Exact IoU of one rotated box pair. */
export function rotatedIou(a: BoxInput, b: BoxInput): number {
  const out = iouPairwise(asSingleBox(a, "a"), asSingleBox(b, "b"));
  return out[0];
}

/** Aligned IoU of equally long box batches: out[i] = IoU(a[i], b[i]). */
export function iouPairwise(a: BoxInput, b: BoxInput): Float64Array {
  const ab = asBoxBatch(a, "a");
  const bb = asBoxBatch(b, "b");
  if (ab.length !== bb.length) {
    throw new RangeError(`pairwise IoU needs equal batch sizes (${ab.length / 5} vs ${bb.length / 5})`);
  }
  return withTempDir((dir) => {
    const pa = join(dir, "a.csv");
    const pb = join(dir, "b.csv");
    writeBoxCsv(pa, ab);
    writeBoxCsv(pb, bb);
    const stdout = runCli(["iou", "--a", pa, "--b", pb, "--mode", "pairwise"]);
    const lines = stdout.trim().length ? stdout.trim().split("\n") : [];
    return Float64Array.from(lines, Number);
  });
}

/** Full pairwise IoU matrix between two box batches. */
export function iouMatrix(a: BoxInput, b: BoxInput): IouMatrix {
  const ab = asBoxBatch(a, "a");
  const bb = asBoxBatch(b, "b");
  return withTempDir((dir) => {
    const pa = join(dir, "a.csv");
    const pb = join(dir, "b.csv");
    writeBoxCsv(pa, ab);
    writeBoxCsv(pb, bb);
    const stdout = runCli(["iou", "--a", pa, "--b", pb]);
    const rows = ab.length / 5;
    const cols = bb.length / 5;
    const data = new Float64Array(rows * cols);
    const lines = stdout.trim().length ? stdout.trim().split("\n") : [];
    for (let i = 0; i < lines.length; i++) {
      const cells = lines[i].split(",");
      for (let j = 0; j < cells.length; j++) {
        data[i * cols + j] = Number(cells[j]);
      }
    }
    return { data, rows, cols };
  });
}

/**
 * Greedy rotated NMS; returns kept indices in descending score order.
 * Scores live in [0, 1] (the domain of the detection file schema).
 */
export function nms(
  boxes: BoxInput,
  scores: ArrayLike<number>,
  iouThreshold: number,
  maxKeep?: number,
): Int32Array {
  const bb = asBoxBatch(boxes, "boxes");
  const sc = asFiniteArray(scores, "scores");
  if (sc.length !== bb.length / 5) {
    throw new RangeError(`scores length ${sc.length} != box count ${bb.length / 5}`);
  }
  return withTempDir((dir) => {
    const dets = join(dir, "dets.csv");
    writeDetectionsCsv(dets, bb, sc);
    const args = ["nms", "--dets", dets, "--iou-thresh", formatFloat(iouThreshold)];
    if (maxKeep !== undefined) {
      args.push("--max-keep", String(maxKeep));
    }
    return parseKeptIds(runCli(args));
  });
}

/** Regression deltas (dx, dy, dlogw, dlogh, dtheta) from anchors to targets. */
export function encode(targets: BoxInput, anchors: BoxInput): Float64Array {
  const tb = asBoxBatch(targets, "targets");
  const ab = asBoxBatch(anchors, "anchors");
  if (tb.length !== ab.length) {
    throw new RangeError("targets and anchors must have the same batch size");
  }
  return withTempDir((dir) => {
    const pt = join(dir, "t.csv");
    const pa = join(dir, "a.csv");
    writeBoxCsv(pt, tb);
    writeBoxCsv(pa, ab);
    const stdout = runCli(["encode", "--targets", pt, "--anchors", pa]);
    return parseCsvFloats(stdout, DELTA_HEADER, 5);
  });
}

/** Apply regression deltas to anchors; inverse of {@link encode}. */
export function decode(deltas: ArrayLike<number>, anchors: BoxInput): Float64Array {
  const db = asFiniteArray(deltas, "deltas");
  if (db.length % 5 !== 0) {
    throw new RangeError(`deltas length ${db.length} is not a multiple of 5`);
  }
  const ab = asBoxBatch(anchors, "anchors");
  if (db.length !== ab.length) {
    throw new RangeError("deltas and anchors must have the same batch size");
  }
  return withTempDir((dir) => {
    const pd = join(dir, "d.csv");
    const pa = join(dir, "a.csv");
    writeDeltaCsv(pd, db);
    writeBoxCsv(pa, ab);
    const stdout = runCli(["decode", "--deltas", pd, "--anchors", pa]);
    return parseCsvFloats(stdout, BOX_HEADER, 5);
  });
}

/** Minimal pi-periodic angle delta(s); accepts scalars or equal-length arrays. */
export function angleDelta(thetaTarget: number, thetaPred: number): number;
export function angleDelta(thetaTarget: ArrayLike<number>, thetaPred: ArrayLike<number>): Float64Array;
export function angleDelta(
  thetaTarget: number | ArrayLike<number>,
  thetaPred: number | ArrayLike<number>,
): number | Float64Array {
  const scalar = typeof thetaTarget === "number";
  const tt = asFiniteArray(scalar ? [thetaTarget as number] : (thetaTarget as ArrayLike<number>), "thetaTarget");
  const tp = asFiniteArray(scalar ? [thetaPred as number] : (thetaPred as ArrayLike<number>), "thetaPred");
  if (tt.length !== tp.length) {
    throw new RangeError("thetaTarget and thetaPred must have the same length");
  }
  const out = withTempDir((dir) => {
    const pairs = join(dir, "pairs.csv");
    const lines = ["theta_target,theta_pred"];
    for (let i = 0; i < tt.length; i++) {
      lines.push(`${formatFloat(tt[i])},${formatFloat(tp[i])}`);
    }
    writeFileSync(pairs, lines.join("\n") + "\n");
    const stdout = runCli(["angle-delta", "--pairs", pairs]);
    const rows = stdout.trim().split("\n");
    return Float64Array.from(rows.slice(1), Number);
  });
  return scalar ? out[0] : out;
}

export interface FeatureMapInput {
  /** row-major (height, width, channels) float32 values */
  data: Float32Array;
  height: number;
  width: number;
  channels: number;
  /** feature-to-image scale; roi coordinates are divided by this */
  spatialStride?: number;
}

export interface RoiPoolResult {
  /** row-major (k, k, channels) pooled values */
  output: Float32Array;
  /** row-major (k, k, channels, 2) source (row, col) per output value */
  argmax: Int32Array;
  /** row-major (k, k) flags for nearest-neighbor-filled cells */
  fillMask: Uint8Array;
  k: number;
  channels: number;
  fmapHeight: number;
  fmapWidth: number;
}

/** Rotated RoI max pooling of `roi` (image coordinates) onto a k x k grid. */
export function roiPool(fmap: FeatureMapInput, roi: BoxInput, k: number): RoiPoolResult {
  if (!Number.isInteger(k) || k < 1) {
    throw new RangeError(`output size k must be a positive integer, got ${k}`);
  }
  const roiArr = asSingleBox(roi, "roi");
  return withTempDir((dir) => {
    const fmapPath = join(dir, "fmap.bin");
    const outPath = join(dir, "pooled.bin");
    const argmaxPath = join(dir, "argmax.json");
    writeFeatureMapFile(fmapPath, fmap.data, fmap.height, fmap.width, fmap.channels);
    runCli([
      "roipool",
      "--fmap", fmapPath,
      "--roi", Array.from(roiArr, formatFloat).join(","),
      "--k", String(k),
      "--stride", formatFloat(fmap.spatialStride ?? 1.0),
      "--out", outPath,
      "--argmax-out", argmaxPath,
    ]);
    const pooled = readFeatureMapFile(outPath);
    const meta = JSON.parse(readFileSync(argmaxPath, "utf8"));
    const argmax = Int32Array.from((meta.argmax as number[][][][]).flat(3));
    const fillMask = Uint8Array.from((meta.fill_mask as boolean[][]).flat(), (v) => (v ? 1 : 0));
    return {
      output: pooled.data,
      argmax,
      fillMask,
      k,
      channels: fmap.channels,
      fmapHeight: meta.fmap_height as number,
      fmapWidth: meta.fmap_width as number,
    };
  });
}

/**
 * Scatter-add `gradOutput` (k, k, channels) back through the argmaxes of a
 * forward result; returns the (height, width, channels) gradient grid.
 */
export function roiPoolBackward(gradOutput: Float32Array, pool: RoiPoolResult): Float32Array {
  const expected = pool.k * pool.k * pool.channels;
  if (gradOutput.length !== expected) {
    throw new RangeError(`gradOutput length ${gradOutput.length} != k*k*C = ${expected}`);
  }
  return withTempDir((dir) => {
    const gradPath = join(dir, "grad.bin");
    const argmaxPath = join(dir, "argmax.json");
    const outPath = join(dir, "grid.bin");
    writeFeatureMapFile(gradPath, gradOutput, pool.k, pool.k, pool.channels);
    const argmaxNested: number[][][][] = [];
    let p = 0;
    for (let i = 0; i < pool.k; i++) {
      const row: number[][][] = [];
      for (let j = 0; j < pool.k; j++) {
        const cell: number[][] = [];
        for (let c = 0; c < pool.channels; c++) {
          cell.push([pool.argmax[p], pool.argmax[p + 1]]);
          p += 2;
        }
        row.push(cell);
      }
      argmaxNested.push(row);
    }
    const fillNested: boolean[][] = [];
    for (let i = 0; i < pool.k; i++) {
      fillNested.push(Array.from(pool.fillMask.subarray(i * pool.k, (i + 1) * pool.k), (v) => v !== 0));
    }
    writeFileSync(
      argmaxPath,
      JSON.stringify({
        fmap_height: pool.fmapHeight,
        fmap_width: pool.fmapWidth,
        channels: pool.channels,
        argmax: argmaxNested,
        fill_mask: fillNested,
      }),
    );
    runCli(["roipool", "--backward", "--grad", gradPath, "--argmax", argmaxPath, "--out", outPath]);
    return readFeatureMapFile(outPath).data;
  });
}
