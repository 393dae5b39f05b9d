/**
 * Subprocess plumbing: every kernel call round-trips through the core CLI
 * using its documented file formats (CSV, JSON, binary feature maps).
 *
 * Numbers are serialized with `Number.prototype.toString()` (the shortest
 * decimal that round-trips the double) and parsed back with `Number()`, so
 * values cross the boundary bit-exactly in both directions.
 */

import { spawnSync } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

export class CliError extends Error {
  constructor(message: string, public readonly exitCode: number | null) {
    super(message);
    this.name = "CliError";
  }
}

function cliCommand(): { cmd: string; prefix: string[] } {
  const direct = process.env.RBOXKIT_CLI;
  if (direct) {
    return { cmd: direct, prefix: [] };
  }
  const python = process.env.RBOXKIT_PYTHON ?? "python3";
  return { cmd: python, prefix: ["-m", "rboxkit.cli"] };
}

export function runCli(args: string[]): string {
  const { cmd, prefix } = cliCommand();
  const proc = spawnSync(cmd, [...prefix, ...args], {
    encoding: "utf8",
    maxBuffer: 512 * 1024 * 1024,
  });
  if (proc.error) {
    throw new CliError(`failed to spawn ${cmd}: ${proc.error.message}`, null);
  }
  if (proc.status !== 0) {
    const detail = (proc.stderr || "").trim().split("\n").slice(-3).join(" | ");
    throw new CliError(`rboxkit ${args[0]} failed (exit ${proc.status}): ${detail}`, proc.status);
  }
  return proc.stdout;
}

export function withTempDir<T>(fn: (dir: string) => T): T {
  const dir = mkdtempSync(join(tmpdir(), "rboxkit-ffi-"));
  try {
    return fn(dir);
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}

export function formatFloat(x: number): string {
  return Object.is(x, -0) ? "0" : x.toString();
}

export const BOX_HEADER = "id,x_a,y_a,x_c,y_c,theta";
export const DET_HEADER = "id,x_a,y_a,x_c,y_c,theta,score,class_id,image_id";
export const DELTA_HEADER = "id,dx,dy,dlogw,dlogh,dtheta";

export function writeBoxCsv(path: string, boxes: Float64Array): void {
  const n = boxes.length / 5;
  const lines = [BOX_HEADER];
  for (let i = 0; i < n; i++) {
    const row = Array.from(boxes.subarray(i * 5, i * 5 + 5), formatFloat);
    lines.push(`${i},${row.join(",")}`);
  }
  writeFileSync(path, lines.join("\n") + "\n");
}

export function writeDetectionsCsv(path: string, boxes: Float64Array, scores: ArrayLike<number>): void {
  const n = boxes.length / 5;
  const lines = [DET_HEADER];
  for (let i = 0; i < n; i++) {
    const row = Array.from(boxes.subarray(i * 5, i * 5 + 5), formatFloat);
    lines.push(`${i},${row.join(",")},${formatFloat(scores[i])},0,im0`);
  }
  writeFileSync(path, lines.join("\n") + "\n");
}

export function writeDeltaCsv(path: string, deltas: Float64Array): void {
  const n = deltas.length / 5;
  const lines = [DELTA_HEADER];
  for (let i = 0; i < n; i++) {
    const row = Array.from(deltas.subarray(i * 5, i * 5 + 5), formatFloat);
    lines.push(`${i},${row.join(",")}`);
  }
  writeFileSync(path, lines.join("\n") + "\n");
}

/** Parse CSV rows of the shape `id,<count floats>`; returns values row-major. */
export function parseCsvFloats(text: string, expectedHeader: string, count: number): Float64Array {
  const lines = text.trim().length ? text.trim().split("\n") : [];
  if (lines.length === 0) {
    return new Float64Array(0);
  }
  if (lines[0] !== expectedHeader) {
    throw new CliError(`unexpected CSV header: ${lines[0]}`, null);
  }
  const out = new Float64Array((lines.length - 1) * count);
  for (let i = 1; i < lines.length; i++) {
    const cells = lines[i].split(",");
    for (let j = 0; j < count; j++) {
      out[(i - 1) * count + j] = Number(cells[j + 1]);
    }
  }
  return out;
}

/** Kept-detection ids from an NMS output file, in kept order. */
export function parseKeptIds(text: string): Int32Array {
  const lines = text.trim().length ? text.trim().split("\n") : [];
  if (lines.length === 0 || lines[0] !== DET_HEADER) {
    throw new CliError(`unexpected detections header`, null);
  }
  const out = new Int32Array(lines.length - 1);
  for (let i = 1; i < lines.length; i++) {
    out[i - 1] = Number(lines[i].slice(0, lines[i].indexOf(",")));
  }
  return out;
}

const FMAP_MAGIC = "FMAP";

export function writeFeatureMapFile(
  path: string,
  data: Float32Array,
  height: number,
  width: number,
  channels: number,
): void {
  if (data.length !== height * width * channels) {
    throw new RangeError(
      `feature data length ${data.length} != ${height}x${width}x${channels}`,
    );
  }
  const buf = Buffer.alloc(16 + data.length * 4);
  buf.write(FMAP_MAGIC, 0, "ascii");
  buf.writeUInt32LE(height, 4);
  buf.writeUInt32LE(width, 8);
  buf.writeUInt32LE(channels, 12);
  for (let i = 0; i < data.length; i++) {
    buf.writeFloatLE(data[i], 16 + i * 4);
  }
  writeFileSync(path, buf);
}

export function readFeatureMapFile(path: string): {
  data: Float32Array;
  height: number;
  width: number;
  channels: number;
} {
  const buf = readFileSync(path);
  if (buf.length < 16 || buf.toString("ascii", 0, 4) !== FMAP_MAGIC) {
    throw new CliError(`${path}: not a feature-map file`, null);
  }
  const height = buf.readUInt32LE(4);
  const width = buf.readUInt32LE(8);
  const channels = buf.readUInt32LE(12);
  const count = height * width * channels;
  const data = new Float32Array(count);
  for (let i = 0; i < count; i++) {
    data[i] = buf.readFloatLE(16 + i * 4);
  }
  return { data, height, width, channels };
}
