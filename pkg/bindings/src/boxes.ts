/**
 * Boundary validation for box batches.
 *
 * Boxes cross the boundary as flat row-major N x 5 arrays
 * (x_a, y_a, x_c, y_c, theta). Shape and value problems are reported with
 * the offending row index before anything is handed to the kernels.
 */

export type BoxInput = Float64Array | readonly number[];

export function asBoxBatch(input: BoxInput, name: string): Float64Array {
  const arr = input instanceof Float64Array ? input : Float64Array.from(input);
  if (arr.length % 5 !== 0) {
    throw new RangeError(`${name}: length ${arr.length} is not a multiple of 5`);
  }
  const n = arr.length / 5;
  for (let i = 0; i < n; i++) {
    for (let j = 0; j < 5; j++) {
      if (!Number.isFinite(arr[i * 5 + j])) {
        throw new RangeError(`${name}: row ${i} has a non-finite value`);
      }
    }
    const dx = arr[i * 5 + 2] - arr[i * 5];
    const dy = arr[i * 5 + 3] - arr[i * 5 + 1];
    const c = Math.cos(arr[i * 5 + 4]);
    const s = Math.sin(arr[i * 5 + 4]);
    const ab = c * dx + s * dy;
    const bc = -s * dx + c * dy;
    if (!(ab > 0) || !(bc > 0)) {
      const side = ab > 0 ? "BC" : "AB";
      throw new RangeError(`${name}: row ${i} is not a valid box (side ${side} <= 0)`);
    }
  }
  return arr;
}

export function asSingleBox(input: BoxInput, name: string): Float64Array {
  const arr = asBoxBatch(input, name);
  if (arr.length !== 5) {
    throw new RangeError(`${name}: expected a single box (5 values), got ${arr.length}`);
  }
  return arr;
}

export function asFiniteArray(input: ArrayLike<number>, name: string): Float64Array {
  const arr = input instanceof Float64Array ? input : Float64Array.from(input as ArrayLike<number>);
  for (let i = 0; i < arr.length; i++) {
    if (!Number.isFinite(arr[i])) {
      throw new RangeError(`${name}: index ${i} is non-finite`);
    }
  }
  return arr;
}
