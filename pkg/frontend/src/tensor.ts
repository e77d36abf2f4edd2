/**
 * tensor.ts — array boundary for the bindings.
 *
 * The boundary accepts contiguous float32 row-major views (Float32Array)
 * with zero copies; plain number arrays are explicitly copied and the result
 * metadata carries a `copied` warning flag.  Typed arrays of any other dtype
 * are rejected with an error naming the expected dtype.  A module-level copy
 * counter makes hidden copies observable in tests.
 */

export interface FeatureDims {
  channels: number;
  height: number;
  width: number;
}

export interface Roi {
  x1: number;
  y1: number;
  x2: number;
  y2: number;
}

export interface Grid {
  binRows: number;
  binCols: number;
  samplesPerSide: number;
}

let copyCount = 0;

/** Number of boundary copies made since the last reset. */
export function boundaryCopyCount(): number {
  return copyCount;
}

export function resetBoundaryCopyCount(): void {
  copyCount = 0;
}

export interface BoundView {
  data: Float32Array;
  copied: boolean;
}

/** Validate an input array into a float32 view; see the module contract. */
export function asFloat32View(input: unknown, length: number, what: string): BoundView {
  if (input instanceof Float32Array) {
    if (input.length !== length) {
      throw new RangeError(`${what}: expected ${length} values, got ${input.length}`);
    }
    return { data: input, copied: false };
  }
  if (ArrayBuffer.isView(input)) {
    throw new TypeError(
      `${what}: expected a Float32Array (float32), got ${input.constructor.name}`,
    );
  }
  if (Array.isArray(input)) {
    if (input.length !== length) {
      throw new RangeError(`${what}: expected ${length} values, got ${input.length}`);
    }
    copyCount += 1;
    return { data: Float32Array.from(input), copied: true };
  }
  throw new TypeError(`${what}: expected a Float32Array (float32), got ${typeof input}`);
}

export function checkRoi(roi: Roi): void {
  for (const v of [roi.x1, roi.y1, roi.x2, roi.y2]) {
    if (!Number.isFinite(v)) {
      throw new RangeError(`box coordinates must be finite, got ${JSON.stringify(roi)}`);
    }
  }
  if (!(roi.x2 > roi.x1 && roi.y2 > roi.y1)) {
    throw new RangeError(`box must have strictly positive extent, got ${JSON.stringify(roi)}`);
  }
}

export function checkGrid(grid: Grid): void {
  for (const v of [grid.binRows, grid.binCols, grid.samplesPerSide]) {
    if (!Number.isInteger(v) || v < 1) {
      throw new RangeError(`grid fields must be positive integers, got ${JSON.stringify(grid)}`);
    }
  }
}

export function checkDims(dims: { [k: string]: number }, what: string): void {
  for (const [key, v] of Object.entries(dims)) {
    if (!Number.isInteger(v) || v < 1) {
      throw new RangeError(`${what}.${key} must be a positive integer, got ${v}`);
    }
  }
}
