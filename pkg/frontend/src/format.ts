/**
 * format.ts — the SARA binary tensor container, little-endian.
 *
 * Layout: magic "SARA", version u8 (=1), dtype u8 (1 = float32), ndim u8,
 * pad u8 (=0), ndim x u32 dims (outermost first), then the row-major float32
 * payload.  Byte-compatible with the Python implementation.
 */

const MAGIC = [0x53, 0x41, 0x52, 0x41]; // "SARA"
export const FORMAT_VERSION = 1;
export const DTYPE_F32 = 1;

export interface Tensor {
  dims: number[];
  data: Float32Array;
}

export function tensorBytes(dims: number[], data: Float32Array): Uint8Array {
  if (dims.length === 0 || dims.some((d) => !Number.isInteger(d) || d < 1)) {
    throw new RangeError(`cannot serialize a tensor with empty dims: ${JSON.stringify(dims)}`);
  }
  const count = dims.reduce((a, b) => a * b, 1);
  if (data.length !== count) {
    throw new RangeError(`data has ${data.length} values, dims ${dims} require ${count}`);
  }
  const out = new Uint8Array(8 + 4 * dims.length + 4 * count);
  const view = new DataView(out.buffer);
  out.set(MAGIC, 0);
  view.setUint8(4, FORMAT_VERSION);
  view.setUint8(5, DTYPE_F32);
  view.setUint8(6, dims.length);
  view.setUint8(7, 0);
  dims.forEach((d, i) => view.setUint32(8 + 4 * i, d, true));
  const base = 8 + 4 * dims.length;
  for (let i = 0; i < count; i++) {
    view.setFloat32(base + 4 * i, data[i], true);
  }
  return out;
}

export function tensorFromBytes(bytes: Uint8Array): Tensor {
  const need = (n: number, what: string) => {
    if (bytes.length < n) {
      throw new RangeError(`stream ended while reading ${what} (${bytes.length}/${n} bytes)`);
    }
  };
  need(8, "header");
  if (!MAGIC.every((b, i) => bytes[i] === b)) {
    throw new RangeError(`bad magic: expected "SARA"`);
  }
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  const version = view.getUint8(4);
  const dtype = view.getUint8(5);
  const ndim = view.getUint8(6);
  const pad = view.getUint8(7);
  if (version !== FORMAT_VERSION) throw new RangeError(`unsupported container version ${version}`);
  if (dtype !== DTYPE_F32) throw new RangeError(`unsupported element type code ${dtype}`);
  if (pad !== 0) throw new RangeError(`nonzero header pad byte ${pad}`);
  if (ndim === 0) throw new RangeError("tensor rank 0 is not supported");
  need(8 + 4 * ndim, "dims");
  const dims: number[] = [];
  for (let i = 0; i < ndim; i++) {
    dims.push(view.getUint32(8 + 4 * i, true));
  }
  if (dims.some((d) => d === 0)) {
    throw new RangeError(`zero-sized dimension in ${JSON.stringify(dims)}`);
  }
  const count = dims.reduce((a, b) => a * b, 1);
  const base = 8 + 4 * ndim;
  need(base + 4 * count, "data");
  const data = new Float32Array(count);
  for (let i = 0; i < count; i++) {
    data[i] = view.getFloat32(base + 4 * i, true);
  }
  return { dims, data };
}
