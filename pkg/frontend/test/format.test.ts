import { describe, expect, it } from "vitest";

import { tensorBytes, tensorFromBytes } from "../src/format.js";

describe("SARA container", () => {
  it("writes the documented minimal layout", () => {
    const bytes = tensorBytes([1, 1, 1], Float32Array.of(1.0));
    expect(bytes.length).toBe(24);
    expect(Array.from(bytes.subarray(0, 8))).toEqual([0x53, 0x41, 0x52, 0x41, 1, 1, 3, 0]);
    const view = new DataView(bytes.buffer);
    expect([view.getUint32(8, true), view.getUint32(12, true), view.getUint32(16, true)]).toEqual([1, 1, 1]);
    expect(view.getFloat32(20, true)).toBe(1.0);
  });

  it("round-trips bits exactly", () => {
    const data = Float32Array.from({ length: 24 }, (_, i) => Math.fround(Math.sin(i) * 7));
    const back = tensorFromBytes(tensorBytes([2, 3, 4], data));
    expect(back.dims).toEqual([2, 3, 4]);
    expect(Buffer.from(back.data.buffer)).toEqual(Buffer.from(data.buffer));
  });

  it("rejects empty dims", () => {
    expect(() => tensorBytes([], new Float32Array(0))).toThrow(/empty dims/);
    expect(() => tensorBytes([0, 2], new Float32Array(0))).toThrow(/empty dims/);
  });

  it("rejects bad magic", () => {
    const bytes = tensorBytes([1, 1], Float32Array.of(0.5));
    bytes[0] = 0x4e;
    expect(() => tensorFromBytes(bytes)).toThrow(/magic/);
  });

  it("rejects unsupported version and dtype", () => {
    const good = tensorBytes([1, 1], Float32Array.of(0.5));
    const badVersion = Uint8Array.from(good);
    badVersion[4] = 9;
    expect(() => tensorFromBytes(badVersion)).toThrow(/version/);
    const badDtype = Uint8Array.from(good);
    badDtype[5] = 2;
    expect(() => tensorFromBytes(badDtype)).toThrow(/element type/);
  });

  it("rejects truncated payloads", () => {
    const bytes = tensorBytes([2, 2], new Float32Array(4));
    expect(() => tensorFromBytes(bytes.subarray(0, bytes.length - 2))).toThrow(/stream ended/);
  });
});
