/**
 * kernels.ts — forward and backward pooling kernels.
 *
 * Bit-exact twin of the core library's kernels: coordinates and weights in
 * float64, feature lookups zero-padded, probability lookups border-clamped
 * and factored (x within rows, then y), one float32 rounding per sample
 * contribution, serial float32 accumulation per bin in (h, w, u, v) sample
 * order, division by the sample count last.  Backward passes accumulate in
 * float64 in the same order and round to float32 at the end.
 *
 * Parity holds because JS numbers and the reference's float64 both follow
 * IEEE-754 with correctly rounded +,-,*,/ and Math.fround performs the same
 * round-to-nearest-even narrowing as a float32 cast.
 */

import {
  BoundView,
  FeatureDims,
  Grid,
  Roi,
  asFloat32View,
  checkDims,
  checkGrid,
  checkRoi,
} from "./tensor.js";

const fr = Math.fround;

export interface PooledResult {
  data: Float32Array;
  channels: number;
  binRows: number;
  binCols: number;
  inputCopied: boolean;
}

export interface GradResult {
  gradFeature: Float32Array;
  gradProb: Float32Array | null;
  inputCopied: boolean;
}

export interface ProbInput {
  data: unknown;
  height: number;
  width: number;
}

function sampleA(roi: Roi, grid: Grid, w: number, v: number): number {
  const binW = (roi.x2 - roi.x1) / grid.binCols;
  return roi.x1 + binW * (w + (v + 0.5) / grid.samplesPerSide);
}

function sampleB(roi: Roi, grid: Grid, h: number, u: number): number {
  const binH = (roi.y2 - roi.y1) / grid.binRows;
  return roi.y1 + binH * (h + (u + 0.5) / grid.samplesPerSide);
}

/** Zero-padded float64 bilinear feature value for one channel. */
function featureValue(
  data: Float32Array,
  hf: number,
  wf: number,
  channel: number,
  y0: number,
  x0: number,
  w00: number,
  w01: number,
  w10: number,
  w11: number,
): number {
  const base = channel * hf * wf;
  const in00 = y0 >= 0 && y0 < hf && x0 >= 0 && x0 < wf;
  const in01 = y0 >= 0 && y0 < hf && x0 + 1 >= 0 && x0 + 1 < wf;
  const in10 = y0 + 1 >= 0 && y0 + 1 < hf && x0 >= 0 && x0 < wf;
  const in11 = y0 + 1 >= 0 && y0 + 1 < hf && x0 + 1 >= 0 && x0 + 1 < wf;
  const v00 = in00 ? data[base + y0 * wf + x0] : 0.0;
  const v01 = in01 ? data[base + y0 * wf + x0 + 1] : 0.0;
  const v10 = in10 ? data[base + (y0 + 1) * wf + x0] : 0.0;
  const v11 = in11 ? data[base + (y0 + 1) * wf + x0 + 1] : 0.0;
  return w00 * v00 + w01 * v01 + w10 * v10 + w11 * v11;
}

interface ProbStencil {
  value: number;
  weights: [number, number, number, number];
  cells: [number, number, number, number]; // flat indices into the map
}

/** Border-clamped factored bilinear probability lookup. */
function probStencil(p: Float32Array, hp: number, wp: number, d: number, c: number): ProbStencil {
  let cc = Math.min(Math.max(c, -0.5), wp - 0.5);
  let dd = Math.min(Math.max(d, -0.5), hp - 0.5);
  const x0 = Math.floor(cc);
  const y0 = Math.floor(dd);
  const dx = cc - x0;
  const dy = dd - y0;
  const qx0 = Math.min(Math.max(x0, 0), wp - 1);
  const qx1 = Math.min(Math.max(x0 + 1, 0), wp - 1);
  const qy0 = Math.min(Math.max(y0, 0), hp - 1);
  const qy1 = Math.min(Math.max(y0 + 1, 0), hp - 1);
  const wx0 = 1.0 - dx;
  const wy0 = 1.0 - dy;
  const r0 = wx0 * p[qy0 * wp + qx0] + dx * p[qy0 * wp + qx1];
  const r1 = wx0 * p[qy1 * wp + qx0] + dx * p[qy1 * wp + qx1];
  return {
    value: wy0 * r0 + dy * r1,
    weights: [wy0 * wx0, wy0 * dx, dy * wx0, dy * dx],
    cells: [qy0 * wp + qx0, qy0 * wp + qx1, qy1 * wp + qx0, qy1 * wp + qx1],
  };
}

function pooledForward(
  feature: BoundView,
  dims: FeatureDims,
  roi: Roi,
  grid: Grid,
  prob: { view: BoundView; height: number; width: number } | null,
): PooledResult {
  const { channels, height: hf, width: wf } = dims;
  const { binRows, binCols, samplesPerSide: s } = grid;
  const n = s * s;
  const ex = roi.x2 - roi.x1;
  const ey = roi.y2 - roi.y1;
  const out = new Float32Array(channels * binRows * binCols);

  for (let h = 0; h < binRows; h++) {
    for (let w = 0; w < binCols; w++) {
      // per-channel float32 accumulators, serial over (u, v)
      const acc = new Float32Array(channels);
      for (let u = 0; u < s; u++) {
        const b = sampleB(roi, grid, h, u);
        const y0 = Math.floor(b);
        const dy = b - y0;
        const wy0 = 1.0 - dy;
        for (let v = 0; v < s; v++) {
          const a = sampleA(roi, grid, w, v);
          const x0 = Math.floor(a);
          const dx = a - x0;
          const wx0 = 1.0 - dx;
          const w00 = wy0 * wx0;
          const w01 = wy0 * dx;
          const w10 = dy * wx0;
          const w11 = dy * dx;
          let p = 1.0;
          if (prob !== null) {
            const c = ((a - roi.x1) / ex) * prob.width - 0.5;
            const d = ((b - roi.y1) / ey) * prob.height - 0.5;
            p = probStencil(prob.view.data, prob.height, prob.width, d, c).value;
          }
          for (let ci = 0; ci < channels; ci++) {
            const val = featureValue(feature.data, hf, wf, ci, y0, x0, w00, w01, w10, w11);
            const contrib = prob !== null ? fr(val * p) : fr(val);
            acc[ci] = fr(acc[ci] + contrib);
          }
        }
      }
      for (let ci = 0; ci < channels; ci++) {
        out[ci * binRows * binCols + h * binCols + w] = fr(acc[ci] / n);
      }
    }
  }
  return { data: out, channels, binRows, binCols, inputCopied: feature.copied || (prob?.view.copied ?? false) };
}

/** Average-pool bilinear feature samples over each bin of the RoI. */
export function roiAlign(featureData: unknown, dims: FeatureDims, roi: Roi, grid: Grid): PooledResult {
  checkDims(dims as unknown as { [k: string]: number }, "dims");
  checkRoi(roi);
  checkGrid(grid);
  const view = asFloat32View(featureData, dims.channels * dims.height * dims.width, "feature");
  return pooledForward(view, dims, roi, grid, null);
}

/** Shape-aware pooling: samples weighted by the interpolated instance probability. */
export function saRoiAlign(
  featureData: unknown,
  dims: FeatureDims,
  roi: Roi,
  prob: ProbInput,
  grid: Grid,
): PooledResult {
  checkDims(dims as unknown as { [k: string]: number }, "dims");
  checkDims({ height: prob.height, width: prob.width }, "prob");
  checkRoi(roi);
  checkGrid(grid);
  const view = asFloat32View(featureData, dims.channels * dims.height * dims.width, "feature");
  const pview = asFloat32View(prob.data, prob.height * prob.width, "prob");
  return pooledForward(view, dims, roi, grid, {
    view: pview,
    height: prob.height,
    width: prob.width,
  });
}

function backwardCore(
  gradOut: BoundView,
  dims: FeatureDims,
  roi: Roi,
  grid: Grid,
  feature: BoundView | null,
  prob: { view: BoundView; height: number; width: number } | null,
): GradResult {
  const { channels, height: hf, width: wf } = dims;
  const { binRows, binCols, samplesPerSide: s } = grid;
  const n = s * s;
  const gf = new Float64Array(channels * hf * wf);
  const gp = prob !== null ? new Float64Array(prob.height * prob.width) : null;
  const ex = roi.x2 - roi.x1;
  const ey = roi.y2 - roi.y1;

  for (let h = 0; h < binRows; h++) {
    for (let w = 0; w < binCols; w++) {
      for (let u = 0; u < s; u++) {
        const b = sampleB(roi, grid, h, u);
        const y0 = Math.floor(b);
        const dy = b - y0;
        const wy0 = 1.0 - dy;
        for (let v = 0; v < s; v++) {
          const a = sampleA(roi, grid, w, v);
          const x0 = Math.floor(a);
          const dx = a - x0;
          const wx0 = 1.0 - dx;
          const w00 = wy0 * wx0;
          const w01 = wy0 * dx;
          const w10 = dy * wx0;
          const w11 = dy * dx;

          let scale: number;
          let stencil: ProbStencil | null = null;
          if (prob !== null) {
            const c = ((a - roi.x1) / ex) * prob.width - 0.5;
            const d = ((b - roi.y1) / ey) * prob.height - 0.5;
            stencil = probStencil(prob.view.data, prob.height, prob.width, d, c);
            scale = stencil.value / n;
          } else {
            scale = 1.0 / n;
          }

          const corners: [number, number, number][] = [
            [y0, x0, w00],
            [y0, x0 + 1, w01],
            [y0 + 1, x0, w10],
            [y0 + 1, x0 + 1, w11],
          ];
          for (const [row, col, wgt] of corners) {
            if (row >= 0 && row < hf && col >= 0 && col < wf) {
              const cw = wgt * scale;
              for (let ci = 0; ci < channels; ci++) {
                const g = gradOut.data[ci * binRows * binCols + h * binCols + w];
                gf[ci * hf * wf + row * wf + col] += g * cw;
              }
            }
          }

          if (prob !== null && stencil !== null && feature !== null && gp !== null) {
            let t = 0.0;
            for (let ci = 0; ci < channels; ci++) {
              const fval = featureValue(feature.data, hf, wf, ci, y0, x0, w00, w01, w10, w11);
              const g = gradOut.data[ci * binRows * binCols + h * binCols + w];
              t = t + g * fval;
            }
            const ts = t / n;
            // border-replicated cells may coincide; keep statement order
            gp[stencil.cells[0]] += ts * stencil.weights[0];
            gp[stencil.cells[1]] += ts * stencil.weights[1];
            gp[stencil.cells[2]] += ts * stencil.weights[2];
            gp[stencil.cells[3]] += ts * stencil.weights[3];
          }
        }
      }
    }
  }

  const gf32 = new Float32Array(gf.length);
  for (let i = 0; i < gf.length; i++) gf32[i] = fr(gf[i]);
  let gp32: Float32Array | null = null;
  if (gp !== null) {
    gp32 = new Float32Array(gp.length);
    for (let i = 0; i < gp.length; i++) gp32[i] = fr(gp[i]);
  }
  return {
    gradFeature: gf32,
    gradProb: gp32,
    inputCopied: gradOut.copied || (feature?.copied ?? false) || (prob?.view.copied ?? false),
  };
}

/** Distribute pooled-output gradients back onto the feature map. */
export function roiAlignBackward(
  gradOutData: unknown,
  dims: FeatureDims,
  roi: Roi,
  grid: Grid,
): GradResult {
  checkDims(dims as unknown as { [k: string]: number }, "dims");
  checkRoi(roi);
  checkGrid(grid);
  const gview = asFloat32View(
    gradOutData, dims.channels * grid.binRows * grid.binCols, "gradOut",
  );
  return backwardCore(gview, dims, roi, grid, null, null);
}

/** Backward pass of shape-aware pooling: feature and probability gradients. */
export function saRoiAlignBackward(
  gradOutData: unknown,
  featureData: unknown,
  dims: FeatureDims,
  roi: Roi,
  prob: ProbInput,
  grid: Grid,
): GradResult {
  checkDims(dims as unknown as { [k: string]: number }, "dims");
  checkDims({ height: prob.height, width: prob.width }, "prob");
  checkRoi(roi);
  checkGrid(grid);
  const gview = asFloat32View(
    gradOutData, dims.channels * grid.binRows * grid.binCols, "gradOut",
  );
  const fview = asFloat32View(featureData, dims.channels * dims.height * dims.width, "feature");
  const pview = asFloat32View(prob.data, prob.height * prob.width, "prob");
  return backwardCore(gview, dims, roi, grid, fview, {
    view: pview,
    height: prob.height,
    width: prob.width,
  });
}
