"""Forward and backward pooling kernels plus the deterministic batch driver.

Plain pooling averages bilinearly interpolated feature samples over a fixed
s x s sub-grid per bin; shape-aware pooling multiplies each sample by the
interpolated instance probability at the matching location before averaging.

Numeric contract (the TypeScript bindings replicate it operation for
operation, so every rounding step below is load-bearing):

  * sample coordinates and interpolation weights are computed in float64;
  * feature lookups use zero padding: an out-of-range neighbor contributes 0;
  * probability lookups clamp the coordinate into [-0.5, dim-0.5] and clamp
    stencil indices to the border (replicate), and interpolate factored
    (along x within rows, then along y) so an all-ones map yields exactly
    1.0 and shape-aware pooling with P == 1 is bit-identical to plain
    pooling;
  * each sample contribution (feature value times probability) is rounded
    to float32 once, then per-bin sums accumulate serially in float32 in
    (h, w, u, v) sample order; division by the sample count N comes last;
  * backward passes accumulate scatter sums in float64 in the same sample
    order and round to float32 at the end.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatchError
from .tensors import BinGrid, FeatureMap, GradBundle, PooledGrid, ProbMap, RoiBox

DEFAULT_GRID = BinGrid(7, 7, 2)

WORKERS_ENV = "SARA_WORKERS"


@dataclass(frozen=True)
class SamplePoint:
    """One sampling location: continuous coords (a=x, b=y) inside bin (h, w)."""

    a: float
    b: float
    bin_row: int
    bin_col: int
    index: int


@dataclass(frozen=True)
class BilinearStencil:
    """The four grid neighbors of a continuous point and their weights.

    cells are (row, col) pairs ordered (y0,x0), (y0,x1), (y1,x0), (y1,x1);
    indices may fall outside a map (the lookup decides padding semantics).
    """

    cells: tuple[tuple[int, int], tuple[int, int], tuple[int, int], tuple[int, int]]
    weights: tuple[float, float, float, float]


def bilinear_stencil(a: float, b: float) -> BilinearStencil:
    """Stencil of max(0, 1-|.|) product weights around continuous (a, b)."""
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ValueError(f"sample coordinates must be finite, got ({a}, {b})")
    x0 = math.floor(a)
    y0 = math.floor(b)
    dx = a - x0
    dy = b - y0
    wx0 = 1.0 - dx
    wy0 = 1.0 - dy
    return BilinearStencil(
        cells=((y0, x0), (y0, x0 + 1), (y0 + 1, x0), (y0 + 1, x0 + 1)),
        weights=(wy0 * wx0, wy0 * dx, dy * wx0, dy * dx),
    )


def make_sample_points(roi: RoiBox, grid: BinGrid) -> list[SamplePoint]:
    """Sampling locations for every bin, in fixed (h, w, u, v) order.

    Each bin gets an s x s regular sub-grid at sub-cell centers:
    a = x1 + bin_w * (w + (v + 0.5) / s), b = y1 + bin_h * (h + (u + 0.5) / s).
    """
    s = grid.samples_per_side
    bin_w = (roi.x2 - roi.x1) / grid.bin_cols
    bin_h = (roi.y2 - roi.y1) / grid.bin_rows
    points = []
    for h in range(grid.bin_rows):
        for w in range(grid.bin_cols):
            for u in range(s):
                for v in range(s):
                    a = roi.x1 + bin_w * (w + (v + 0.5) / s)
                    b = roi.y1 + bin_h * (h + (u + 0.5) / s)
                    points.append(SamplePoint(a, b, h, w, u * s + v))
    return points


def bilinear_sample(feature: FeatureMap, a: float, b: float, channel: int) -> float:
    """Bilinearly interpolated feature value at continuous (a, b), zero-padded.

    Returns the float32-rounded value the pooling kernels see.
    """
    if not 0 <= channel < feature.channels:
        raise IndexError(f"channel {channel} out of range [0, {feature.channels})")
    st = bilinear_stencil(a, b)
    hf, wf = feature.height, feature.width
    vals = [
        float(feature.data[channel, row, col]) if 0 <= row < hf and 0 <= col < wf else 0.0
        for row, col in st.cells
    ]
    w = st.weights
    # same association order as the vectorized kernel
    total = w[0] * vals[0] + w[1] * vals[1] + w[2] * vals[2] + w[3] * vals[3]
    return float(np.float32(total))


def roi_to_prob_coords(a: float, b: float, roi: RoiBox, prob_dims: tuple[int, int]) -> tuple[float, float]:
    """Map feature coords (a, b) inside `roi` to probability-map coords (c, d).

    The RoI extent maps affinely onto the full probability map in cell-center
    coordinates: the RoI's top-left corner lands at (-0.5, -0.5) and the
    bottom-right at (W_p - 0.5, H_p - 0.5).
    """
    hp, wp = prob_dims
    c = (a - roi.x1) / (roi.x2 - roi.x1) * wp - 0.5
    d = (b - roi.y1) / (roi.y2 - roi.y1) * hp - 0.5
    return c, d


def _prob_scalar(p64: np.ndarray, d: float, c: float):
    """Border-clamped factored bilinear lookup; returns (value, weights, cells)."""
    hp, wp = p64.shape
    cc = min(max(c, -0.5), wp - 0.5)
    dd = min(max(d, -0.5), hp - 0.5)
    x0 = math.floor(cc)
    y0 = math.floor(dd)
    dx = cc - x0
    dy = dd - y0
    qx0 = min(max(x0, 0), wp - 1)
    qx1 = min(max(x0 + 1, 0), wp - 1)
    qy0 = min(max(y0, 0), hp - 1)
    qy1 = min(max(y0 + 1, 0), hp - 1)
    wx0 = 1.0 - dx
    wy0 = 1.0 - dy
    r0 = wx0 * float(p64[qy0, qx0]) + dx * float(p64[qy0, qx1])
    r1 = wx0 * float(p64[qy1, qx0]) + dx * float(p64[qy1, qx1])
    value = wy0 * r0 + dy * r1
    weights = (wy0 * wx0, wy0 * dx, dy * wx0, dy * dx)
    cells = ((qy0, qx0), (qy0, qx1), (qy1, qx0), (qy1, qx1))
    return value, weights, cells


def prob_sample(prob: ProbMap, c: float, d: float) -> float:
    """Interpolated instance probability at probability-map coords (c, d).

    Coordinates clamp into [-0.5, dim-0.5] and the stencil clamps to the map
    border, so an all-ones map reads back exactly 1.0 everywhere.
    """
    if not (math.isfinite(c) and math.isfinite(d)):
        raise ValueError(f"probability coordinates must be finite, got ({c}, {d})")
    value, _, _ = _prob_scalar(prob.data.astype(np.float64), d, c)
    return float(np.float32(value))


# ---------------------------------------------------------------------------
# vectorized forward


def _axis_coords(lo: float, hi: float, bins: int, s: int) -> np.ndarray:
    # (bins, s) float64 sub-cell centers; elementwise identical to the scalar
    # formula lo + step * (bin + (sub + 0.5) / s)
    step = (hi - lo) / bins
    sub = (np.arange(s, dtype=np.float64) + 0.5) / s
    idx = np.arange(bins, dtype=np.float64)
    return lo + step * (idx[:, None] + sub[None, :])


def _gather_feature(f64: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    # zero padding: out-of-range neighbors contribute exactly 0.0
    hf, wf = f64.shape[1:]
    rv = (rows >= 0) & (rows < hf)
    cv = (cols >= 0) & (cols < wf)
    rc = np.clip(rows, 0, hf - 1)
    cc = np.clip(cols, 0, wf - 1)
    vals = f64[:, rc[:, None], cc[None, :]]
    return np.where(rv[:, None] & cv[None, :], vals, 0.0)


def _prob_grid(p64: np.ndarray, d: np.ndarray, c: np.ndarray) -> np.ndarray:
    # vector twin of _prob_scalar over the (row-samples, col-samples) grid
    hp, wp = p64.shape
    c = np.clip(c, -0.5, wp - 0.5)
    d = np.clip(d, -0.5, hp - 0.5)
    x0f = np.floor(c)
    y0f = np.floor(d)
    dx = c - x0f
    dy = d - y0f
    x0 = x0f.astype(np.int64)
    y0 = y0f.astype(np.int64)
    qx0 = np.clip(x0, 0, wp - 1)
    qx1 = np.clip(x0 + 1, 0, wp - 1)
    qy0 = np.clip(y0, 0, hp - 1)
    qy1 = np.clip(y0 + 1, 0, hp - 1)
    wx0 = 1.0 - dx
    wy0 = 1.0 - dy
    r0 = wx0[None, :] * p64[qy0[:, None], qx0[None, :]] + dx[None, :] * p64[qy0[:, None], qx1[None, :]]
    r1 = wx0[None, :] * p64[qy1[:, None], qx0[None, :]] + dx[None, :] * p64[qy1[:, None], qx1[None, :]]
    return wy0[:, None] * r0 + dy[:, None] * r1


def _forward_values(fdata: np.ndarray, roi: RoiBox, grid: BinGrid, pdata: np.ndarray | None) -> np.ndarray:
    ch = fdata.shape[0]
    h, w, s = grid.bin_rows, grid.bin_cols, grid.samples_per_side
    n = grid.samples_per_bin
    ax = _axis_coords(roi.x1, roi.x2, w, s).reshape(-1)  # (W*s,), ordered (w, v)
    by = _axis_coords(roi.y1, roi.y2, h, s).reshape(-1)  # (H*s,), ordered (h, u)
    x0f = np.floor(ax)
    y0f = np.floor(by)
    dx = ax - x0f
    dy = by - y0f
    x0 = x0f.astype(np.int64)
    y0 = y0f.astype(np.int64)
    wx0 = 1.0 - dx
    wy0 = 1.0 - dy

    f64 = fdata.astype(np.float64)
    v00 = _gather_feature(f64, y0, x0)
    v01 = _gather_feature(f64, y0, x0 + 1)
    v10 = _gather_feature(f64, y0 + 1, x0)
    v11 = _gather_feature(f64, y0 + 1, x0 + 1)
    w00 = wy0[:, None] * wx0[None, :]
    w01 = wy0[:, None] * dx[None, :]
    w10 = dy[:, None] * wx0[None, :]
    w11 = dy[:, None] * dx[None, :]
    val = w00 * v00 + w01 * v01 + w10 * v10 + w11 * v11  # (C, H*s, W*s) float64

    if pdata is not None:
        p64 = pdata.astype(np.float64)
        c = (ax - roi.x1) / (roi.x2 - roi.x1) * pdata.shape[1] - 0.5
        d = (by - roi.y1) / (roi.y2 - roi.y1) * pdata.shape[0] - 0.5
        val = val * _prob_grid(p64, d, c)[None, :, :]

    contrib = val.astype(np.float32).reshape(ch, h, s, w, s)
    acc = np.zeros((ch, h, w), dtype=np.float32)
    for u in range(s):
        for v in range(s):
            acc = acc + contrib[:, :, u, :, v]
    return acc / np.float32(n)


def roi_align_forward(feature: FeatureMap, roi: RoiBox, grid: BinGrid = DEFAULT_GRID) -> PooledGrid:
    """Average-pool bilinear feature samples over each bin of the RoI."""
    return PooledGrid(_forward_values(feature.data, roi, grid, None), grid)


def sa_roi_align_forward(
    feature: FeatureMap, roi: RoiBox, prob: ProbMap, grid: BinGrid = DEFAULT_GRID
) -> PooledGrid:
    """Shape-aware pooling: each sample is weighted by the interpolated
    instance probability at the matching probability-map location."""
    return PooledGrid(_forward_values(feature.data, roi, grid, prob.data), grid)


# ---------------------------------------------------------------------------
# backward


def _grad_out_array(grad_out, grid: BinGrid, what: str) -> np.ndarray:
    arr = grad_out.data if isinstance(grad_out, PooledGrid) else np.asarray(grad_out, dtype=np.float32)
    if arr.ndim != 3 or arr.shape[1:] != (grid.bin_rows, grid.bin_cols):
        raise ShapeMismatchError(
            f"{what}: gradient shape {arr.shape} does not match grid "
            f"{grid.bin_rows}x{grid.bin_cols}"
        )
    return arr


def _backward_values(
    g32: np.ndarray,
    feature_dims: tuple[int, int, int],
    roi: RoiBox,
    grid: BinGrid,
    fdata: np.ndarray | None,
    pdata: np.ndarray | None,
):
    ch, hf, wf = feature_dims
    h, w, s = grid.bin_rows, grid.bin_cols, grid.samples_per_side
    n = grid.samples_per_bin
    ax = _axis_coords(roi.x1, roi.x2, w, s)  # (W, s)
    by = _axis_coords(roi.y1, roi.y2, h, s)  # (H, s)

    gf = np.zeros((ch, hf, wf), dtype=np.float64)
    g64 = g32.astype(np.float64)

    want_prob = pdata is not None
    if want_prob:
        p64 = pdata.astype(np.float64)
        f64 = fdata.astype(np.float64)
        gp = np.zeros(pdata.shape, dtype=np.float64)
        hp, wp = pdata.shape
        ex = roi.x2 - roi.x1
        ey = roi.y2 - roi.y1
    else:
        gp = None

    for hb in range(h):
        for wb in range(w):
            gvec = g64[:, hb, wb]
            for u in range(s):
                for v in range(s):
                    a = float(ax[wb, v])
                    b = float(by[hb, u])
                    x0 = math.floor(a)
                    y0 = math.floor(b)
                    dx = a - x0
                    dy = b - y0
                    wx0 = 1.0 - dx
                    wy0 = 1.0 - dy
                    w00 = wy0 * wx0
                    w01 = wy0 * dx
                    w10 = dy * wx0
                    w11 = dy * dx

                    if want_prob:
                        c = (a - roi.x1) / ex * wp - 0.5
                        d = (b - roi.y1) / ey * hp - 0.5
                        pval, pweights, pcells = _prob_scalar(p64, d, c)
                        scale = pval / n
                    else:
                        scale = 1.0 / n

                    for row, col, wgt in (
                        (y0, x0, w00),
                        (y0, x0 + 1, w01),
                        (y0 + 1, x0, w10),
                        (y0 + 1, x0 + 1, w11),
                    ):
                        if 0 <= row < hf and 0 <= col < wf:
                            gf[:, row, col] += gvec * (wgt * scale)

                    if want_prob:
                        # adjoint of the probability factor: sum_c g_c * f_c
                        t = 0.0
                        for ci in range(ch):
                            fv00 = float(f64[ci, y0, x0]) if 0 <= y0 < hf and 0 <= x0 < wf else 0.0
                            fv01 = float(f64[ci, y0, x0 + 1]) if 0 <= y0 < hf and 0 <= x0 + 1 < wf else 0.0
                            fv10 = float(f64[ci, y0 + 1, x0]) if 0 <= y0 + 1 < hf and 0 <= x0 < wf else 0.0
                            fv11 = float(f64[ci, y0 + 1, x0 + 1]) if 0 <= y0 + 1 < hf and 0 <= x0 + 1 < wf else 0.0
                            fval = w00 * fv00 + w01 * fv01 + w10 * fv10 + w11 * fv11
                            t = t + float(gvec[ci]) * fval
                        ts = t / n
                        # border-replicated cells may coincide; keep statement order
                        gp[pcells[0]] += ts * pweights[0]
                        gp[pcells[1]] += ts * pweights[1]
                        gp[pcells[2]] += ts * pweights[2]
                        gp[pcells[3]] += ts * pweights[3]

    gf32 = gf.astype(np.float32)
    gp32 = gp.astype(np.float32) if want_prob else None
    return gf32, gp32


def roi_align_backward(
    grad_out, roi: RoiBox, grid: BinGrid, feature_dims: tuple[int, int, int]
) -> GradBundle:
    """Distribute pooled-output gradients back onto the feature map."""
    g32 = _grad_out_array(grad_out, grid, "roi_align_backward")
    ch, hf, wf = feature_dims
    if ch != g32.shape[0]:
        raise ShapeMismatchError(
            f"roi_align_backward: gradient has {g32.shape[0]} channels, feature dims say {ch}"
        )
    gf, _ = _backward_values(g32, (ch, hf, wf), roi, grid, None, None)
    return GradBundle(gf, None)


def sa_roi_align_backward(
    grad_out, feature: FeatureMap, roi: RoiBox, prob: ProbMap, grid: BinGrid
) -> GradBundle:
    """Backward pass of shape-aware pooling: gradients w.r.t. the feature map
    and the probability map."""
    g32 = _grad_out_array(grad_out, grid, "sa_roi_align_backward")
    if g32.shape[0] != feature.channels:
        raise ShapeMismatchError(
            f"sa_roi_align_backward: gradient has {g32.shape[0]} channels, "
            f"feature has {feature.channels}"
        )
    gf, gp = _backward_values(
        g32,
        (feature.channels, feature.height, feature.width),
        roi,
        grid,
        feature.data,
        prob.data,
    )
    return GradBundle(gf, gp)


# ---------------------------------------------------------------------------
# batch driver


@dataclass(frozen=True)
class PoolJob:
    """One pooling work item; prob selects the shape-aware kernel, grad_out
    (defaulting to all ones) seeds the backward pass in forward+backward mode."""

    feature: FeatureMap
    roi: RoiBox
    grid: BinGrid = DEFAULT_GRID
    prob: ProbMap | None = None
    grad_out: PooledGrid | None = None


@dataclass(frozen=True)
class JobResult:
    output: PooledGrid | None
    grads: GradBundle | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def resolve_workers(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    if workers < 1:
        raise ValueError(f"worker count must be >= 1, got {workers}")
    return workers


def _run_job(job: PoolJob, mode: str) -> JobResult:
    try:
        if job.prob is not None:
            out = sa_roi_align_forward(job.feature, job.roi, job.prob, job.grid)
        else:
            out = roi_align_forward(job.feature, job.roi, job.grid)
        grads = None
        if mode == "forward+backward":
            if job.grad_out is not None:
                seed = job.grad_out
            else:
                seed = PooledGrid(
                    np.ones((job.feature.channels, job.grid.bin_rows, job.grid.bin_cols), np.float32),
                    job.grid,
                )
            if job.prob is not None:
                grads = sa_roi_align_backward(seed, job.feature, job.roi, job.prob, job.grid)
            else:
                grads = roi_align_backward(
                    seed, job.roi, job.grid,
                    (job.feature.channels, job.feature.height, job.feature.width),
                )
        return JobResult(out, grads, None)
    except Exception as exc:  # per-job isolation: one bad job must not abort the batch
        return JobResult(None, None, f"{type(exc).__name__}: {exc}")


def batch_run(jobs, mode: str = "forward", workers: int | None = None) -> list[JobResult]:
    """Run pooling jobs, optionally in a thread pool.

    Results are bit-identical to sequential execution for any worker count:
    jobs are pure functions of immutable inputs and parallelism never splits
    one bin's accumulation.
    """
    if mode not in ("forward", "forward+backward"):
        raise ValueError(f"unknown mode {mode!r}")
    workers = resolve_workers(workers)
    jobs = list(jobs)
    if workers == 1 or len(jobs) <= 1:
        return [_run_job(j, mode) for j in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda j: _run_job(j, mode), jobs))
