"""Slow, obviously-correct 64-bit reference implementations and the
finite-difference gradient checker used to validate the fast kernels.

Everything here is deliberately naive: scalar nested loops, float64
throughout, no vectorization, no accumulation tricks.  Only the four grid
cells with a nonzero max(0, 1-|.|) coefficient are visited per sample, since
every other coefficient is exactly zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .tensors import BinGrid, FeatureMap, PooledGrid, ProbMap, RoiBox

REL_FLOOR = 1e-6


def relative_error(analytic: float, numeric: float) -> float:
    """|ga - gn| / max(1e-6, |ga| + |gn|), the floor guarding true zeros."""
    return abs(analytic - numeric) / max(REL_FLOOR, abs(analytic) + abs(numeric))


def _bilinear64(f64: np.ndarray, channel: int, a: float, b: float) -> float:
    hf, wf = f64.shape[1:]
    j0 = math.floor(b)
    k0 = math.floor(a)
    total = 0.0
    for j in (j0, j0 + 1):
        wy = 1.0 - abs(b - j)
        if wy <= 0.0 or not 0 <= j < hf:
            continue
        for k in (k0, k0 + 1):
            wx = 1.0 - abs(a - k)
            if wx <= 0.0 or not 0 <= k < wf:
                continue
            total += wy * wx * float(f64[channel, j, k])
    return total


def _prob64(p64: np.ndarray, c: float, d: float) -> float:
    # same border semantics as the kernel: coordinates clamp into
    # [-0.5, dim-0.5], the stencil clamps to the border, rows interpolate
    # before columns combine
    hp, wp = p64.shape
    if c < -0.5:
        c = -0.5
    elif c > wp - 0.5:
        c = wp - 0.5
    if d < -0.5:
        d = -0.5
    elif d > hp - 0.5:
        d = hp - 0.5
    x0 = math.floor(c)
    y0 = math.floor(d)
    dx = c - x0
    dy = d - y0
    xa = min(max(x0, 0), wp - 1)
    xb = min(max(x0 + 1, 0), wp - 1)
    ya = min(max(y0, 0), hp - 1)
    yb = min(max(y0 + 1, 0), hp - 1)
    row0 = (1.0 - dx) * float(p64[ya, xa]) + dx * float(p64[ya, xb])
    row1 = (1.0 - dx) * float(p64[yb, xa]) + dx * float(p64[yb, xb])
    return (1.0 - dy) * row0 + dy * row1


def _pool64(
    f64: np.ndarray, roi: RoiBox, grid: BinGrid, p64: np.ndarray | None
) -> np.ndarray:
    ch = f64.shape[0]
    h, w, s = grid.bin_rows, grid.bin_cols, grid.samples_per_side
    n = grid.samples_per_bin
    bin_w = (roi.x2 - roi.x1) / w
    bin_h = (roi.y2 - roi.y1) / h
    out = np.zeros((ch, h, w), dtype=np.float64)
    for hb in range(h):
        for wb in range(w):
            for u in range(s):
                for v in range(s):
                    a = roi.x1 + bin_w * (wb + (v + 0.5) / s)
                    b = roi.y1 + bin_h * (hb + (u + 0.5) / s)
                    if p64 is not None:
                        hp, wp = p64.shape
                        c = (a - roi.x1) / (roi.x2 - roi.x1) * wp - 0.5
                        d = (b - roi.y1) / (roi.y2 - roi.y1) * hp - 0.5
                        p = _prob64(p64, c, d)
                    else:
                        p = 1.0
                    for ci in range(ch):
                        f = _bilinear64(f64, ci, a, b)
                        out[ci, hb, wb] += f * p / n
    return out


def oracle_roi_align(feature: FeatureMap, roi: RoiBox, grid: BinGrid) -> PooledGrid:
    """Reference pooling: float64 transliteration of sample-average pooling."""
    return PooledGrid(_pool64(feature.data.astype(np.float64), roi, grid, None), grid)


def oracle_sa_roi_align(
    feature: FeatureMap, roi: RoiBox, prob: ProbMap, grid: BinGrid
) -> PooledGrid:
    """Reference shape-aware pooling in float64."""
    return PooledGrid(
        _pool64(
            feature.data.astype(np.float64), roi, grid, prob.data.astype(np.float64)
        ),
        grid,
    )


def finite_diff_grad(loss, x, index, eps: float) -> float:
    """Central difference (L(x + eps*e) - L(x - eps*e)) / (2*eps) at one coordinate."""
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    base = np.array(x, dtype=np.float64)
    xp = base.copy()
    xm = base.copy()
    xp[index] += eps
    xm[index] -= eps
    return (float(loss(xp)) - float(loss(xm))) / (2.0 * eps)


@dataclass(frozen=True)
class GradCheckReport:
    kernel: str
    max_rel_error: float
    worst_tensor: str
    worst_index: tuple
    analytic_value: float
    numeric_value: float
    eps: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance

    def as_dict(self) -> dict:
        return {
            "kernel": self.kernel,
            "max_rel_error": self.max_rel_error,
            "worst_tensor": self.worst_tensor,
            "worst_index": list(self.worst_index),
            "analytic_value": self.analytic_value,
            "numeric_value": self.numeric_value,
            "eps": self.eps,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


def _adjoint_weights(shape, seed: int) -> np.ndarray:
    # fixed random weights reduce the pooled output to a scalar loss, so one
    # probe checks a full Jacobian-vector product; float32 values keep the
    # analytic (float32) and numeric (float64) paths fed with identical reals
    rng = np.random.Generator(np.random.PCG64(seed))
    return (rng.random(shape, dtype=np.float32) * np.float32(2) - np.float32(1)).astype(np.float32)


def gradcheck(
    kernel: str,
    feature: FeatureMap,
    roi: RoiBox,
    grid: BinGrid,
    prob: ProbMap | None = None,
    *,
    eps: float = 1e-3,
    tolerance: float = 1e-3,
    adjoint_seed: int = 0,
    backward_fn=None,
) -> GradCheckReport:
    """Compare every analytic gradient coordinate against finite differences.

    kernel is "roialign" (gradient w.r.t. the feature map) or "sa" (gradients
    w.r.t. both the feature map and the probability map).  The numeric side
    differentiates the float64 oracle; probability probes are clipped into
    [0, 1], falling back to one-sided differences at the boundary.
    """
    from . import kernels as _kernels

    if kernel not in ("roialign", "sa"):
        raise ValueError(f"unknown kernel {kernel!r}")
    if kernel == "sa" and prob is None:
        raise ValueError("sa gradcheck needs a probability map")
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")

    out_shape = (feature.channels, grid.bin_rows, grid.bin_cols)
    weights = _adjoint_weights(out_shape, adjoint_seed)
    w64 = weights.astype(np.float64)

    if backward_fn is None:
        if kernel == "sa":
            backward_fn = lambda: _kernels.sa_roi_align_backward(
                PooledGrid(weights, grid), feature, roi, prob, grid
            )
        else:
            backward_fn = lambda: _kernels.roi_align_backward(
                PooledGrid(weights, grid), roi, grid,
                (feature.channels, feature.height, feature.width),
            )
    bundle = backward_fn()

    f64 = feature.data.astype(np.float64)
    p64 = prob.data.astype(np.float64) if prob is not None else None

    def loss_given_feature(farr: np.ndarray) -> float:
        return float(np.sum(w64 * _pool64(farr, roi, grid, p64)))

    def loss_given_prob(parr: np.ndarray) -> float:
        return float(np.sum(w64 * _pool64(f64, roi, grid, parr)))

    worst = (-1.0, "feature", (), 0.0, 0.0)

    analytic_f = bundle.grad_feature.astype(np.float64)
    for index in np.ndindex(f64.shape):
        numeric = finite_diff_grad(loss_given_feature, f64, index, eps)
        analytic = float(analytic_f[index])
        err = relative_error(analytic, numeric)
        if err > worst[0]:
            worst = (err, "feature", index, analytic, numeric)

    if kernel == "sa":
        analytic_p = bundle.grad_prob.astype(np.float64)
        base_loss = None
        for index in np.ndindex(p64.shape):
            x = float(p64[index])
            if x + eps <= 1.0 and x - eps >= 0.0:
                numeric = finite_diff_grad(loss_given_prob, p64, index, eps)
            else:
                # one-sided difference keeps the probe inside [0, 1]
                if base_loss is None:
                    base_loss = loss_given_prob(p64)
                shifted = p64.copy()
                if x + eps > 1.0:
                    shifted[index] -= eps
                    numeric = (base_loss - loss_given_prob(shifted)) / eps
                else:
                    shifted[index] += eps
                    numeric = (loss_given_prob(shifted) - base_loss) / eps
            analytic = float(analytic_p[index])
            err = relative_error(analytic, numeric)
            if err > worst[0]:
                worst = (err, "prob", index, analytic, numeric)

    err, tensor, index, analytic, numeric = worst
    return GradCheckReport(
        kernel=kernel,
        max_rel_error=err,
        worst_tensor=tensor,
        worst_index=tuple(int(i) for i in index),
        analytic_value=analytic,
        numeric_value=numeric,
        eps=eps,
        tolerance=tolerance,
    )
