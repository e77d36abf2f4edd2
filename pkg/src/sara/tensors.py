"""Dense tensor containers and geometry types.

Tensors are float32, row-major, channel-first where a channel axis exists.
Every container is immutable after construction (the backing numpy buffer is
marked read-only), so instances can be shared freely across worker threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    LengthMismatchError,
    NonFiniteValueError,
    RangeViolationError,
)


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


def _positive_dims(dims, what: str) -> None:
    for d in dims:
        if int(d) != d or d < 1:
            raise ValueError(f"{what}: dimensions must be positive integers, got {tuple(dims)}")


@dataclass(frozen=True)
class FeatureMap:
    """Backbone feature map: float32 array of shape (channels, height, width)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.data, dtype=np.float32))
        if arr.ndim != 3:
            raise LengthMismatchError(f"feature map must be 3-d (C, H, W), got shape {arr.shape}")
        if min(arr.shape) < 1:
            raise ValueError(f"feature map dimensions must be positive, got {arr.shape}")
        if not np.isfinite(arr).all():
            raise NonFiniteValueError("feature map contains NaN or infinity")
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class ProbMap:
    """Instance-of-interest probability map: float32 array of shape (H, W), entries in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.data, dtype=np.float32))
        if arr.ndim != 2:
            raise LengthMismatchError(f"probability map must be 2-d (H, W), got shape {arr.shape}")
        if min(arr.shape) < 1:
            raise ValueError(f"probability map dimensions must be positive, got {arr.shape}")
        ok = (arr >= 0.0) & (arr <= 1.0)  # NaN fails both comparisons
        if not ok.all():
            bad = arr[~ok].ravel()[0]
            raise RangeViolationError(f"probability entry {bad!r} outside [0, 1]")
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class RoiBox:
    """Axis-aligned rectangle in continuous feature-map coordinates.

    x maps to columns and y to rows; the origin sits at the center of the
    top-left feature-map cell, so grid point (row j, col k) lies at
    continuous (x=k, y=j).  Boxes may extend beyond the map; sampling
    handles out-of-range coordinates.
    """

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        coords = (self.x1, self.y1, self.x2, self.y2)
        if not all(math.isfinite(c) for c in coords):
            raise NonFiniteValueError(f"box coordinates must be finite, got {coords}")
        if not (self.x2 > self.x1 and self.y2 > self.y1):
            raise ValueError(f"box must have strictly positive extent, got {coords}")

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)


@dataclass(frozen=True)
class BinGrid:
    """Pooling configuration: H x W bins, s x s sampling points per bin (N = s**2)."""

    bin_rows: int
    bin_cols: int
    samples_per_side: int = 2

    def __post_init__(self):
        _positive_dims((self.bin_rows, self.bin_cols, self.samples_per_side), "bin grid")

    @property
    def samples_per_bin(self) -> int:
        return self.samples_per_side * self.samples_per_side


@dataclass(frozen=True)
class PooledGrid:
    """Pooled output: array of shape (channels, bin_rows, bin_cols).

    Kernel outputs are float32; the oracle produces float64 grids.  The grid
    that produced the pooling is attached when known.
    """

    data: np.ndarray
    grid: BinGrid | None = None

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        arr = np.ascontiguousarray(arr)
        if arr.ndim != 3:
            raise LengthMismatchError(f"pooled grid must be 3-d (C, H, W), got shape {arr.shape}")
        if min(arr.shape) < 1:
            raise ValueError(f"pooled grid dimensions must be positive, got {arr.shape}")
        if not np.isfinite(arr).all():
            raise NonFiniteValueError("pooled grid contains NaN or infinity")
        if self.grid is not None and arr.shape[1:] != (self.grid.bin_rows, self.grid.bin_cols):
            raise LengthMismatchError(
                f"pooled data {arr.shape} does not match grid "
                f"{self.grid.bin_rows}x{self.grid.bin_cols}"
            )
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def bin_rows(self) -> int:
        return self.data.shape[1]

    @property
    def bin_cols(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class GradBundle:
    """Gradients of a scalar loss: w.r.t. the feature map and, for the
    shape-aware kernel, w.r.t. the probability map."""

    grad_feature: np.ndarray
    grad_prob: np.ndarray | None = None

    def __post_init__(self):
        gf = np.ascontiguousarray(np.asarray(self.grad_feature, dtype=np.float32))
        if gf.ndim != 3:
            raise LengthMismatchError(f"feature gradient must be 3-d, got shape {gf.shape}")
        if not np.isfinite(gf).all():
            raise NonFiniteValueError("feature gradient contains NaN or infinity")
        object.__setattr__(self, "grad_feature", _freeze(gf))
        if self.grad_prob is not None:
            gp = np.ascontiguousarray(np.asarray(self.grad_prob, dtype=np.float32))
            if gp.ndim != 2:
                raise LengthMismatchError(f"probability gradient must be 2-d, got shape {gp.shape}")
            if not np.isfinite(gp).all():
                raise NonFiniteValueError("probability gradient contains NaN or infinity")
            object.__setattr__(self, "grad_prob", _freeze(gp))


def validate_feature_map(channels: int, height: int, width: int, data) -> FeatureMap:
    """Validate raw dims + flat array into a FeatureMap.

    Raises LengthMismatchError when the array size disagrees with the dims
    and NonFiniteValueError on NaN/Inf entries.
    """
    _positive_dims((channels, height, width), "feature map")
    arr = np.asarray(data, dtype=np.float32).reshape(-1)
    expected = channels * height * width
    if arr.size != expected:
        raise LengthMismatchError(
            f"feature map data has {arr.size} values, dims {channels}x{height}x{width} "
            f"require {expected}"
        )
    return FeatureMap(arr.reshape(channels, height, width))


def validate_prob_map(height: int, width: int, data) -> ProbMap:
    """Validate raw dims + flat array into a ProbMap (entries must lie in [0, 1])."""
    _positive_dims((height, width), "probability map")
    arr = np.asarray(data, dtype=np.float32).reshape(-1)
    expected = height * width
    if arr.size != expected:
        raise LengthMismatchError(
            f"probability map data has {arr.size} values, dims {height}x{width} "
            f"require {expected}"
        )
    return ProbMap(arr.reshape(height, width))
