"""Refining-stage arithmetic: mask-feature fusion, score fusion,
pseudo-foreground-label assignment, class-mask selection, IoU and NMS."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatchError
from .tensors import PooledGrid, ProbMap, RoiBox


@dataclass(frozen=True)
class ClassScores:
    """Pre-softmax activations over classes, one of which is background."""

    scores: np.ndarray
    background_index: int = 0

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.scores, dtype=np.float64))
        if arr.ndim != 1 or arr.size < 2:
            raise ValueError(f"need a 1-d score vector of length >= 2, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("scores must be finite")
        if not 0 <= self.background_index < arr.size:
            raise ValueError(
                f"background index {self.background_index} out of range for {arr.size} classes"
            )
        arr.flags.writeable = False
        object.__setattr__(self, "scores", arr)

    def __len__(self) -> int:
        return self.scores.size


@dataclass(frozen=True)
class FusionWeight:
    """Relative weight of the refining-stage score in the fused score."""

    alpha: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and self.alpha >= 0.0):
            raise ValueError(f"alpha must be finite and >= 0, got {self.alpha}")


@dataclass(frozen=True)
class MaskStack:
    """Per-foreground-class probability maps of identical dims.

    maps[i] belongs to the i-th foreground class in ascending class-index
    order (the background class has no map).
    """

    maps: tuple[ProbMap, ...]
    background_index: int = 0

    def __post_init__(self):
        maps = tuple(self.maps)
        if not maps:
            raise ValueError("mask stack needs at least one foreground map")
        dims = (maps[0].height, maps[0].width)
        for m in maps[1:]:
            if (m.height, m.width) != dims:
                raise ShapeMismatchError(
                    f"mask stack dims differ: {dims} vs {(m.height, m.width)}"
                )
        if self.background_index < 0:
            raise ValueError("background index must be >= 0")
        object.__setattr__(self, "maps", maps)

    @property
    def num_classes(self) -> int:
        # foreground classes plus background
        return len(self.maps) + 1


def fuse_mask_features(pooled: PooledGrid, f_minus: PooledGrid) -> PooledGrid:
    """Element-wise sum of freshly pooled features with the carried-over
    intermediate mask features."""
    if pooled.data.shape != f_minus.data.shape:
        raise ShapeMismatchError(
            f"cannot fuse pooled grids of shapes {pooled.data.shape} and {f_minus.data.shape}"
        )
    return PooledGrid(pooled.data + f_minus.data, pooled.grid)


def fuse_scores(sb: ClassScores, sr: ClassScores, weight: FusionWeight = FusionWeight()) -> ClassScores:
    """Weighted average (sb + alpha*sr) / (1 + alpha) of base and refined scores.

    Evaluated as sb + (sr - sb) * alpha/(1+alpha) so that alpha = 0 returns
    sb exactly and equal inputs are an exact fixed point.
    """
    if len(sb) != len(sr):
        raise ShapeMismatchError(f"score lengths differ: {len(sb)} vs {len(sr)}")
    if sb.background_index != sr.background_index:
        raise ShapeMismatchError(
            f"background indices differ: {sb.background_index} vs {sr.background_index}"
        )
    t = weight.alpha / (1.0 + weight.alpha)
    fused = sb.scores + (sr.scores - sb.scores) * t
    return ClassScores(fused, sb.background_index)


def assign_pseudo_label(s: ClassScores) -> int:
    """Foreground class a background-labeled RoI borrows its mask from.

    Returns the argmax class when it is foreground, otherwise the foreground
    class with the largest score; ties break toward the lowest index.  Never
    returns the background class.
    """
    top = int(np.argmax(s.scores))  # argmax takes the first maximum: lowest index wins ties
    if top != s.background_index:
        return top
    masked = s.scores.copy()
    masked[s.background_index] = -np.inf
    return int(np.argmax(masked))


def select_class_mask(stack: MaskStack, label: int) -> ProbMap:
    """Probability map of the given foreground class."""
    if label == stack.background_index:
        raise ValueError("background class has no mask")
    if not 0 <= label < stack.num_classes:
        raise ValueError(f"class {label} out of range for {stack.num_classes} classes")
    slot = label if label < stack.background_index else label - 1
    return stack.maps[slot]


def iou(a: RoiBox, b: RoiBox) -> float:
    """Intersection over union of two boxes; 0 when disjoint."""
    ix = min(a.x2, b.x2) - max(a.x1, b.x1)
    iy = min(a.y2, b.y2) - max(a.y1, b.y1)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


def nms(boxes: list[RoiBox], scores, threshold: float) -> list[int]:
    """Greedy non-maximum suppression.

    Repeatedly keeps the highest-scoring remaining box (score ties break
    toward the lowest index) and suppresses boxes whose IoU with it is
    strictly greater than the threshold.  Returns kept indices in
    suppression order.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1 or scores.size != len(boxes):
        raise ShapeMismatchError(
            f"{len(boxes)} boxes but {scores.size} scores"
        )
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    order = sorted(range(len(boxes)), key=lambda i: (-scores[i], i))
    kept: list[int] = []
    alive = [True] * len(boxes)
    for i in order:
        if not alive[i]:
            continue
        kept.append(i)
        for j in order:
            if alive[j] and j != i and iou(boxes[i], boxes[j]) > threshold:
                alive[j] = False
    return kept
