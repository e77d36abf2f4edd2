"""Deterministic generators for random kernel instances and for synthetic
huddled-instance scenarios.

Every generator is a pure function of its parameters and a seed; randomness
comes from numpy's PCG64 so cases reproduce across machines and releases.

A huddle scenario places two rectangular instances side by side.  Instance A
carries a unit signature vector v_a across channels, instance B carries an
orthogonal v_b, and two heavily overlapping RoIs straddle both instances the
way region proposals do when objects crowd together.  Plain pooling then
extracts nearly identical features for the two RoIs while mask-guided
pooling separates them, which is what feature_separability measures.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels, refine
from .errors import InfeasibleGeometryError, ZeroVectorError
from .io import write_tensor_file
from .tensors import BinGrid, FeatureMap, ProbMap, RoiBox


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class RandomCase:
    """A reproducible kernel instance: feature map, RoI, grid, optional P."""

    seed: int
    feature: FeatureMap
    roi: RoiBox
    grid: BinGrid
    prob: ProbMap | None = None


def _draw_roi(rng: np.random.Generator, height: int, width: int) -> RoiBox:
    # keep at least half of the box over the map; partial overhang is fine
    for _ in range(64):
        bw = rng.uniform(1.0, max(1.5, 1.1 * width))
        bh = rng.uniform(1.0, max(1.5, 1.1 * height))
        x1 = rng.uniform(-0.4 * width, width - 0.1)
        y1 = rng.uniform(-0.4 * height, height - 0.1)
        box = RoiBox(x1, y1, x1 + bw, y1 + bh)
        ox = min(box.x2, width - 1.0) - max(box.x1, 0.0)
        oy = min(box.y2, height - 1.0) - max(box.y1, 0.0)
        if ox > 0 and oy > 0 and (ox * oy) / box.area >= 0.5:
            return box
    # deterministic fallback: a centered interior box
    return RoiBox(0.25 * width, 0.25 * height, 0.75 * width, 0.75 * height)


def gen_random_case(
    seed: int,
    *,
    channels: int = 3,
    height: int = 12,
    width: int = 12,
    grid: tuple[int, int, int] = (7, 7, 2),
    prob_dims: tuple[int, int] | None = None,
) -> RandomCase:
    """Seeded uniform random instance; prob_dims=None skips the probability map."""
    if min(channels, height, width) < 1:
        raise ValueError(f"dims must be positive, got C={channels} H={height} W={width}")
    if prob_dims is not None and min(prob_dims) < 1:
        raise ValueError(f"probability dims must be positive, got {prob_dims}")
    rng = _rng(seed)
    feature = FeatureMap(rng.random((channels, height, width), dtype=np.float32))
    roi = _draw_roi(rng, height, width)
    prob = ProbMap(rng.random(prob_dims, dtype=np.float32)) if prob_dims is not None else None
    return RandomCase(seed, feature, roi, BinGrid(*grid), prob)


@dataclass(frozen=True)
class HuddleScenario:
    """Two crowded instances with straddling RoIs, per-instance binary masks
    and orthonormal channel signatures."""

    feature: FeatureMap
    mask_a: ProbMap
    mask_b: ProbMap
    gt_box_a: RoiBox
    gt_box_b: RoiBox
    roi_1: RoiBox
    roi_2: RoiBox
    sigma: float
    seed: int
    signature_a: np.ndarray
    signature_b: np.ndarray


def _orthonormal_pair(rng: np.random.Generator, dim: int) -> tuple[np.ndarray, np.ndarray]:
    va = rng.standard_normal(dim)
    va /= np.linalg.norm(va)
    vb = rng.standard_normal(dim)
    vb -= va * np.dot(va, vb)
    nb = np.linalg.norm(vb)
    if nb < 1e-9:  # essentially impossible, but stay deterministic
        vb = np.roll(va, 1)
        vb -= va * np.dot(va, vb)
        nb = np.linalg.norm(vb)
    vb /= nb
    return va.astype(np.float64), vb.astype(np.float64)


def gen_huddle(
    *,
    instance_width: int = 16,
    instance_height: int = 24,
    gap: int = 2,
    margin: int = 6,
    signature_dim: int = 8,
    sigma: float = 0.0,
    seed: int = 0,
    map_height: int | None = None,
    map_width: int | None = None,
) -> HuddleScenario:
    """Construct a huddle scenario satisfying all of its invariants.

    RoI 1 covers instance A and straddles into B; RoI 2 mirrors it.  The
    straddle depth is chosen so iou(roi_i, gt_i) >= 0.5 (detector assignment)
    and iou(roi_1, roi_2) >= 0.7 (the "highly similar RoIs" condition) both
    hold; gaps wider than ~0.35x the instance width make that impossible.
    """
    if gap < 0:
        raise InfeasibleGeometryError(f"gap must be >= 0, got {gap}")
    if instance_width < 2 or instance_height < 2:
        raise InfeasibleGeometryError("instances must be at least 2 cells wide and tall")
    if signature_dim < 2:
        raise InfeasibleGeometryError("need at least 2 channels for orthogonal signatures")
    if sigma < 0:
        raise InfeasibleGeometryError(f"noise sigma must be >= 0, got {sigma}")

    wi, hi = instance_width, instance_height
    width_needed = 2 * margin + 2 * wi + gap
    height_needed = 2 * margin + hi
    wf = width_needed if map_width is None else map_width
    hf = height_needed if map_height is None else map_height
    if wf < width_needed or hf < height_needed:
        raise InfeasibleGeometryError(
            f"map {hf}x{wf} too small for two {hi}x{wi} instances "
            f"(needs at least {height_needed}x{width_needed})"
        )

    # straddle depth: delta_min keeps the RoIs >= 0.7 IoU with each other,
    # delta_max keeps each RoI >= 0.5 IoU with its ground-truth box
    delta_min = 0.7 * wi - 0.15 * gap
    delta_max = float(wi - gap)
    if delta_min > delta_max:
        raise InfeasibleGeometryError(
            f"gap {gap} too wide relative to instance width {wi}: "
            "straddling RoIs cannot reach 0.7 IoU"
        )
    delta = min(max(0.85 * wi, delta_min), delta_max)

    xa1 = float(margin)
    xa2 = xa1 + wi
    xb1 = xa2 + gap
    xb2 = xb1 + wi
    y1 = float(margin)
    y2 = y1 + hi

    gt_a = RoiBox(xa1, y1, xa2, y2)
    gt_b = RoiBox(xb1, y1, xb2, y2)
    roi_1 = RoiBox(xa1, y1, xa2 + gap + delta, y2)
    roi_2 = RoiBox(xb1 - gap - delta, y1, xb2, y2)

    rng = _rng(seed)
    va, vb = _orthonormal_pair(rng, signature_dim)

    feature = np.zeros((signature_dim, hf, wf), dtype=np.float64)
    cols = np.arange(wf, dtype=np.float64)
    rows = np.arange(hf, dtype=np.float64)
    in_rows = (rows >= y1) & (rows < y2)
    in_a = (cols >= xa1) & (cols < xa2)
    in_b = (cols >= xb1) & (cols < xb2)
    sup_a = in_rows[:, None] & in_a[None, :]
    sup_b = in_rows[:, None] & in_b[None, :]
    feature += va[:, None, None] * sup_a[None, :, :]
    feature += vb[:, None, None] * sup_b[None, :, :]
    if sigma > 0:
        feature += sigma * rng.standard_normal((signature_dim, hf, wf))
    feature_map = FeatureMap(feature.astype(np.float32))

    mask_a = ProbMap(sup_a.astype(np.float32))
    mask_b = ProbMap(sup_b.astype(np.float32))

    scenario = HuddleScenario(
        feature=feature_map,
        mask_a=mask_a,
        mask_b=mask_b,
        gt_box_a=gt_a,
        gt_box_b=gt_b,
        roi_1=roi_1,
        roi_2=roi_2,
        sigma=sigma,
        seed=seed,
        signature_a=va,
        signature_b=vb,
    )
    _check_scenario(scenario)
    return scenario


def _overlaps(roi: RoiBox, box: RoiBox) -> bool:
    return min(roi.x2, box.x2) > max(roi.x1, box.x1) and min(roi.y2, box.y2) > max(roi.y1, box.y1)


def _check_scenario(s: HuddleScenario) -> None:
    if np.minimum(s.mask_a.data, s.mask_b.data).any():
        raise InfeasibleGeometryError("instance masks overlap")
    for roi in (s.roi_1, s.roi_2):
        if not (_overlaps(roi, s.gt_box_a) and _overlaps(roi, s.gt_box_b)):
            raise InfeasibleGeometryError("straddling RoI misses an instance support")
    if refine.iou(s.roi_1, s.gt_box_a) < 0.5 or refine.iou(s.roi_2, s.gt_box_b) < 0.5:
        raise InfeasibleGeometryError("RoI vs ground-truth IoU fell below 0.5")
    if refine.iou(s.roi_1, s.roi_2) < 0.7:
        raise InfeasibleGeometryError("straddling RoIs fell below 0.7 IoU")


def crop_mask_to_roi(mask: ProbMap, roi: RoiBox, prob_dims: tuple[int, int] = (28, 28)) -> ProbMap:
    """Resample a map-frame mask into the RoI frame by bilinear sampling.

    Cell (j, k) of the result reads the mask at the feature-map point that
    probability coordinate (k, j) maps back to, so the crop is exactly
    aligned with how the shape-aware kernel will consume it.
    """
    hp, wp = prob_dims
    as_feature = FeatureMap(mask.data[None, :, :])
    ex = roi.x2 - roi.x1
    ey = roi.y2 - roi.y1
    out = np.empty((hp, wp), dtype=np.float32)
    for j in range(hp):
        b = roi.y1 + (j + 0.5) * ey / hp
        for k in range(wp):
            a = roi.x1 + (k + 0.5) * ex / wp
            out[j, k] = kernels.bilinear_sample(as_feature, a, b, 0)
    return ProbMap(out)


def _cosine(u: np.ndarray, v: np.ndarray) -> float:
    u = u.astype(np.float64).ravel()
    v = v.astype(np.float64).ravel()
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise ZeroVectorError("cosine similarity undefined: pooled features are all zero")
    return float(np.dot(u, v) / (nu * nv))


def feature_separability(
    scenario: HuddleScenario,
    grid: BinGrid = kernels.DEFAULT_GRID,
    prob_dims: tuple[int, int] = (28, 28),
) -> tuple[float, float]:
    """Cosine similarity between the two straddling RoIs' pooled features.

    Returns (cos_plain, cos_shaped): plain pooling vs mask-guided pooling
    with each RoI guided by its own instance's mask.
    """
    plain_1 = kernels.roi_align_forward(scenario.feature, scenario.roi_1, grid)
    plain_2 = kernels.roi_align_forward(scenario.feature, scenario.roi_2, grid)
    crop_1 = crop_mask_to_roi(scenario.mask_a, scenario.roi_1, prob_dims)
    crop_2 = crop_mask_to_roi(scenario.mask_b, scenario.roi_2, prob_dims)
    shaped_1 = kernels.sa_roi_align_forward(scenario.feature, scenario.roi_1, crop_1, grid)
    shaped_2 = kernels.sa_roi_align_forward(scenario.feature, scenario.roi_2, crop_2, grid)
    return _cosine(plain_1.data, plain_2.data), _cosine(shaped_1.data, shaped_2.data)


def export_scenario(scenario: HuddleScenario, directory) -> dict:
    """Write scenario tensors (SARA format) and geometry (JSON) to a directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_tensor_file(directory / "feature.sara", scenario.feature)
    write_tensor_file(directory / "mask_a.sara", scenario.mask_a)
    write_tensor_file(directory / "mask_b.sara", scenario.mask_b)

    def box(b: RoiBox, role: str) -> dict:
        return {"x1": b.x1, "y1": b.y1, "x2": b.x2, "y2": b.y2, "role": role}

    geometry = {
        "seed": scenario.seed,
        "sigma": scenario.sigma,
        "signature_dim": int(scenario.feature.channels),
        "boxes": [
            box(scenario.gt_box_a, "gt_a"),
            box(scenario.gt_box_b, "gt_b"),
            box(scenario.roi_1, "roi_1"),
            box(scenario.roi_2, "roi_2"),
        ],
    }
    with open(directory / "scenario.json", "w") as fh:
        json.dump(geometry, fh, indent=2)
    return geometry


__all__ = [
    "RandomCase",
    "HuddleScenario",
    "gen_random_case",
    "gen_huddle",
    "crop_mask_to_roi",
    "feature_separability",
    "export_scenario",
]
