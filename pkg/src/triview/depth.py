"""Cost-volume scoring and coarse-to-fine depth estimation for the target view.

Scores are grouped feature correlations averaged over the valid view pairs;
depth is regressed as a temperature-weighted softmax over the hypotheses.
The pyramid driver sweeps a fixed coarse grid at the deepest level and then
refines level by level inside a doubling window, with the residual hard-
clamped to the window so the offset constraint holds exactly.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .camera import CameraPose
from .config import PipelineConfig
from .fuse import (
    ViewWeights,
    confidence_weights,
    downsample_weights,
    view_meta,
)
from .pyramid import AlphaMap, DepthMap, FeaturePyramid, CORRELATION_GROUPS
from .sweep import (
    HypothesisSet,
    WarpedFeature,
    coarse_hypotheses,
    refinement_hypotheses,
    relative_terms,
    warp_at_depth,
    window_epsilon,
)

# Row chunks per hypothesis are fixed so the task split (and therefore every
# floating-point reduction) is independent of the thread count.
ROW_CHUNKS = 4


class BadGrouping(ValueError):
    """Channel count is not divisible by the group count."""


class ShapeMismatch(ValueError):
    """Warped views disagree in shape."""


class LevelMismatch(ValueError):
    """Previous depth map is not one level coarser."""


@dataclass(frozen=True)
class CostVolume:
    """Per-pixel correlation scores over depth hypotheses at one level."""

    level: int
    scores: np.ndarray
    validity: np.ndarray

    def __post_init__(self):
        if self.scores.shape != self.validity.shape:
            raise ShapeMismatch("scores and validity must align")


@dataclass(frozen=True)
class ResidualStats:
    """Magnitude summary of one refinement level's depth residual."""

    level: int
    mean_abs: float
    max_abs: float
    offset_violation: float


def group_correlation(fa: np.ndarray, fb: np.ndarray, groups: int = CORRELATION_GROUPS) -> np.ndarray:
    """Group-wise correlation of two feature vectors (or stacks of them).

    Channels are split into ``groups`` equal groups; each group's score is
    the mean of the elementwise products of its channels.

    Args:
        fa, fb: (..., C) feature arrays with matching shapes.

    Returns:
        (..., groups) scores.

    Raises:
        BadGrouping: If C is not divisible by ``groups``.
    """
    fa = np.asarray(fa, dtype=np.float64)
    fb = np.asarray(fb, dtype=np.float64)
    if fa.shape != fb.shape:
        raise ShapeMismatch(f"feature shapes differ: {fa.shape} vs {fb.shape}")
    channels = fa.shape[-1]
    if channels % groups != 0:
        raise BadGrouping(f"{channels} channels not divisible into {groups} groups")
    prod = (fa * fb).reshape(fa.shape[:-1] + (groups, channels // groups))
    return prod.mean(axis=-1)


def build_cost_volume(warped: Sequence[Sequence[WarpedFeature]], level: int = 0) -> CostVolume:
    """Aggregate warped views into per-hypothesis scores.

    Args:
        warped: ``warped[view][k]`` for 3 views and K hypotheses, all at one
            level.
        level: Pyramid level tag for the resulting volume.

    Returns:
        CostVolume whose score is the grouped correlation averaged over all
        groups and over the unordered pairs with both members valid; the
        validity weight is (valid pairs) / 3 and scores are zero where no
        pair is valid.
    """
    if len(warped) != 3:
        raise ShapeMismatch(f"expected 3 views, got {len(warped)}")
    count = len(warped[0])
    if any(len(view) != count for view in warped):
        raise ShapeMismatch("views disagree on hypothesis count")
    shape = warped[0][0].feature.shape
    level_shape = shape[:2]
    scores = np.zeros((count,) + level_shape, dtype=np.float32)
    validity = np.zeros((count,) + level_shape, dtype=np.float32)
    for k in range(count):
        acc = np.zeros(level_shape)
        pairs = np.zeros(level_shape)
        for a in range(3):
            for b in range(a + 1, 3):
                wa, wb = warped[a][k], warped[b][k]
                if wa.feature.shape != shape or wb.feature.shape != shape:
                    raise ShapeMismatch("warped features disagree in shape")
                both = wa.validity & wb.validity
                corr = group_correlation(wa.feature, wb.feature).mean(axis=-1)
                acc += np.where(both, corr, 0.0)
                pairs += both
        with np.errstate(invalid="ignore", divide="ignore"):
            scores[k] = np.where(pairs > 0, acc / np.maximum(pairs, 1.0), 0.0)
        validity[k] = pairs / 3.0
    return CostVolume(level=level, scores=scores, validity=validity)


def regress_depth(
    vol: CostVolume, hyps: HypothesisSet, temperature: float = 10.0
) -> tuple[DepthMap, np.ndarray]:
    """Softmax-weighted depth over the hypotheses of a cost volume.

    Per pixel, hypothesis weights are proportional to exp(temperature *
    score) over the hypotheses with nonzero validity; the depth is the
    weighted mean of the hypothesis depths and the confidence the largest
    normalized weight. Pixels with no valid hypothesis are invalid.
    """
    if hyps.count < 2:
        raise ValueError("need at least 2 hypotheses")
    if temperature <= 0:
        raise ValueError("temperature must be > 0")
    scores = vol.scores.astype(np.float64)
    valid_k = vol.validity > 0
    any_valid = valid_k.any(axis=0)

    logits = np.where(valid_k, temperature * scores, -np.inf)
    with np.errstate(invalid="ignore"):
        peak = logits.max(axis=0)
        w = np.where(valid_k, np.exp(np.minimum(logits - peak, 0.0)), 0.0)
    wsum = w.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        w = np.where(any_valid, w / np.maximum(wsum, 1e-300), 0.0)

    shape = scores.shape[1:]
    if hyps.shared is not None:
        depth = np.tensordot(hyps.shared, w, axes=(0, 0))
    else:
        offset = np.tensordot(hyps.offsets, w, axes=(0, 0))
        depth = hyps.base + offset
    depth = np.where(any_valid, depth, np.nan)
    confidence = w.max(axis=0)
    return DepthMap(values=depth, level=hyps.level), confidence


def estimate_alpha(
    warped_masks: np.ndarray,
    weights: ViewWeights,
    inbounds: Optional[np.ndarray] = None,
) -> AlphaMap:
    """Opacity as the weighted mean of the warped source masks.

    Where the fusion weights are undefined (no photo-consistent view) the
    mask average falls back to the unweighted mean over the views whose
    sampling footprint stayed inside their image, so background pixels read
    zero rather than becoming holes.

    Args:
        warped_masks: (V, H, W) warped foreground masks in [0, 1].
        weights: Fusion weights over the same views.
        inbounds: Optional (V, H, W) in-bounds flags for the fallback.
    """
    masks = np.asarray(warped_masks, dtype=np.float64)
    alpha = (weights.weights * masks).sum(axis=0)
    if inbounds is not None:
        inb = np.asarray(inbounds, dtype=bool)
        count = inb.sum(axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            fallback = np.where(count > 0, (masks * inb).sum(axis=0) / np.maximum(count, 1), 0.0)
        alpha = np.where(weights.valid, alpha, fallback)
    else:
        alpha = np.where(weights.valid, alpha, 0.0)
    return AlphaMap(values=np.clip(alpha, 0.0, 1.0))


def _level_shape(pose: CameraPose, level: int) -> tuple[int, int]:
    intr = pose.intrinsics.scaled(level)
    return intr.height, intr.width


def score_hypotheses(
    pyramids: Sequence[FeaturePyramid],
    poses: Sequence[CameraPose],
    target_pose: CameraPose,
    level: int,
    depth_planes: np.ndarray,
    threads: int = 1,
    groups: int = CORRELATION_GROUPS,
) -> tuple[np.ndarray, np.ndarray]:
    """Scored sweep over per-pixel depth planes (the pipeline hot path).

    Each (hypothesis, row-chunk) task warps all three views and accumulates
    the pair-averaged grouped correlation in one fused kernel; tasks write
    disjoint slices, so results do not depend on the thread count.

    Args:
        depth_planes: (K, H, W) absolute depth per hypothesis.
        threads: Worker threads; 1 runs inline.

    Returns:
        ``(scores, validity)`` both (K, H, W) float32.
    """
    srcs = np.stack([np.ascontiguousarray(p.levels[level], dtype=np.float32) for p in pyramids])
    masks = np.stack([np.ascontiguousarray(p.masks[level], dtype=np.uint8) for p in pyramids])
    amats = np.zeros((3, 3, 3))
    bvecs = np.zeros((3, 3))
    for i, pose in enumerate(poses):
        amats[i], bvecs[i] = relative_terms(pose.at_level(level), target_pose.at_level(level))

    count, height, width = depth_planes.shape
    scores = np.zeros((count, height, width), dtype=np.float32)
    validity = np.zeros((count, height, width), dtype=np.float32)
    planes = np.ascontiguousarray(depth_planes, dtype=np.float64)

    bounds = np.linspace(0, height, min(ROW_CHUNKS, height) + 1).astype(int)
    tasks = [
        (k, int(bounds[c]), int(bounds[c + 1]))
        for k in range(count)
        for c in range(len(bounds) - 1)
        if bounds[c + 1] > bounds[c]
    ]

    def run(task):
        k, row0, row1 = task
        _kernels.sweep_score_rows(
            srcs, masks, amats, bvecs, planes[k], groups, scores[k], validity[k], row0, row1
        )

    if threads <= 1:
        for task in tasks:
            run(task)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run, tasks))
    return scores, validity


def _sweep_cost_volume(
    pyramids: Sequence[FeaturePyramid],
    poses: Sequence[CameraPose],
    target_pose: CameraPose,
    level: int,
    hyps: HypothesisSet,
    config: PipelineConfig,
) -> CostVolume:
    shape = _level_shape(target_pose, level)
    planes = np.stack([hyps.depth_plane(k, shape) for k in range(hyps.count)])
    scores, validity = score_hypotheses(
        pyramids, poses, target_pose, level, planes, threads=config.threads
    )
    return CostVolume(level=level, scores=scores, validity=validity)


def _warp_views_at(
    pyramids: Sequence[FeaturePyramid],
    poses: Sequence[CameraPose],
    target_pose: CameraPose,
    level: int,
    depth: np.ndarray,
) -> list[WarpedFeature]:
    return [
        warp_at_depth(
            p.levels[level], p.masks[level], pose.at_level(level), target_pose.at_level(level), depth
        )
        for p, pose in zip(pyramids, poses)
    ]


def _alpha_from_warps(warped: Sequence[WarpedFeature], weights: ViewWeights) -> AlphaMap:
    masks = np.stack([w.mask.astype(np.float64) for w in warped])
    inbounds = np.stack([w.inbounds for w in warped])
    return estimate_alpha(masks, weights, inbounds=inbounds)


def _refine_core(
    prev_depth: DepthMap,
    level: int,
    pyramids: Sequence[FeaturePyramid],
    poses: Sequence[CameraPose],
    target_pose: CameraPose,
    config: PipelineConfig,
) -> tuple[DepthMap, np.ndarray, ResidualStats]:
    if prev_depth.level != level + 1:
        raise LevelMismatch(f"prev depth is level {prev_depth.level}, expected {level + 1}")
    from .pyramid import upsample_bilinear

    shape = _level_shape(target_pose, level)
    base = upsample_bilinear(prev_depth.values, shape)
    hyps = refinement_hypotheses(base, level, config.window_count)
    vol = _sweep_cost_volume(pyramids, poses, target_pose, level, hyps, config)
    regressed, confidence = regress_depth(vol, hyps, config.beta)

    eps = window_epsilon(level)
    with np.errstate(invalid="ignore"):
        delta = np.clip(regressed.values - base, -eps, eps)
    refined = np.where(np.isfinite(delta), base + delta, np.nan)
    finite = np.isfinite(delta)
    if finite.any():
        mean_abs = float(np.abs(delta[finite]).mean())
        max_abs = float(np.abs(delta[finite]).max())
        violation = float(np.maximum(np.abs(delta[finite]) - eps, 0.0).mean())
    else:
        mean_abs = max_abs = violation = 0.0
    stats = ResidualStats(level=level, mean_abs=mean_abs, max_abs=max_abs, offset_violation=violation)
    return DepthMap(values=refined, level=level), confidence, stats


def refine_level(
    prev_depth: DepthMap,
    level: int,
    pyramids: Sequence[FeaturePyramid],
    poses: Sequence[CameraPose],
    target_pose: CameraPose,
    config: PipelineConfig = PipelineConfig(),
) -> tuple[DepthMap, AlphaMap, ResidualStats]:
    """One coarse-to-fine step: refine an upsampled depth map within a window.

    The previous level's prediction is bilinearly upsampled, a symmetric
    window of hypotheses is scored around it, and the regressed residual is
    clamped to the window half-width before being applied, so the offset
    constraint holds by construction. The opacity map comes from the warped
    masks at the refined depth under this level's confidence weights.

    Raises:
        LevelMismatch: If ``prev_depth`` is not at level ``level + 1``.
    """
    depth, _, stats = _refine_core(prev_depth, level, pyramids, poses, target_pose, config)
    metas = [view_meta(p, target_pose) for p in poses]
    warped = _warp_views_at(pyramids, poses, target_pose, level, depth.values)
    weights = confidence_weights(warped, metas, config.kappa_photo, config.kappa_ang)
    alpha = _alpha_from_warps(warped, weights)
    return depth, alpha, stats


@dataclass(frozen=True)
class LevelEstimate:
    """Everything the fusion stage needs from one pyramid level."""

    depth: DepthMap
    alpha: AlphaMap
    confidence: np.ndarray
    warped: tuple[WarpedFeature, ...]
    weights: ViewWeights
    stats: Optional[ResidualStats]


def run_depth_pass(
    pyramids: Sequence[FeaturePyramid],
    poses: Sequence[CameraPose],
    target_pose: CameraPose,
    config: PipelineConfig = PipelineConfig(),
) -> list[LevelEstimate]:
    """Full coarse-to-fine pass; returns per-level estimates, finest first.

    Depth runs coarse-to-fine; fusion weights are then computed once at the
    finest level and box-downsampled for the coarser alphas (set
    ``config.weights_per_level`` to recompute them per level instead).
    """
    if len(pyramids) != 3 or len(poses) != 3:
        raise ShapeMismatch("the pipeline fuses exactly 3 source views")
    levels = pyramids[0].num_levels
    metas = [view_meta(p, target_pose) for p in poses]

    depths: dict[int, DepthMap] = {}
    confidences: dict[int, np.ndarray] = {}
    stats: dict[int, Optional[ResidualStats]] = {}

    coarse_level = levels - 1
    hyps = coarse_hypotheses(config.d_min, config.d_max, config.coarse_count)
    vol = _sweep_cost_volume(pyramids, poses, target_pose, coarse_level, hyps, config)
    depth, confidence = regress_depth(vol, hyps, config.beta)
    depths[coarse_level] = depth
    confidences[coarse_level] = confidence
    stats[coarse_level] = None

    for level in range(coarse_level - 1, -1, -1):
        depth, confidence, level_stats = _refine_core(
            depths[level + 1], level, pyramids, poses, target_pose, config
        )
        depths[level] = depth
        confidences[level] = confidence
        stats[level] = level_stats

    warps = {
        level: _warp_views_at(pyramids, poses, target_pose, level, depths[level].values)
        for level in range(levels)
    }
    weights_finest = confidence_weights(
        warps[0], metas, config.kappa_photo, config.kappa_ang
    )
    estimates = []
    for level in range(levels):
        if level == 0:
            weights = weights_finest
        elif config.weights_per_level:
            weights = confidence_weights(warps[level], metas, config.kappa_photo, config.kappa_ang)
        else:
            weights = downsample_weights(weights_finest, level)
        alpha = _alpha_from_warps(warps[level], weights)
        estimates.append(
            LevelEstimate(
                depth=depths[level],
                alpha=AlphaMap(values=alpha.values, level=level),
                confidence=confidences[level],
                warped=tuple(warps[level]),
                weights=weights,
                stats=stats[level],
            )
        )
    return estimates


def estimate_pyramid(
    pyramids: Sequence[FeaturePyramid],
    poses: Sequence[CameraPose],
    target_pose: CameraPose,
    config: PipelineConfig = PipelineConfig(),
) -> list[tuple[DepthMap, AlphaMap]]:
    """Depth and opacity for every pyramid level, finest first."""
    return [(est.depth, est.alpha) for est in run_depth_pass(pyramids, poses, target_pose, config)]
