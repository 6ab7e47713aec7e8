"""Occlusion-aware fusion of warped views and final image synthesis.

Per-view confidence combines photo-consistency against the other views with
angular proximity of the source to the target axis, replacing a learned
confidence head with an interpretable closed form. Fused RGB is completed by
pull-push hole filling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .camera import CameraPose
from .pyramid import AlphaMap, DepthMap, _block_reduce_mean, upsample_bilinear
from .sweep import WarpedFeature

DEFAULT_KAPPA_PHOTO = 5.0
DEFAULT_KAPPA_ANG = 2.0


class ShapeMismatch(ValueError):
    """Planes to fuse do not share a shape."""


@dataclass(frozen=True)
class ViewMeta:
    """Source-axis direction relative to the target frame, in radians."""

    azimuth: float
    elevation: float

    @property
    def angular_distance(self) -> float:
        return math.hypot(self.azimuth, self.elevation)


@dataclass(frozen=True)
class ViewWeights:
    """Per-view blending weights; rows sum to one wherever ``valid``."""

    weights: np.ndarray
    valid: np.ndarray


@dataclass(frozen=True)
class FusedPlane:
    """Weighted blend of warped features with its validity plane."""

    values: np.ndarray
    valid: np.ndarray


def view_meta(source: CameraPose, target: CameraPose) -> ViewMeta:
    """Azimuth/elevation of the source optical axis in the target frame.

    With the camera y axis pointing down, azimuth is atan2(x, z) and
    elevation asin(-y).
    """
    axis_in_target = target.rotation @ source.optical_axis
    azimuth = math.atan2(axis_in_target[0], axis_in_target[2])
    elevation = math.asin(np.clip(-axis_in_target[1], -1.0, 1.0))
    return ViewMeta(azimuth=azimuth, elevation=elevation)


def confidence_weights(
    warped: Sequence[WarpedFeature],
    meta: Sequence[ViewMeta],
    kappa_photo: float = DEFAULT_KAPPA_PHOTO,
    kappa_ang: float = DEFAULT_KAPPA_ANG,
    groups: int = 4,
) -> ViewWeights:
    """Per-view confidence from photo-consistency and angular proximity.

    Each view's raw weight is exp(kappa_photo * rho - kappa_ang * theta)
    where rho is its mean grouped correlation against the other valid views
    at the chosen depth and theta its angular distance to the target axis;
    invalid views get zero. Weights are normalized to sum to one; a pixel
    with no valid view is marked invalid.
    """
    from .depth import group_correlation

    if len(warped) != len(meta):
        raise ShapeMismatch("need one ViewMeta per warped view")
    shape = warped[0].validity.shape
    n = len(warped)
    raw = np.zeros((n,) + shape)
    for i in range(n):
        valid_i = warped[i].validity
        rho = np.zeros(shape)
        partners = np.zeros(shape)
        for j in range(n):
            if j == i:
                continue
            both = valid_i & warped[j].validity
            corr = group_correlation(warped[i].feature, warped[j].feature, groups)
            rho += np.where(both, corr.mean(axis=-1), 0.0)
            partners += both
        with np.errstate(invalid="ignore", divide="ignore"):
            rho = np.where(partners > 0, rho / np.maximum(partners, 1.0), 0.0)
        raw[i] = np.where(
            valid_i, np.exp(kappa_photo * rho - kappa_ang * meta[i].angular_distance), 0.0
        )
    total = raw.sum(axis=0)
    valid = total > 0.0
    with np.errstate(invalid="ignore", divide="ignore"):
        weights = np.where(valid, raw / np.maximum(total, 1e-300), 0.0)
    return ViewWeights(weights=weights, valid=valid)


def downsample_weights(weights: ViewWeights, levels: int) -> ViewWeights:
    """Box-downsample view weights by 2^levels and renormalize."""
    w = weights.weights
    v = weights.valid.astype(np.float64)
    for _ in range(levels):
        w = np.stack([_block_reduce_mean(w[i]) for i in range(w.shape[0])])
        v = _block_reduce_mean(v)
    total = w.sum(axis=0)
    valid = (total > 0.0) & (v > 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        w = np.where(valid, w / np.maximum(total, 1e-300), 0.0)
    return ViewWeights(weights=w, valid=valid)


def fuse_features(warped: Sequence[WarpedFeature], weights: ViewWeights) -> FusedPlane:
    """Per-pixel, per-channel weighted sum of warped features."""
    shape = warped[0].feature.shape
    for w in warped:
        if w.feature.shape != shape:
            raise ShapeMismatch("warped features must share a shape")
    if weights.weights.shape[1:] != shape[:2]:
        raise ShapeMismatch("weights do not match the feature planes")
    fused = np.zeros(shape, dtype=np.float64)
    for i, w in enumerate(warped):
        fused += weights.weights[i][..., None] * w.feature
    fused = np.where(weights.valid[..., None], fused, 0.0)
    return FusedPlane(values=fused.astype(np.float32), valid=weights.valid.copy())


def pull_push(values: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """Fill invalid pixels by pyramid pull-push.

    Valid values are pushed down by valid-weighted 2x2 means, then pulled
    back up so holes blend toward the nearest coarse estimate. Valid pixels
    pass through untouched; a fully invalid input comes back as zeros.
    """
    values = np.asarray(values, dtype=np.float64)
    squeeze = values.ndim == 2
    if squeeze:
        values = values[..., None]
    weight = valid.astype(np.float64)
    stack = [(np.where(valid[..., None], values, 0.0), weight)]
    while min(stack[-1][0].shape[:2]) > 1:
        v, w = stack[-1]
        wsum = _block_reduce_mean(w)
        vsum = _block_reduce_mean(v * w[..., None])
        with np.errstate(invalid="ignore", divide="ignore"):
            v_next = np.where(wsum[..., None] > 0, vsum / np.maximum(wsum[..., None], 1e-300), 0.0)
        stack.append((v_next, np.minimum(wsum * 4.0, 1.0)))

    v_coarse, w_coarse = stack[-1]
    for v, w in reversed(stack[:-1]):
        up = np.stack(
            [upsample_bilinear(v_coarse[..., c], v.shape[:2]) for c in range(v.shape[2])],
            axis=-1,
        )
        w_up = upsample_bilinear(w_coarse, v.shape[:2])
        v_coarse = v * w[..., None] + up * (1.0 - w[..., None])
        w_coarse = np.maximum(w, w_up)
    out = v_coarse
    return out[..., 0] if squeeze else out


def synthesize(
    fused: Sequence[FusedPlane],
    alphas: Sequence[AlphaMap],
    depths: Optional[Sequence[DepthMap]] = None,
) -> tuple[np.ndarray, AlphaMap]:
    """Final RGB image and opacity from the per-level fused planes.

    The finest fused level carries the blended RGB channels; they are mapped
    back to [0, 1] and holes (pixels with no valid view) are completed by
    pull-push. Opacity keeps its estimated value where defined and zero
    elsewhere, so composited output stays black outside the coverage.

    Args:
        fused: Per-level fused planes, finest first.
        alphas: Per-level opacity maps, finest first.
        depths: Accepted for interface completeness; the feedforward blend
            does not consume them.

    Returns:
        ``(rgb, alpha)`` with rgb (H, W, 3) in [0, 1].
    """
    finest = fused[0]
    rgb = np.clip((finest.values[..., :3].astype(np.float64) + 1.0) / 2.0, 0.0, 1.0)
    filled = np.clip(pull_push(rgb, finest.valid), 0.0, 1.0)
    alpha = AlphaMap(values=np.where(finest.valid | (alphas[0].values > 0),
                                     alphas[0].values, 0.0), level=0)
    return filled, alpha


def composite_on_black(rgb: np.ndarray, alpha: AlphaMap) -> np.ndarray:
    """Premultiply by opacity; scene ground truth uses black backgrounds."""
    return np.clip(rgb * alpha.values[..., None], 0.0, 1.0)
