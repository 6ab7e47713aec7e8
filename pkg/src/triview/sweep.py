"""Depth hypothesis generation and homography-based feature warping.

The coarsest level sweeps a fixed grid of fronto-parallel planes; finer
levels sweep a symmetric window of offsets around the upsampled prediction,
with the window half-width doubling per level. Warps resolve to a single
bilinear kernel shared by the constant-depth and per-pixel-depth paths.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .camera import CameraPose, NonPositiveDepth

DEFAULT_DEPTH_RANGE = (0.5, 8.5)
DEFAULT_COARSE_COUNT = 32
DEFAULT_WINDOW_COUNT = 5
COARSE_LEVEL = 6


class LevelOutOfRange(ValueError):
    """Refinement level outside 0..5."""


class SingularHomography(ValueError):
    """Homography is not invertible."""


@dataclass(frozen=True)
class HypothesisSet:
    """Depth hypotheses at one level.

    Coarse mode stores a shared strictly increasing grid; refinement mode
    stores a per-pixel base depth plus a symmetric offset stencil.
    """

    level: int
    shared: Optional[np.ndarray] = None
    base: Optional[np.ndarray] = None
    offsets: Optional[np.ndarray] = None

    def __post_init__(self):
        if (self.shared is None) == (self.base is None):
            raise ValueError("exactly one of shared/base must be set")
        if self.shared is not None:
            s = np.asarray(self.shared, dtype=np.float64)
            if s.ndim != 1 or s.size < 2 or np.any(np.diff(s) <= 0):
                raise ValueError("coarse hypotheses must be a strictly increasing 1-D grid")
            object.__setattr__(self, "shared", s)
        else:
            if self.offsets is None:
                raise ValueError("refinement mode needs offsets")
            off = np.asarray(self.offsets, dtype=np.float64)
            if np.max(np.abs(off + off[::-1])) > 1e-12:
                raise ValueError("offsets must be symmetric about zero")
            object.__setattr__(self, "offsets", off)
            object.__setattr__(self, "base", np.asarray(self.base, dtype=np.float64))

    @property
    def count(self) -> int:
        return len(self.shared) if self.shared is not None else len(self.offsets)

    def depth_plane(self, k: int, shape: Optional[tuple[int, int]] = None) -> np.ndarray:
        """Absolute per-pixel depth of hypothesis ``k``."""
        if self.shared is not None:
            if shape is None:
                raise ValueError("coarse mode needs an explicit shape")
            return np.full(shape, self.shared[k])
        return self.base + self.offsets[k]


def coarse_hypotheses(
    d_min: float = DEFAULT_DEPTH_RANGE[0],
    d_max: float = DEFAULT_DEPTH_RANGE[1],
    count: int = DEFAULT_COARSE_COUNT,
) -> HypothesisSet:
    """Uniform depth grid over [d_min, d_max], endpoints included."""
    if count < 2:
        raise ValueError("need at least 2 hypotheses")
    if not 0 < d_min < d_max:
        raise ValueError(f"invalid depth range [{d_min}, {d_max}]")
    return HypothesisSet(level=COARSE_LEVEL, shared=np.linspace(d_min, d_max, count))


def window_epsilon(level: int) -> float:
    """Refinement half-window 2**(level-1) * 0.02 m."""
    if not 0 <= level <= 5:
        raise LevelOutOfRange(f"refinement level must be in 0..5, got {level}")
    return 2.0 ** (level - 1) * 0.02


def window_offsets(level: int, count: int = DEFAULT_WINDOW_COUNT) -> np.ndarray:
    """Evenly spaced offsets over [-eps, +eps] including endpoints and zero.

    ``count`` must be odd so the zero offset is always a member; refinement
    can then never worsen an exact upstream prediction.
    """
    if count < 3 or count % 2 == 0:
        raise ValueError(f"window count must be odd and >= 3, got {count}")
    eps = window_epsilon(level)
    return np.linspace(-eps, eps, count)


def refinement_hypotheses(
    base: np.ndarray, level: int, count: int = DEFAULT_WINDOW_COUNT
) -> HypothesisSet:
    """Window stencil around an upsampled depth prediction."""
    return HypothesisSet(level=level, base=base, offsets=window_offsets(level, count))


def relative_terms(source: CameraPose, target: CameraPose) -> tuple[np.ndarray, np.ndarray]:
    """Decomposition of the plane-induced warp into depth-free parts.

    For a fronto-parallel plane at depth d in the target frame, source
    homogeneous pixels are A @ p + b / d with A = K_s R_rel K_t^-1 and
    b = K_s t_rel.
    """
    r_rel = source.rotation @ target.rotation.T
    t_rel = source.translation - r_rel @ target.translation
    k_s = source.intrinsics.matrix
    k_t_inv = np.linalg.inv(target.intrinsics.matrix)
    return k_s @ r_rel @ k_t_inv, k_s @ t_rel


def plane_homography(source: CameraPose, target: CameraPose, d: float) -> np.ndarray:
    """Homography mapping target pixels to source pixels for the plane z=d.

    Raises:
        NonPositiveDepth: If d <= 0.
    """
    if d <= 0:
        raise NonPositiveDepth(f"plane depth must be > 0, got {d}")
    r_rel = source.rotation @ target.rotation.T
    t_rel = source.translation - r_rel @ target.translation
    n = np.array([0.0, 0.0, 1.0])
    k_s = source.intrinsics.matrix
    k_t_inv = np.linalg.inv(target.intrinsics.matrix)
    return k_s @ (r_rel + np.outer(t_rel, n) / d) @ k_t_inv


@dataclass(frozen=True)
class WarpedFeature:
    """Source features resampled into the target view.

    ``validity`` requires in-bounds sampling and the source mask on;
    ``mask`` is the nearest-neighbor mask sample alone (0 outside) and
    ``inbounds`` the pure footprint test, both needed by alpha estimation.
    """

    feature: np.ndarray
    validity: np.ndarray
    mask: np.ndarray
    inbounds: np.ndarray


def _run_warp(
    feat: np.ndarray,
    mask: np.ndarray,
    amat: np.ndarray,
    bvec: np.ndarray,
    depth: np.ndarray,
) -> WarpedFeature:
    feat = np.ascontiguousarray(feat, dtype=np.float32)
    mask_u8 = np.ascontiguousarray(mask, dtype=np.uint8)
    ht, wt = depth.shape
    out = np.zeros((ht, wt, feat.shape[2]), dtype=np.float32)
    valid = np.zeros((ht, wt), dtype=np.uint8)
    mwarp = np.zeros((ht, wt), dtype=np.uint8)
    inb = np.zeros((ht, wt), dtype=np.uint8)
    _kernels.warp_rows(
        feat, mask_u8, np.ascontiguousarray(amat), np.ascontiguousarray(bvec),
        np.ascontiguousarray(depth, dtype=np.float64), out, valid, mwarp, inb, 0, ht,
    )
    return WarpedFeature(
        feature=out, validity=valid.astype(bool), mask=mwarp.astype(bool),
        inbounds=inb.astype(bool),
    )


def warp(
    source_feat: np.ndarray,
    source_mask: np.ndarray,
    homography: np.ndarray,
    target_size: tuple[int, int],
) -> WarpedFeature:
    """Bilinearly resample source features through a homography.

    Pixel centers sit at half-integer coordinates, making the identity
    homography bit-exact. Validity needs all four bilinear taps in bounds and
    the nearest-neighbor mask tap on; invalid outputs are zero.

    Args:
        source_feat: (Hs, Ws, C) feature plane.
        source_mask: (Hs, Ws) boolean mask.
        homography: (3, 3) map from target to source pixel coordinates.
        target_size: (height, width) of the output.

    Raises:
        SingularHomography: If the homography is not invertible.
    """
    h = np.asarray(homography, dtype=np.float64)
    if not np.all(np.isfinite(h)) or abs(np.linalg.det(h)) <= 1e-12:
        raise SingularHomography("homography is singular or non-finite")
    depth = np.ones(target_size)
    return _run_warp(source_feat, source_mask, h, np.zeros(3), depth)


def warp_at_depth(
    source_feat: np.ndarray,
    source_mask: np.ndarray,
    source: CameraPose,
    target: CameraPose,
    depth: np.ndarray,
) -> WarpedFeature:
    """Warp source features into the target view through a per-pixel depth map.

    NaN or non-positive depths mark the pixel invalid.
    """
    amat, bvec = relative_terms(source, target)
    return _run_warp(source_feat, source_mask, amat, bvec, depth)
