"""Seven-level feature pyramids from deterministic classical features.

Each view contributes eight channels per level: RGB, luma, central-difference
luma gradients, and 5x5 local mean/standard deviation of luma, all affinely
mapped into [-1, 1]. Coarser levels recompute the channels from a 2x2
box-downsampled image (gradients are recomputed, never downsampled); masks
downsample by any-pooling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

NUM_LEVELS = 7
NUM_CHANNELS = 8
CORRELATION_GROUPS = 4

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


class SizeMismatch(ValueError):
    """Image and mask shapes differ."""


class TooSmall(ValueError):
    """Input too small for the requested pyramid depth."""


@dataclass(frozen=True)
class DepthMap:
    """Per-pixel metric depth; NaN marks invalid pixels."""

    values: np.ndarray
    level: int = 0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", v)

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.values)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class AlphaMap:
    """Per-pixel opacity in [0, 1]."""

    values: np.ndarray
    level: int = 0

    def __post_init__(self):
        v = np.clip(np.asarray(self.values, dtype=np.float64), 0.0, 1.0)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class FeaturePyramid:
    """Per-view stack of feature planes (level 0 finest) and binary masks."""

    levels: tuple[np.ndarray, ...]
    masks: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.levels) != len(self.masks):
            raise ValueError("levels and masks must align")

    @property
    def num_levels(self) -> int:
        return len(self.levels)


def luma(image: np.ndarray) -> np.ndarray:
    """Rec.601 luma of an (H, W, 3) image."""
    return image @ LUMA_WEIGHTS


def _central_gradients(plane: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Central differences with replicate border."""
    padded = np.pad(plane, 1, mode="edge")
    dx = (padded[1:-1, 2:] - padded[1:-1, :-2]) / 2.0
    dy = (padded[2:, 1:-1] - padded[:-2, 1:-1]) / 2.0
    return dx, dy


def _local_stats(plane: np.ndarray, size: int = 5) -> tuple[np.ndarray, np.ndarray]:
    """Box-window mean and standard deviation with replicate border."""
    mean = ndimage.uniform_filter(plane, size=size, mode="nearest")
    mean_sq = ndimage.uniform_filter(plane * plane, size=size, mode="nearest")
    var = np.maximum(mean_sq - mean * mean, 0.0)
    return mean, np.sqrt(var)


def feature_channels(image: np.ndarray) -> np.ndarray:
    """The 8-channel feature plane of one image, values in [-1, 1]."""
    image = np.asarray(image, dtype=np.float64)
    y = luma(image)
    dx, dy = _central_gradients(y)
    mean, std = _local_stats(y)
    channels = np.stack(
        [
            2.0 * image[..., 0] - 1.0,
            2.0 * image[..., 1] - 1.0,
            2.0 * image[..., 2] - 1.0,
            2.0 * y - 1.0,
            2.0 * dx,  # central differences of [0,1] luma lie in [-0.5, 0.5]
            2.0 * dy,
            2.0 * mean - 1.0,
            2.0 * std,  # std of [0,1] values is at most 0.5; zero stays zero
        ],
        axis=-1,
    )
    return np.clip(channels, -1.0, 1.0).astype(np.float32)


def _block_reduce_mean(plane: np.ndarray) -> np.ndarray:
    """2x2 block mean; trailing odd rows/columns average what is present."""
    h, w = plane.shape[:2]
    row_idx = np.arange(0, h, 2)
    col_idx = np.arange(0, w, 2)
    summed = np.add.reduceat(np.add.reduceat(plane, row_idx, axis=0), col_idx, axis=1)
    rows = np.minimum(row_idx + 2, h) - row_idx
    cols = np.minimum(col_idx + 2, w) - col_idx
    counts = np.outer(rows, cols).astype(np.float64)
    if plane.ndim == 3:
        counts = counts[..., None]
    return summed / counts


def downsample_image(image: np.ndarray) -> np.ndarray:
    """2x2 box-filter downsampling."""
    return _block_reduce_mean(np.asarray(image, dtype=np.float64))


def downsample_mask(mask: np.ndarray) -> np.ndarray:
    """Any-pooling: a coarse pixel is on iff any of its children is on."""
    return _block_reduce_mean(mask.astype(np.float64)) > 0.0


def downsample_depth(depth: DepthMap) -> DepthMap:
    """2x2 mean over valid entries; invalid where no child is valid."""
    values = depth.values
    valid = np.isfinite(values)
    total = _block_reduce_mean(np.where(valid, values, 0.0))
    frac = _block_reduce_mean(valid.astype(np.float64))
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(frac > 0.0, total / frac, np.nan)
    return DepthMap(values=out, level=depth.level + 1)


def build_pyramid(image: np.ndarray, mask: np.ndarray) -> FeaturePyramid:
    """Build the 7-level feature/mask pyramid of one view.

    Args:
        image: (H, W, 3) RGB in [0, 1].
        mask: (H, W) boolean foreground mask.

    Raises:
        SizeMismatch: If image and mask shapes differ.
        TooSmall: If min(H, W) < 64 (level 6 would be empty).
    """
    image = np.asarray(image, dtype=np.float64)
    mask = np.asarray(mask).astype(bool)
    if image.shape[:2] != mask.shape:
        raise SizeMismatch(f"image {image.shape[:2]} vs mask {mask.shape}")
    if min(image.shape[:2]) < 2 ** (NUM_LEVELS - 1):
        raise TooSmall(f"need min dimension >= {2 ** (NUM_LEVELS - 1)}")

    levels = []
    masks = []
    img_l = image
    mask_l = mask
    for level in range(NUM_LEVELS):
        levels.append(feature_channels(img_l))
        masks.append(mask_l)
        if level + 1 < NUM_LEVELS:
            img_l = downsample_image(img_l)
            mask_l = downsample_mask(mask_l)
    return FeaturePyramid(levels=tuple(levels), masks=tuple(masks))


def upsample_bilinear(values: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """NaN-aware bilinear resize with aligned pixel centers.

    Invalid (NaN) source pixels are excluded from the interpolation weights;
    an output pixel is NaN only if all contributing taps are NaN.
    """
    h_in, w_in = values.shape
    h_out, w_out = shape
    ys = (np.arange(h_out) + 0.5) * (h_in / h_out) - 0.5
    xs = (np.arange(w_out) + 0.5) * (w_in / w_out) - 0.5
    y0 = np.clip(np.floor(ys).astype(np.int64), 0, max(h_in - 2, 0))
    x0 = np.clip(np.floor(xs).astype(np.int64), 0, max(w_in - 2, 0))
    fy = np.clip(ys - y0, 0.0, 1.0)[:, None]
    fx = np.clip(xs - x0, 0.0, 1.0)[None, :]
    y1 = np.minimum(y0 + 1, h_in - 1)
    x1 = np.minimum(x0 + 1, w_in - 1)

    taps = (
        (values[np.ix_(y0, x0)], (1 - fy) * (1 - fx)),
        (values[np.ix_(y0, x1)], (1 - fy) * fx),
        (values[np.ix_(y1, x0)], fy * (1 - fx)),
        (values[np.ix_(y1, x1)], fy * fx),
    )
    acc = np.zeros(shape)
    wacc = np.zeros(shape)
    flat = np.zeros(shape)
    count = np.zeros(shape)
    for tap, weight in taps:
        ok = np.isfinite(tap)
        safe = np.where(ok, tap, 0.0)
        acc += safe * (weight * ok)
        wacc += weight * ok
        flat += safe
        count += ok
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(wacc > 0.0, acc / wacc, np.nan)
        # Border pixels can put all interpolation weight on an invalid tap;
        # fall back to the plain mean of whatever valid taps exist.
        fallback = np.where(count > 0.0, flat / np.maximum(count, 1.0), np.nan)
    return np.where(wacc > 0.0, out, fallback)
