"""Image and depth quality measurements for closed-loop evaluation.

PSNR/SSIM follow the standard definitions on [0, 1] images (SSIM on luma,
11x11 Gaussian window, sigma 1.5). The geometric measurements mirror the
masked L1 depth error, the window-violation of residual updates, and the L2
alpha error. Perceptual metrics that need a pretrained network are out of
scope; reports carry a null placeholder for them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import ndimage

from .pyramid import AlphaMap, DepthMap

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
PSNR_MAX = 1.0


class SizeMismatch(ValueError):
    """Compared images differ in shape."""


class TooSmall(ValueError):
    """Image smaller than the SSIM window."""


class EmptyMask(ValueError):
    """Masked metric evaluated over an empty mask."""


@dataclass(frozen=True)
class EvalReport:
    """Aggregated quality measurements of one synthesized view."""

    psnr: float
    ssim: float
    image_mae: float
    depth_mae: tuple[float, ...] = ()
    offset_violation: tuple[float, ...] = ()
    alpha_mse: tuple[float, ...] = ()
    lpips: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "psnr": None if math.isinf(self.psnr) else self.psnr,
            "psnr_infinite": math.isinf(self.psnr),
            "ssim": self.ssim,
            "image_mae": self.image_mae,
            "depth_mae": list(self.depth_mae),
            "offset_violation": list(self.offset_violation),
            "alpha_mse": list(self.alpha_mse),
            "lpips": self.lpips,
        }


def _check_shapes(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise SizeMismatch(f"shapes differ: {a.shape} vs {b.shape}")


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB; +inf for identical images."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_shapes(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(PSNR_MAX**2 / mse)


def image_mae(a: np.ndarray, b: np.ndarray) -> float:
    """Mean absolute pixel difference."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_shapes(a, b)
    return float(np.mean(np.abs(a - b)))


def _gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2.0
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def _window_mean(plane: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Gaussian-window means restricted to fully supported (valid) windows."""
    out = ndimage.correlate1d(plane, kernel, axis=0, mode="constant")
    out = ndimage.correlate1d(out, kernel, axis=1, mode="constant")
    r = len(kernel) // 2
    return out[r:-r, r:-r]


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean structural similarity over luma.

    Uses the standard 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03,
    dynamic range 1, averaged over windows fully inside the image.

    Raises:
        TooSmall: If min(H, W) < 11.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_shapes(a, b)
    if a.ndim == 3:
        from .pyramid import luma

        a = luma(a)
        b = luma(b)
    if min(a.shape) < SSIM_WINDOW:
        raise TooSmall(f"need at least {SSIM_WINDOW} pixels per side")

    kernel = _gaussian_kernel(SSIM_WINDOW, SSIM_SIGMA)
    c1 = (SSIM_K1 * PSNR_MAX) ** 2
    c2 = (SSIM_K2 * PSNR_MAX) ** 2
    mu_a = _window_mean(a, kernel)
    mu_b = _window_mean(b, kernel)
    var_a = _window_mean(a * a, kernel) - mu_a * mu_a
    var_b = _window_mean(b * b, kernel) - mu_b * mu_b
    cov = _window_mean(a * b, kernel) - mu_a * mu_b
    ssim_map = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / (
        (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    )
    return float(ssim_map.mean())


def masked_depth_mae(pred: DepthMap, gt: DepthMap, mask: np.ndarray) -> float:
    """Mean absolute depth error over mask-on pixels with defined depths.

    Raises:
        EmptyMask: If no pixel is mask-on with both depths valid.
    """
    _check_shapes(pred.values, gt.values)
    _check_shapes(pred.values, np.asarray(mask))
    use = np.asarray(mask, dtype=bool) & pred.valid & gt.valid
    if not use.any():
        raise EmptyMask("no valid masked pixels")
    return float(np.abs(pred.values[use] - gt.values[use]).mean())


def offset_violation(residual: np.ndarray, epsilon: float, mask: np.ndarray) -> float:
    """Masked mean of ReLU(|residual| - epsilon).

    Raises:
        EmptyMask: If the mask is empty.
    """
    residual = np.asarray(residual, dtype=np.float64)
    _check_shapes(residual, np.asarray(mask))
    use = np.asarray(mask, dtype=bool) & np.isfinite(residual)
    if not use.any():
        raise EmptyMask("no valid masked pixels")
    return float(np.maximum(np.abs(residual[use]) - epsilon, 0.0).mean())


def alpha_mse(pred: AlphaMap, gt: AlphaMap) -> float:
    """Mean squared opacity error."""
    _check_shapes(pred.values, gt.values)
    return float(np.mean((pred.values - gt.values) ** 2))
