"""Image quality metrics for reconstructed clips: PSNR, SSIM and L1."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

PSNR_CAP = 100.0
SSIM_SIGMA = 1.5
SSIM_TAPS = 11


def l1(ref, cmp) -> float:
    """Mean absolute difference."""
    return float(np.mean(np.abs(np.asarray(ref, np.float64) - np.asarray(cmp, np.float64))))


def psnr(ref, cmp, data_range: float = 2.0, cap: float = PSNR_CAP) -> float:
    """Peak signal-to-noise ratio in dB, ``10 log10(range^2 / mse)``.

    Exact matches (and anything above ``cap``) report ``cap``.
    """
    mse = float(np.mean((np.asarray(ref, np.float64) - np.asarray(cmp, np.float64)) ** 2))
    if mse == 0:
        return cap
    return min(cap, 10.0 * np.log10(data_range ** 2 / mse))


def gaussian_window(taps: int = SSIM_TAPS, sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(taps) - (taps - 1) / 2
    k = np.exp(-x ** 2 / (2 * sigma ** 2))
    return k / k.sum()


def _blur(img, k):
    out = ndimage.correlate1d(img, k, axis=0, mode="reflect")
    return ndimage.correlate1d(out, k, axis=1, mode="reflect")


def ssim_map(ref, cmp, data_range: float = 2.0) -> np.ndarray:
    """Per-pixel SSIM of two 2-D images with an 11-tap Gaussian window (sigma 1.5)."""
    x = np.asarray(ref, np.float64)
    y = np.asarray(cmp, np.float64)
    if x.shape != y.shape or x.ndim != 2:
        raise ValueError(f"ssim needs two equal 2-D images, got {x.shape} and {y.shape}")
    k = gaussian_window()
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2
    mx, my = _blur(x, k), _blur(y, k)
    vx = _blur(x * x, k) - mx * mx
    vy = _blur(y * y, k) - my * my
    cxy = _blur(x * y, k) - mx * my
    return ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))


def ssim(ref, cmp, data_range: float = 2.0) -> float:
    """Mean SSIM of two 2-D images.

    Border pixels within half a window of the edge are excluded when the
    image is large enough to leave an interior; small images use the
    whole (reflect-padded) map.
    """
    s = ssim_map(ref, cmp, data_range)
    pad = (SSIM_TAPS - 1) // 2
    if min(s.shape) > 2 * pad:
        s = s[pad:-pad, pad:-pad]
    return float(s.mean())


def clip_ssim(ref, cmp, data_range: float = 2.0) -> float:
    """Mean SSIM over every frame and channel of ``(f, h, w, c)`` clips."""
    ref = np.asarray(ref, np.float64)
    cmp = np.asarray(cmp, np.float64)
    if ref.shape != cmp.shape or ref.ndim != 4:
        raise ValueError(f"clip_ssim needs two equal (f, h, w, c) clips, got {ref.shape}, {cmp.shape}")
    vals = [ssim(ref[k, :, :, ch], cmp[k, :, :, ch], data_range)
            for k in range(ref.shape[0]) for ch in range(ref.shape[3])]
    return float(np.mean(vals))


def clip_report(ref, cmp, data_range: float = 2.0) -> dict:
    return {"psnr": psnr(ref, cmp, data_range), "ssim": clip_ssim(ref, cmp, data_range),
            "l1": l1(ref, cmp)}
