"""Image quality metrics: PSNR and windowed SSIM on [0,1] RGB."""

from __future__ import annotations

import numpy as np

PSNR_CAP = 99.0

SSIM_WINDOW = 8
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def mse(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    d = a - b
    return float(np.mean(d * d))


def psnr(a: np.ndarray, b: np.ndarray, cap: float = PSNR_CAP) -> float:
    """Peak signal-to-noise ratio in dB for [0,1] images, averaged over
    channels; identical images report the documented cap instead of inf."""
    err = mse(a, b)
    if err <= 0.0:
        return cap
    return min(cap, float(10.0 * np.log10(1.0 / err)))


def _box_filter(x: np.ndarray, size: int) -> np.ndarray:
    """Mean over all size x size windows ('valid'), via integral images."""
    c = np.cumsum(np.cumsum(x, axis=0), axis=1)
    c = np.pad(c, ((1, 0), (1, 0)))
    s = c[size:, size:] - c[:-size, size:] - c[size:, :-size] + c[:-size, :-size]
    return s / (size * size)


def ssim(a: np.ndarray, b: np.ndarray, window: int = SSIM_WINDOW,
         k1: float = SSIM_K1, k2: float = SSIM_K2) -> float:
    """Standard windowed SSIM with a uniform window, dynamic range 1.0.

    Accepts [H,W] or [C,H,W]; channels are averaged. SSIM(x, x) == 1 exactly.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if a.ndim == 2:
        a = a[None]
        b = b[None]
    if a.ndim != 3:
        raise ValueError(f"expected [H,W] or [C,H,W], got {a.shape}")
    if a.shape[1] < window or a.shape[2] < window:
        raise ValueError(f"image smaller than SSIM window {window}")
    c1 = (k1 * 1.0) ** 2
    c2 = (k2 * 1.0) ** 2
    vals = []
    for x, y in zip(a, b):
        mu_x = _box_filter(x, window)
        mu_y = _box_filter(y, window)
        xx = _box_filter(x * x, window) - mu_x * mu_x
        yy = _box_filter(y * y, window) - mu_y * mu_y
        xy = _box_filter(x * y, window) - mu_x * mu_y
        num = (2 * mu_x * mu_y + c1) * (2 * xy + c2)
        den = (mu_x * mu_x + mu_y * mu_y + c1) * (xx + yy + c2)
        vals.append(np.mean(num / den))
    return float(np.mean(vals))


def luminance(img: np.ndarray) -> np.ndarray:
    """Rec.601 luma of a [3,H,W] image."""
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[0] != 3:
        raise ValueError(f"expected [3,H,W], got {img.shape}")
    return 0.299 * img[0] + 0.587 * img[1] + 0.114 * img[2]
