"""PSNR and single-scale SSIM on single planes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

PSNR_CAP = 100.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
K1, K2 = 0.01, 0.03


@dataclass(frozen=True)
class MetricResult:
    psnr: float
    ssim: float
    peak: float = 1.0


def _check_pair(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"metric inputs differ in dims: {x.shape} vs {y.shape}")
    return x, y


def psnr(x, y, peak: float = 1.0) -> float:
    """10 log10(peak^2 / MSE); identical inputs give the 100 dB cap."""
    x, y = _check_pair(x, y)
    mse = np.mean((x - y) ** 2)
    if mse == 0:
        return PSNR_CAP
    return float(10.0 * np.log10(peak * peak / mse))


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    """Normalized 1-D Gaussian; the 2-D window is its outer product."""
    r = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(r**2) / (2.0 * sigma**2))
    return g / g.sum()


def _filter_valid(img: np.ndarray, g: np.ndarray) -> np.ndarray:
    # separable correlation, then keep the window positions fully inside the plane
    half = len(g) // 2
    out = correlate1d(correlate1d(img, g, axis=-1, mode="constant"), g, axis=-2, mode="constant")
    return out[..., half : img.shape[-2] - half, half : img.shape[-1] - half]


def ssim_map(x, y, peak: float = 1.0) -> np.ndarray:
    x, y = _check_pair(x, y)
    if x.ndim != 2:
        raise ValueError(f"ssim expects a 2-D plane, got dims {x.shape}")
    if min(x.shape) < SSIM_WINDOW:
        raise ValueError(f"plane {x.shape} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")
    g = gaussian_window()
    c1, c2 = (K1 * peak) ** 2, (K2 * peak) ** 2
    mx, my = _filter_valid(x, g), _filter_valid(y, g)
    sxx = _filter_valid(x * x, g) - mx * mx
    syy = _filter_valid(y * y, g) - my * my
    sxy = _filter_valid(x * y, g) - mx * my
    return ((2 * mx * my + c1) * (2 * sxy + c2)) / ((mx * mx + my * my + c1) * (sxx + syy + c2))


def ssim(x, y, peak: float = 1.0) -> float:
    """Mean SSIM over valid 11x11 Gaussian windows (sigma 1.5)."""
    return float(np.mean(ssim_map(x, y, peak)))


def measure(x, y, peak: float = 1.0) -> MetricResult:
    return MetricResult(psnr(x, y, peak), ssim(x, y, peak), peak)
