"""Separable bicubic resampling (Keys kernel, a = -0.5).

Coordinates follow the half-pixel-centre convention
``src = (dst + 0.5) / scale - 0.5`` and out-of-range taps replicate the edge
sample. No antialiasing prefilter is applied when downsampling.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from typing import Union

import numpy as np

KEYS_A = -0.5
SCALES = (Fraction(1, 4), Fraction(1, 2), Fraction(2), Fraction(4))


def cubic_kernel(x, a: float = KEYS_A):
    x = np.abs(np.asarray(x, dtype=np.float64))
    x2, x3 = x * x, x * x * x
    near = (a + 2) * x3 - (a + 3) * x2 + 1
    far = a * x3 - 5 * a * x2 + 8 * a * x - 4 * a
    return np.where(x <= 1, near, np.where(x < 2, far, 0.0))


def _as_fraction(scale) -> Fraction:
    frac = Fraction(scale).limit_denominator(64)
    if frac not in SCALES:
        raise ValueError(f"unsupported scale {scale}; expected one of 1/4, 1/2, 2, 4")
    return frac


@lru_cache(maxsize=64)
def resample_matrix(n_in: int, scale: Fraction) -> np.ndarray:
    """(n_out, n_in) matrix whose rows hold the 4 interpolation weights."""
    if n_in < 4:
        raise ValueError(f"bicubic resampling needs extents >= 4, got {n_in}")
    n_out = n_in * scale
    if n_out.denominator != 1:
        raise ValueError(f"extent {n_in} is not divisible at scale {scale}")
    n_out = int(n_out)
    inv = 1.0 / float(scale)
    mat = np.zeros((n_out, n_in))
    for dst in range(n_out):
        src = (dst + 0.5) * inv - 0.5
        base = int(np.floor(src))
        for tap in range(base - 1, base + 3):
            mat[dst, min(max(tap, 0), n_in - 1)] += cubic_kernel(src - tap)
    mat.setflags(write=False)
    return mat


def bicubic_resample(img: np.ndarray, scale: Union[float, Fraction]) -> np.ndarray:
    """Resample the last two axes of ``img`` (float64 result).

    Leading axes are treated as independent planes, so a whole (U, V, C, H, W)
    array is resampled per SAI and per channel in one call.
    """
    scale = _as_fraction(scale)
    img = np.asarray(img, dtype=np.float64)
    if img.ndim < 2:
        raise ValueError("bicubic_resample needs at least a 2-D plane")
    ry = resample_matrix(img.shape[-2], scale)
    rx = resample_matrix(img.shape[-1], scale)
    return np.matmul(np.matmul(ry, img), rx.T)


def upsample(img: np.ndarray, a: int) -> np.ndarray:
    return bicubic_resample(img, Fraction(a))


def downsample(img: np.ndarray, a: int) -> np.ndarray:
    return bicubic_resample(img, Fraction(1, a))
