"""Gaussian noise injection into a single sub-aperture image."""

from __future__ import annotations

from typing import Tuple

import numpy as np

from .lightfield import LightField

PROBE_VARIANCES = (0.001, 0.005, 0.01, 0.05)


def sample_noise(shape, variance: float, seed: int) -> np.ndarray:
    """Zero-mean Gaussian samples with the given variance (float64, unclamped)."""
    if variance < 0:
        raise ValueError("noise variance must be non-negative")
    if variance == 0:
        return np.zeros(shape)
    return np.random.default_rng(seed).standard_normal(shape) * np.sqrt(variance)


def add_gaussian_noise(lf: LightField, view: Tuple[int, int], variance: float, seed: int) -> LightField:
    """Add i.i.d. N(0, variance) noise to SAI ``view`` only, then clamp to [0, 1]."""
    u, v = view
    if not (0 <= u < lf.U and 0 <= v < lf.V):
        raise IndexError(f"view {view} outside the {lf.U}x{lf.V} angular grid")
    out = lf.to_real().data.copy()
    if variance != 0:
        noisy = out[u, v].astype(np.float64) + sample_noise(out[u, v].shape, variance, seed)
        out[u, v] = np.clip(noisy, 0.0, 1.0)
    return LightField(out, lf.color)
