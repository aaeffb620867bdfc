"""Aligned low/high-resolution patch pairs cut from a light field."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from .lightfield import LightField
from .resample import downsample


@dataclass
class Patch:
    top: int
    left: int
    hr: np.ndarray  # (U, V, C, p, p)
    lr: np.ndarray  # (U, V, C, p/a, p/a)

    @property
    def lr_coords(self) -> Tuple[int, int]:
        return self.top, self.left


@dataclass
class PatchSet:
    parent_shape: Tuple[int, ...]
    size: int
    stride: int
    scale: int
    patches: List[Patch] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.patches)

    def __iter__(self):
        return iter(self.patches)

    def extend(self, other: "PatchSet") -> None:
        self.patches.extend(other.patches)


def patch_count(dim: int, p: int, s: int) -> int:
    if p > dim:
        return 0
    return (dim - p) // s + 1


def extract_patches(hr: LightField, a: int, p: int, s: int) -> PatchSet:
    """Cut p x p HR patches on a stride-s grid and degrade each one by 1/a.

    Top-left HR coordinates are multiples of ``s``; since ``p`` and ``s`` are
    multiples of ``a`` the LR patch sits at the HR coordinates divided by a.
    """
    if p > hr.H or p > hr.W:
        raise ValueError(f"patch size {p} exceeds light field extent {hr.H}x{hr.W}")
    if p <= 0 or s <= 0:
        raise ValueError("patch size and stride must be positive")
    if p % a or s % a:
        raise ValueError(f"patch size {p} and stride {s} must be divisible by the scale {a}")
    data = hr.to_real().data
    out = PatchSet(tuple(hr.data.shape), p, s, a)
    for i in range(patch_count(hr.H, p, s)):
        for j in range(patch_count(hr.W, p, s)):
            top, left = i * s, j * s
            crop = np.ascontiguousarray(data[:, :, :, top : top + p, left : left + p])
            lr = np.clip(downsample(crop, a), 0.0, 1.0).astype(np.float32)
            out.patches.append(Patch(top, left, crop, lr))
    return out
