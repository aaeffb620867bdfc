"""Joint angular-spatial flips and rotations.

Arrays are laid out (u, v, channel, y, x) or (u, v, y, x); the angular axis u is paired with
the spatial axis x, and v with y, so every transform below maps a light field
with consistent disparity to another one.
"""

from __future__ import annotations

from typing import Iterable, Sequence, Tuple, Union

import numpy as np

from .lightfield import LightField

OPS = ("hflip", "vflip", "rot90")


def _apply(data: np.ndarray, op: str, inverse: bool = False) -> np.ndarray:
    # angular axes lead, spatial axes trail; a channel axis in between is optional
    if data.ndim < 4:
        raise ValueError(f"augmentation needs (U, V, ..., H, W) data, got shape {data.shape}")
    if op == "hflip":
        return np.flip(data, axis=(0, -1))
    if op == "vflip":
        return np.flip(data, axis=(1, -2))
    if op == "rot90":
        if data.shape[0] != data.shape[1]:
            raise ValueError(f"rot90 needs a square angular grid, got {data.shape[0]}x{data.shape[1]}")
        k = -1 if inverse else 1
        # rotating the (y, x) plane corresponds to rotating the (v, u) grid
        return np.rot90(np.rot90(data, k, axes=(-2, -1)), k, axes=(1, 0))
    raise ValueError(f"unknown augmentation {op!r}")


def augment_array(data: np.ndarray, op: str, inverse: bool = False) -> np.ndarray:
    return np.ascontiguousarray(_apply(data, op, inverse))


def augment(lf: LightField, op: str, inverse: bool = False) -> LightField:
    """Apply one of ``hflip``, ``vflip``, ``rot90`` (or its inverse)."""
    return LightField(augment_array(lf.data, op, inverse), lf.color)


def sample_ops(rng: np.random.Generator) -> Tuple[str, ...]:
    """Each transform independently with probability 1/2."""
    return tuple(op for op in OPS if rng.random() < 0.5)


def apply_ops(data: np.ndarray, ops: Sequence[str]) -> np.ndarray:
    for op in ops:
        data = _apply(data, op)
    return np.ascontiguousarray(data)


def random_augment_pair(lr: np.ndarray, hr: np.ndarray, rng: np.random.Generator):
    """Same randomly drawn transform applied to an LR/HR patch pair."""
    ops = sample_ops(rng)
    if lr.shape[0] != lr.shape[1]:
        ops = tuple(op for op in ops if op != "rot90")
    return apply_ops(lr, ops), apply_ops(hr, ops)
