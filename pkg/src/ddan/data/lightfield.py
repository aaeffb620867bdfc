"""Light-field container and color-space conversion."""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np


class ColorTag(IntEnum):
    Y = 0
    RGB = 1
    YCBCR = 2


@dataclass
class LightField:
    """Sub-aperture image array stored as (u, v, channel, y, x).

    ``data`` is either uint8 in [0, 255] or float32 in [0, 1]. Three-channel
    light fields are tagged RGB or YCbCr; single-channel ones are Y.
    """

    data: np.ndarray
    color: ColorTag = ColorTag.Y

    def __post_init__(self):
        self.color = ColorTag(self.color)
        if self.data.ndim != 5:
            raise ValueError(f"light field data must be (U, V, C, H, W), got shape {self.data.shape}")
        ch = self.data.shape[2]
        if ch not in (1, 3):
            raise ValueError(f"light field must have 1 or 3 channels, got {ch}")
        if (ch == 1) != (self.color == ColorTag.Y):
            raise ValueError(f"color tag {self.color.name} inconsistent with {ch} channel(s)")
        if self.data.dtype == np.uint8:
            return
        if self.data.dtype != np.float32:
            raise ValueError(f"unsupported light field dtype {self.data.dtype}")
        if self.data.size and (self.data.min() < 0.0 or self.data.max() > 1.0 or not np.isfinite(self.data).all()):
            raise ValueError("real-valued light field data must lie in [0, 1]")

    @property
    def U(self) -> int:
        return self.data.shape[0]

    @property
    def V(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def H(self) -> int:
        return self.data.shape[3]

    @property
    def W(self) -> int:
        return self.data.shape[4]

    @property
    def is_real(self) -> bool:
        return self.data.dtype == np.float32

    def view(self, u: int, v: int) -> np.ndarray:
        return self.data[u, v]

    def to_real(self) -> "LightField":
        if self.is_real:
            return self
        return LightField((self.data.astype(np.float32) / np.float32(255.0)), self.color)

    def to_uint8(self) -> "LightField":
        if not self.is_real:
            return self
        return LightField(np.clip(np.rint(self.data * 255.0), 0, 255).astype(np.uint8), self.color)

    def copy(self) -> "LightField":
        return LightField(self.data.copy(), self.color)

    def __eq__(self, other) -> bool:
        if not isinstance(other, LightField):
            return NotImplemented
        return (
            self.color == other.color
            and self.data.dtype == other.data.dtype
            and self.data.shape == other.data.shape
            and self.data.tobytes() == other.data.tobytes()
        )


def from_views(views: np.ndarray, color: ColorTag = ColorTag.Y) -> LightField:
    """Wrap a (U, V, H, W) or (U, V, C, H, W) array."""
    views = np.asarray(views)
    if views.ndim == 4:
        views = views[:, :, None]
    if views.dtype != np.uint8:
        views = views.astype(np.float32)
    return LightField(views, color)


def _rgb_to_ycbcr(rgb: np.ndarray, offset: float) -> np.ndarray:
    r, g, b = rgb[:, :, 0], rgb[:, :, 1], rgb[:, :, 2]
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cb = 0.564 * (b - y) + offset
    cr = 0.713 * (r - y) + offset
    return np.stack([y, cb, cr], axis=2)


def _ycbcr_to_rgb(ycc: np.ndarray, offset: float) -> np.ndarray:
    y, cb, cr = ycc[:, :, 0], ycc[:, :, 1], ycc[:, :, 2]
    r = y + (cr - offset) / 0.713
    b = y + (cb - offset) / 0.564
    g = (y - 0.299 * r - 0.114 * b) / 0.587
    return np.stack([r, g, b], axis=2)


def _convert(lf: LightField, fn, source: ColorTag, target: ColorTag) -> LightField:
    if lf.channels != 3:
        raise ValueError(f"color conversion needs 3 channels, got {lf.channels}")
    if lf.color != source:
        raise ValueError(f"expected a {source.name} light field, got {lf.color.name}")
    if lf.is_real:
        out = fn(lf.data.astype(np.float64), 0.5)
        return LightField(np.clip(out, 0.0, 1.0).astype(np.float32), target)
    out = fn(lf.data.astype(np.float64), 128.0)
    return LightField(np.clip(np.rint(out), 0, 255).astype(np.uint8), target)


def rgb_to_ycbcr(lf: LightField) -> LightField:
    """Full-range BT.601 conversion (8-bit offsets 128, real-valued offsets 0.5)."""
    return _convert(lf, _rgb_to_ycbcr, ColorTag.RGB, ColorTag.YCBCR)


def ycbcr_to_rgb(lf: LightField) -> LightField:
    return _convert(lf, _ycbcr_to_rgb, ColorTag.YCBCR, ColorTag.RGB)


def y_channel(lf: LightField) -> LightField:
    """Single-channel luma light field; RGB input is converted first."""
    if lf.color == ColorTag.Y:
        return lf
    if lf.color == ColorTag.RGB:
        lf = rgb_to_ycbcr(lf)
    return LightField(np.ascontiguousarray(lf.data[:, :, :1]), ColorTag.Y)
