"""Named trainable parameters and their initialization."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from .tensor import Tensor, default_dtype


@dataclass
class Param:
    """A named tensor. Weights use dims (out_ch, in_ch, kh, kw); biases (1, ch, 1, 1)."""

    name: str
    value: Tensor
    trainable: bool = True

    def __post_init__(self):
        self.value.requires_grad = self.trainable

    @property
    def shape(self) -> Tuple[int, int, int, int]:
        return self.value.shape

    @property
    def grad(self):
        return self.value.grad

    def zero_grad(self) -> None:
        self.value.grad = None


def kaiming_init(shape, fan_in: int, seed: int, dtype=None, gain: float = 2.0) -> Tensor:
    """Zero-mean normal samples with variance gain / fan_in, reproducible from ``seed``.

    The default gain 2 suits a following ReLU; gain 1 suits a linear layer.
    """
    if fan_in <= 0:
        raise ValueError(f"kaiming_init needs fan_in > 0, got {fan_in}")
    rng = np.random.default_rng(seed)
    std = np.sqrt(gain / fan_in)
    data = rng.standard_normal(tuple(shape)) * std
    return Tensor(data.astype(dtype or default_dtype()))


def zeros_init(shape, dtype=None) -> Tensor:
    return Tensor(np.zeros(tuple(shape), dtype=dtype or default_dtype()))
