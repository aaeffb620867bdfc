"""Minimal rank-4 reverse-mode autograd kernel."""

from .tensor import NonFiniteError, Tensor, default_dtype, no_grad, precision, set_default_dtype
from .params import Param, kaiming_init, zeros_init
from .optim import AdamState, adam_step
from . import ops
from .ops import (
    activation,
    add,
    add_n,
    conv2d,
    global_avg_pool,
    pixel_shuffle,
    relu,
    scale,
    sigmoid,
)


def backward(loss: Tensor) -> None:
    loss.backward()


__all__ = [
    "AdamState",
    "NonFiniteError",
    "Param",
    "Tensor",
    "activation",
    "adam_step",
    "add",
    "add_n",
    "backward",
    "conv2d",
    "default_dtype",
    "global_avg_pool",
    "kaiming_init",
    "no_grad",
    "ops",
    "pixel_shuffle",
    "precision",
    "relu",
    "scale",
    "set_default_dtype",
    "sigmoid",
    "zeros_init",
]
