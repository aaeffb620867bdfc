"""Adam with bias correction."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable

import numpy as np

from .params import Param

_MAX_STEPS = 2**31 - 1


@dataclass
class AdamState:
    lr: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(state: AdamState, params: Iterable[Param]) -> None:
    """One in-place Adam update of every trainable param that holds a gradient.

    Params whose gradient is missing are treated as having a zero gradient so
    their moments keep decaying in lockstep with the others.
    """
    if state.t >= _MAX_STEPS:
        raise OverflowError("Adam step counter overflow")
    params = [p for p in params if p.trainable]
    for p in params:
        g = p.value.grad
        if g is not None and g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} does not match param {p.name} {p.shape}")
    state.t += 1
    t = state.t
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for p in params:
        data = p.value.data
        g = p.value.grad
        if g is None:
            g = np.zeros_like(data)
        m = state.m.get(p.name)
        if m is None:
            m = state.m[p.name] = np.zeros_like(data)
            state.v[p.name] = np.zeros_like(data)
        v = state.v[p.name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        m_hat = m / c1
        v_hat = v / c2
        data -= (state.lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(data.dtype, copy=False)
