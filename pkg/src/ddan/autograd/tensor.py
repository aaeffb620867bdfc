"""Rank-4 tensor with a recorded computation history for reverse-mode gradients."""

from __future__ import annotations

import os
from contextlib import contextmanager
from typing import Callable, Iterator, Optional, Sequence, Tuple

import numpy as np

_DTYPES = {"f32": np.float32, "f64": np.float64}
_dtype_override: Optional[np.dtype] = None
_grad_enabled = True


class NonFiniteError(ArithmeticError):
    """Raised when an operation produces NaN or Inf values."""


def default_dtype() -> np.dtype:
    """Compute width: an explicit override, else ``DDAN_PRECISION`` (f32 default)."""
    if _dtype_override is not None:
        return _dtype_override
    key = os.environ.get("DDAN_PRECISION", "f32").strip().lower()
    if key not in _DTYPES:
        raise ValueError(f"DDAN_PRECISION must be one of {sorted(_DTYPES)}, got {key!r}")
    return np.dtype(_DTYPES[key])


def set_default_dtype(dtype) -> None:
    global _dtype_override
    _dtype_override = None if dtype is None else np.dtype(dtype)


@contextmanager
def precision(dtype) -> Iterator[None]:
    """Temporarily switch the default compute width, e.g. ``precision(np.float64)``."""
    global _dtype_override
    previous = _dtype_override
    _dtype_override = np.dtype(_DTYPES.get(dtype, dtype))
    try:
        yield
    finally:
        _dtype_override = previous


@contextmanager
def no_grad() -> Iterator[None]:
    """Skip history recording inside the block (inference)."""
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


def check_finite(arr: np.ndarray, where: str) -> None:
    if not np.isfinite(arr).all():
        raise NonFiniteError(f"non-finite values produced by {where}")


BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Tensor:
    """A rank-4 array (d0, d1, d2, d3) with optional gradient tracking.

    Tensors produced by an operation on at least one gradient-tracking input
    remember their parents and a closure mapping the output gradient to the
    input gradients. Only leaf tensors accumulate into ``grad``.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_op")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data)
        if arr.ndim != 4:
            raise ValueError(f"Tensor must be rank 4, got shape {arr.shape}")
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(default_dtype())
        self.data: np.ndarray = arr
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = bool(requires_grad)
        self._parents: Tuple[Tensor, ...] = ()
        self._backward: Optional[BackwardFn] = None
        self._op = ""

    @classmethod
    def _from_op(cls, data: np.ndarray, parents: Sequence["Tensor"], backward: BackwardFn, op: str) -> "Tensor":
        check_finite(data, op)
        out = cls(data)
        if _grad_enabled and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
            out._op = op
        return out

    @property
    def shape(self) -> Tuple[int, int, int, int]:
        return self.data.shape  # type: ignore[return-value]

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return self._backward is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        tag = f", op={self._op}" if self._op else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{tag}, requires_grad={self.requires_grad})"

    def __add__(self, other: "Tensor") -> "Tensor":
        from . import ops

        return ops.add(self, other)

    def __mul__(self, other) -> "Tensor":
        from . import ops

        if isinstance(other, Tensor):
            return ops.scale(self, other)
        return ops.mul_scalar(self, float(other))

    __rmul__ = __mul__

    def backward(self) -> None:
        """Propagate d(self)/d(leaf) into every reachable gradient-tracking leaf.

        ``self`` must be a (1, 1, 1, 1) result of recorded operations. Calling
        this twice without zeroing accumulates the leaf gradients.
        """
        if self.shape != (1, 1, 1, 1):
            raise ValueError(f"backward needs a (1,1,1,1) loss tensor, got {self.shape}")
        if self._backward is None:
            raise RuntimeError("backward called on a tensor with no computation history")

        order = _topological_order(self)
        grads = {id(self): np.ones_like(self.data)}
        for node in order:
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                if node.requires_grad:
                    node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            parent_grads = node._backward(g)
            for parent, pg in zip(node._parents, parent_grads):
                if pg is None or not parent.requires_grad:
                    continue
                check_finite(pg, f"backward of {node._op}")
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg


def _topological_order(root: Tensor) -> list:
    """Nodes ordered so every node precedes its parents (iterative DFS)."""
    order: list = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))
    order.reverse()
    return order
