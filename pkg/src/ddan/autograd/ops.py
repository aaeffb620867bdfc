"""Differentiable operations on rank-4 tensors.

Every function takes and returns :class:`Tensor` objects laid out as
(batch, channels, height, width). The backward closures return one gradient
per parent, in parent order, or ``None`` where no gradient is needed.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .tensor import Tensor


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _out_extent(n: int, k: int, stride: int, dilation: int, pad: int) -> int:
    span = dilation * (k - 1) + 1
    return (n + 2 * pad - span) // stride + 1


def channels_last(arr: np.ndarray) -> np.ndarray:
    """(B, C, H, W) array -> contiguous (B, H, W, C) buffer (free when already channel-last)."""
    return np.ascontiguousarray(arr.transpose(0, 2, 3, 1))


def _nchw(buf: np.ndarray) -> np.ndarray:
    """View a channel-last (B, H, W, C) buffer with (B, C, H, W) indexing."""
    return buf.transpose(0, 3, 1, 2)


def _tap_range(n_out: int, n_in: int, offset: int, stride: int):
    """Output index range whose tap ``stride*o + offset`` falls inside [0, n_in)."""
    lo = max(0, -(offset // stride) if offset < 0 else 0)
    while lo < n_out and stride * lo + offset < 0:
        lo += 1
    hi = n_out
    while hi > lo and stride * (hi - 1) + offset >= n_in:
        hi -= 1
    return lo, hi


def _im2col(xh: np.ndarray, k: int, stride: int, dilation: int, pad: int, Ho: int, Wo: int) -> np.ndarray:
    """Channel-last patches (B*Ho*Wo, k*k*C), zero outside the input."""
    B, H, W, C = xh.shape
    cols = np.zeros((B, Ho, Wo, k * k, C), xh.dtype)
    for i in range(k):
        oi = i * dilation - pad
        y0, y1 = _tap_range(Ho, H, oi, stride)
        for j in range(k):
            oj = j * dilation - pad
            x0, x1 = _tap_range(Wo, W, oj, stride)
            if y1 <= y0 or x1 <= x0:
                continue
            cols[:, y0:y1, x0:x1, i * k + j, :] = xh[
                :,
                stride * y0 + oi : stride * (y1 - 1) + oi + 1 : stride,
                stride * x0 + oj : stride * (x1 - 1) + oj + 1 : stride,
                :,
            ]
    return cols.reshape(B * Ho * Wo, k * k * C)


def _col2im(dcols: np.ndarray, shape, k: int, stride: int, dilation: int, pad: int, Ho: int, Wo: int) -> np.ndarray:
    B, H, W, C = shape
    dc = dcols.reshape(B, Ho, Wo, k * k, C)
    gx = np.zeros(shape, dcols.dtype)
    for i in range(k):
        oi = i * dilation - pad
        y0, y1 = _tap_range(Ho, H, oi, stride)
        for j in range(k):
            oj = j * dilation - pad
            x0, x1 = _tap_range(Wo, W, oj, stride)
            if y1 <= y0 or x1 <= x0:
                continue
            gx[
                :,
                stride * y0 + oi : stride * (y1 - 1) + oi + 1 : stride,
                stride * x0 + oj : stride * (x1 - 1) + oj + 1 : stride,
                :,
            ] += dc[:, y0:y1, x0:x1, i * k + j, :]
    return gx


def _shift_sum(flat: np.ndarray, taps: np.ndarray, starts: Sequence[int], n: int) -> np.ndarray:
    """sum_t flat[starts[t] : starts[t] + n] @ taps[t]."""
    out = flat[starts[0] : starts[0] + n] @ taps[0]
    for start, tap in zip(starts[1:], taps[1:]):
        out += flat[start : start + n] @ tap
    return out


def _conv_stride1(x: Tensor, w: Tensor, b: Optional[Tensor], dilation: int, pad: int, Ho: int, Wo: int) -> Tensor:
    """Stride-1 correlation as k*k GEMMs over flat shifted views of a padded channel-last buffer.

    Row r = (b, y, x) of the flattened padded input plus the tap offset
    i*d*Wp + j*d is the (i, j) tap of output (b, y, x); rows with y >= Ho or
    x >= Wo are computed and discarded.
    """
    B, C, H, W = x.shape
    O, _, k, _ = w.shape
    dtype = np.result_type(x.data, w.data)
    Hp, Wp = H + 2 * pad, W + 2 * pad
    n = B * Hp * Wp
    offsets = [i * dilation * Wp + j * dilation for i in range(k) for j in range(k)]
    tail = offsets[-1]
    if pad == 0 and tail == 0:
        xp = channels_last(x.data.astype(dtype, copy=False)).reshape(n, C)
    else:
        xp = np.zeros((n + tail, C), dtype)
        xp[:n].reshape(B, Hp, Wp, C)[:, pad : pad + H, pad : pad + W] = x.data.transpose(0, 2, 3, 1)
    wd = w.data.astype(dtype, copy=False)
    taps = np.ascontiguousarray(wd.transpose(2, 3, 1, 0)).reshape(k * k, C, O)
    full = _shift_sum(xp, taps, offsets, n)
    if b is not None:
        full += b.data.reshape(1, O).astype(dtype, copy=False)
    out = full.reshape(B, Hp, Wp, O)[:, :Ho, :Wo].transpose(0, 3, 1, 2)

    def backward(g: np.ndarray):
        # zero prefix of `tail` rows lets the input gradient read g at r - offset
        gp = np.zeros((tail + n, O), dtype)
        gp[tail:].reshape(B, Hp, Wp, O)[:, :Ho, :Wo] = g.transpose(0, 2, 3, 1)
        gflat = gp[tail:]
        gx = gw = gb = None
        if w.requires_grad:
            gt = np.stack([xp[off : off + n].T @ gflat for off in offsets])
            gw = np.ascontiguousarray(gt.reshape(k, k, C, O).transpose(3, 2, 0, 1), dtype=w.dtype)
        if b is not None and b.requires_grad:
            gb = gflat.sum(axis=0).reshape(1, O, 1, 1).astype(b.dtype, copy=False)
        if x.requires_grad:
            taps_t = np.ascontiguousarray(taps.transpose(0, 2, 1))
            gxp = _shift_sum(gp, taps_t, [tail - off for off in offsets], n)
            gx = gxp.reshape(B, Hp, Wp, C)[:, pad : pad + H, pad : pad + W].transpose(0, 3, 1, 2)
            gx = gx.astype(x.dtype, copy=False)
        return (gx, gw, gb) if b is not None else (gx, gw)

    parents = (x, w, b) if b is not None else (x, w)
    return Tensor._from_op(out, parents, backward, "conv2d")


def conv2d(
    x: Tensor,
    w: Tensor,
    b: Optional[Tensor] = None,
    stride: int = 1,
    dilation: int = 1,
    pad: Optional[int] = None,
) -> Tensor:
    """2-D cross-correlation with zero padding.

    ``w`` has dims (out_ch, in_ch, k, k); ``b`` (1, out_ch, 1, 1). When ``pad``
    is omitted it defaults to ``dilation * (k - 1) // 2`` so odd kernels keep
    the spatial size. The result is stored channel-last in memory.
    """
    B, C, H, W = x.shape
    O, Cw, kh, kw = w.shape
    if Cw != C:
        raise ValueError(f"conv2d channel mismatch: input has {C}, kernel expects {Cw}")
    if kh != kw:
        raise ValueError(f"conv2d needs square kernels, got {kh}x{kw}")
    if b is not None and b.shape != (1, O, 1, 1):
        raise ValueError(f"conv2d bias must have dims (1, {O}, 1, 1), got {b.shape}")
    if stride < 1 or dilation < 1:
        raise ValueError("stride and dilation must be positive")
    k = kh
    if pad is None:
        pad = dilation * (k - 1) // 2
    if pad < 0:
        raise ValueError("conv2d padding must be non-negative")
    Ho = _out_extent(H, k, stride, dilation, pad)
    Wo = _out_extent(W, k, stride, dilation, pad)
    if Ho <= 0 or Wo <= 0:
        raise ValueError(f"conv2d output extent is non-positive ({Ho}x{Wo})")
    if stride == 1:
        return _conv_stride1(x, w, b, dilation, pad, Ho, Wo)

    dtype = np.result_type(x.data, w.data)
    xh = channels_last(x.data.astype(dtype, copy=False))
    wd = w.data.astype(dtype, copy=False)
    # weight matrix over (tap, channel) columns to match the channel-last patches
    wm = np.ascontiguousarray(wd.transpose(0, 2, 3, 1)).reshape(O, k * k * C)
    M = B * Ho * Wo
    cols = _im2col(xh, k, stride, dilation, pad, Ho, Wo)
    out = cols @ wm.T
    if b is not None:
        out += b.data.reshape(1, O).astype(dtype, copy=False)
    out_view = _nchw(out.reshape(B, Ho, Wo, O))

    def backward(g: np.ndarray):
        gm = channels_last(g).reshape(M, O)
        gx = gw = gb = None
        if w.requires_grad:
            gw = (gm.T @ cols).reshape(O, k, k, C).transpose(0, 3, 1, 2)
            gw = np.ascontiguousarray(gw, dtype=w.dtype)
        if b is not None and b.requires_grad:
            gb = gm.sum(axis=0).reshape(1, O, 1, 1).astype(b.dtype, copy=False)
        if x.requires_grad:
            gx = _nchw(_col2im(gm @ wm, (B, H, W, C), k, stride, dilation, pad, Ho, Wo))
            gx = gx.astype(x.dtype, copy=False)
        return (gx, gw, gb) if b is not None else (gx, gw)

    parents = (x, w, b) if b is not None else (x, w)
    return Tensor._from_op(out_view, parents, backward, "conv2d")


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    out = np.maximum(x.data, 0)
    return Tensor._from_op(out, (x,), lambda g: (g * mask,), "relu")


def sigmoid(x: Tensor) -> Tensor:
    # split by sign so exp never overflows
    d = x.data
    e = np.exp(-np.abs(d))
    out = np.where(d >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(x.dtype, copy=False)
    # keep the open interval (0, 1) under rounding
    info = np.finfo(out.dtype)
    out = np.clip(out, info.tiny, 1.0 - info.epsneg)
    return Tensor._from_op(out, (x,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def activation(x: Tensor, kind: str) -> Tensor:
    if kind == "relu":
        return relu(x)
    if kind == "sigmoid":
        return sigmoid(x)
    raise ValueError(f"unknown activation {kind!r}")


def global_avg_pool(x: Tensor) -> Tensor:
    B, C, H, W = x.shape
    if H * W == 0:
        raise ValueError("global_avg_pool over an empty spatial grid")
    out = x.data.mean(axis=(2, 3), keepdims=True)

    def backward(g):
        return (np.broadcast_to(g / (H * W), x.shape).astype(x.dtype),)

    return Tensor._from_op(out, (x,), backward, "global_avg_pool")


def pixel_shuffle(x: Tensor, a: int) -> Tensor:
    """(B, a*a*C, H, W) -> (B, C, a*H, a*W), out[b,c,a*i+p,a*j+q] = in[b, c*a*a+p*a+q, i, j]."""
    B, Ca, H, W = x.shape
    if a < 1 or Ca % (a * a):
        raise ValueError(f"pixel_shuffle: {Ca} channels not divisible by {a}^2")
    C = Ca // (a * a)
    buf = np.empty((B, H, a, W, a, C), x.dtype)
    buf[...] = x.data.reshape(B, C, a, a, H, W).transpose(0, 4, 2, 5, 3, 1)
    out = _nchw(buf.reshape(B, H * a, W * a, C))

    def backward(g):
        return (pixel_unshuffle_array(g, a),)

    return Tensor._from_op(out, (x,), backward, "pixel_shuffle")


def pixel_unshuffle_array(arr: np.ndarray, a: int) -> np.ndarray:
    """Inverse index map of :func:`pixel_shuffle` on a plain array."""
    B, C, Ha, Wa = arr.shape
    if Ha % a or Wa % a:
        raise ValueError(f"pixel_unshuffle: spatial dims {Ha}x{Wa} not divisible by {a}")
    H, W = Ha // a, Wa // a
    buf = np.empty((B, H, W, C, a, a), arr.dtype)
    buf[...] = arr.reshape(B, C, H, a, W, a).transpose(0, 2, 4, 1, 3, 5)
    return _nchw(buf.reshape(B, H, W, C * a * a))


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ValueError(f"add shape mismatch {a.shape} vs {b.shape}")
    return Tensor._from_op(a.data + b.data, (a, b), lambda g: (g, g), "add")


def add_n(xs: Sequence[Tensor]) -> Tensor:
    """Elementwise sum of equally shaped tensors."""
    if not xs:
        raise ValueError("add_n needs at least one tensor")
    shape = xs[0].shape
    for t in xs:
        if t.shape != shape:
            raise ValueError(f"add_n shape mismatch {t.shape} vs {shape}")
    if len(xs) == 1:
        return xs[0]
    out = xs[0].data.copy()
    for t in xs[1:]:
        out += t.data
    # capture the count, not the caller's list: dense blocks append the result to it
    n = len(xs)
    return Tensor._from_op(out, tuple(xs), lambda g: (g,) * n, "add_n")


def add_constant(x: Tensor, c: np.ndarray) -> Tensor:
    """x + c where ``c`` is a plain array (no gradient)."""
    c = np.asarray(c)
    if c.shape != x.shape:
        raise ValueError(f"add_constant shape mismatch {c.shape} vs {x.shape}")
    return Tensor._from_op(x.data + c.astype(x.dtype, copy=False), (x,), lambda g: (g,), "add_constant")


def mul_scalar(x: Tensor, s: float) -> Tensor:
    return Tensor._from_op(x.data * x.dtype.type(s), (x,), lambda g: (g * s,), "mul_scalar")


def scale(x: Tensor, w: Tensor) -> Tensor:
    """Per-(batch, channel) rescaling: x (B,C,H,W) times w (B,C,1,1)."""
    B, C = x.shape[:2]
    if w.shape != (B, C, 1, 1):
        raise ValueError(f"scale weights must have dims {(B, C, 1, 1)}, got {w.shape}")

    def backward(g):
        gx = g * w.data if x.requires_grad else None
        gw = (g * x.data).sum(axis=(2, 3), keepdims=True) if w.requires_grad else None
        return gx, gw

    return Tensor._from_op(x.data * w.data, (x, w), backward, "scale")


def concat_channels(xs: Sequence[Tensor]) -> Tensor:
    B, _, H, W = xs[0].shape
    for t in xs:
        if (t.shape[0], t.shape[2], t.shape[3]) != (B, H, W):
            raise ValueError(f"concat_channels: incompatible dims {t.shape} vs {xs[0].shape}")
    sizes = [t.shape[1] for t in xs]
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    buf = np.empty((B, H, W, int(bounds[-1])), np.result_type(*[t.data for t in xs]))
    for t, lo, hi in zip(xs, bounds[:-1], bounds[1:]):
        buf[..., lo:hi] = t.data.transpose(0, 2, 3, 1)

    def backward(g):
        return tuple(g[:, lo:hi] for lo, hi in zip(bounds[:-1], bounds[1:]))

    return Tensor._from_op(_nchw(buf), tuple(xs), backward, "concat_channels")


def swap_leading(x: Tensor, groups: int = 1) -> Tensor:
    """Swap the two leading axes within each of ``groups`` consecutive blocks.

    With ``groups`` light fields stacked along dim 0, (G*N, C, H, W) becomes
    (G*C, N, H, W); applying it again with the new leading size restores the
    original layout.
    """
    GN, C, H, W = x.shape
    if groups < 1 or GN % groups:
        raise ValueError(f"swap_leading: leading dim {GN} not divisible by {groups} groups")
    N = GN // groups

    def swap(arr, lead, second):
        buf = np.empty((groups, second, H, W, lead), arr.dtype)
        buf[...] = arr.reshape(groups, lead, second, H, W).transpose(0, 2, 3, 4, 1)
        return _nchw(buf.reshape(groups * second, H, W, lead))

    out = swap(x.data, N, C)
    return Tensor._from_op(out, (x,), lambda g: (swap(g, C, N),), "swap_leading")


def l1_mean(x: Tensor, target: np.ndarray) -> Tensor:
    """Mean absolute difference against a constant target, as a (1,1,1,1) tensor."""
    target = np.asarray(target)
    if target.shape != x.shape:
        raise ValueError(f"l1 shape mismatch {x.shape} vs {target.shape}")
    diff = x.data - target.astype(x.dtype, copy=False)
    n = diff.size
    out = np.array(np.abs(diff).mean(), dtype=x.dtype).reshape(1, 1, 1, 1)

    def backward(g):
        return (np.sign(diff) * (g.reshape(()) / n),)

    return Tensor._from_op(out, (x,), backward, "l1_mean")


def sum_all(x: Tensor) -> Tensor:
    out = np.array(x.data.sum(), dtype=x.dtype).reshape(1, 1, 1, 1)
    return Tensor._from_op(out, (x,), lambda g: (np.broadcast_to(g.reshape(()), x.shape).astype(x.dtype),), "sum_all")


def mean_all(x: Tensor) -> Tensor:
    n = x.data.size
    out = np.array(x.data.mean(), dtype=x.dtype).reshape(1, 1, 1, 1)
    return Tensor._from_op(out, (x,), lambda g: (np.broadcast_to(g.reshape(()) / n, x.shape).astype(x.dtype),), "mean_all")


def weighted_sum(x: Tensor, weights: np.ndarray) -> Tensor:
    """Σ x·weights: a scalar probe used by gradient checks."""
    weights = np.asarray(weights, dtype=x.dtype)
    out = np.array((x.data * weights).sum(), dtype=x.dtype).reshape(1, 1, 1, 1)
    return Tensor._from_op(out, (x,), lambda g: (weights * g.reshape(()),), "weighted_sum")
