"""Forward pass of the dense dual-attention network.

Several light fields can be processed at once: the leading tensor dimension
then stacks ``groups`` light fields of N views each, i.e. (G*N, C, H, W) in
the channel-attention layout and (G*C, N, H, W) in the view-attention layout.
"""

from __future__ import annotations

from typing import Callable, List, Optional, Sequence

import numpy as np

from ..autograd import Tensor, no_grad, ops
from ..data.resample import upsample
from .config import ModelConfig
from .weights import ModelWeights

Block = Callable[[Tensor], Tensor]


def _conv(x: Tensor, wts: ModelWeights, name: str, dilation: int = 1) -> Tensor:
    return ops.conv2d(x, wts[f"{name}.w"], wts[f"{name}.b"], dilation=dilation)


def residual_block(x: Tensor, wts: ModelWeights, name: str) -> Tensor:
    """x + conv(relu(conv(x)))."""
    h = ops.relu(_conv(x, wts, f"{name}.conv1"))
    return ops.add(x, _conv(h, wts, f"{name}.conv2"))


def shallow_extract(views: Tensor, wts: ModelWeights) -> Tensor:
    """Per-view features (G*N, 1, H, W) -> (G*N, C, H, W) with shared weights."""
    x = _conv(views, wts, "shallow.conv0")
    if wts.config.use_aspp:
        branches = [_conv(x, wts, f"shallow.aspp.d{d}", dilation=d) for d in (1, 2, 4)]
        x = _conv(ops.concat_channels(branches), wts, "shallow.aspp.merge")
    else:
        x = residual_block(x, wts, "shallow.aspp_rb")
    x = residual_block(x, wts, "shallow.rb1")
    return residual_block(x, wts, "shallow.rb2")


def _gate(x: Tensor, wts: ModelWeights, name: str) -> Tensor:
    z = ops.global_avg_pool(x)
    h = ops.relu(_conv(z, wts, f"{name}.gate1"))
    return ops.sigmoid(_conv(h, wts, f"{name}.gate2"))


def view_attention(x: Tensor, wts: ModelWeights, name: str, record: Optional[list] = None) -> Tensor:
    """Rescale each view map of every (group, channel) slice of x (G*C, N, H, W).

    The N pooled statistics of a slice go through the shared FC-ReLU-FC gate
    and a sigmoid; the resulting weight w_n multiplies view n.
    """
    if x.shape[1] != wts[f"{name}.gate1.w"].shape[1]:
        raise ValueError(f"view attention expects {wts[f'{name}.gate1.w'].shape[1]} views, got {x.shape[1]}")
    w = _gate(x, wts, name)
    if record is not None:
        record.append(w.data)
    return ops.scale(x, w)


def channel_attention(y: Tensor, wts: ModelWeights, name: str, record: Optional[list] = None) -> Tensor:
    """Rescale each channel of every view of y (G*N, C, H, W)."""
    if y.shape[1] != wts[f"{name}.gate1.w"].shape[1]:
        raise ValueError(f"channel attention expects {wts[f'{name}.gate1.w'].shape[1]} channels, got {y.shape[1]}")
    m = _gate(y, wts, name)
    if record is not None:
        record.append(m.data)
    return ops.scale(y, m)


def rvab_forward(x: Tensor, wts: ModelWeights, name: str, record: Optional[list] = None) -> Tensor:
    """Residual view-attention block: x + VA(R2(R1(x)))."""
    h = residual_block(residual_block(x, wts, f"{name}.rb1"), wts, f"{name}.rb2")
    if wts.config.use_va:
        h = view_attention(h, wts, name, record)
    return ops.add(x, h)


def rcab_forward(x: Tensor, wts: ModelWeights, name: str, record: Optional[list] = None) -> Tensor:
    """Residual channel-attention block: x + CA(R2(R1(x)))."""
    h = residual_block(residual_block(x, wts, f"{name}.rb1"), wts, f"{name}.rb2")
    if wts.config.use_ca:
        h = channel_attention(h, wts, name, record)
    return ops.add(x, h)


def branch_forward(f0: Tensor, blocks: Sequence[Block]) -> Tensor:
    """Dense-sum recurrence F_k = Block_k(F_0 + ... + F_{k-1}); returns F_0 + ... + F_n."""
    outputs = [f0]
    for block in blocks:
        outputs.append(block(ops.add_n(outputs)))
    return ops.add_n(outputs)


def fuse(f_va: Tensor, f_ca: Tensor, wts: ModelWeights, groups: int = 1) -> Tensor:
    """Bring F_VA to the (G*N, C, H, W) layout, concatenate with F_CA and fuse."""
    f_va_t = ops.swap_leading(f_va, groups)
    if f_va_t.shape != f_ca.shape:
        raise ValueError(f"fuse: incompatible branch outputs {f_va_t.shape} and {f_ca.shape}")
    x = _conv(ops.concat_channels([f_va_t, f_ca]), wts, "fusion.in")
    x = residual_block(x, wts, "fusion.rb1")
    x = residual_block(x, wts, "fusion.rb2")
    return _conv(x, wts, "fusion.out")


def upscale(f_fu: Tensor, lr_views: np.ndarray, wts: ModelWeights) -> Tensor:
    """Sub-pixel head plus the bicubic upsample of the LR views (G*N, 1, H, W)."""
    a = wts.config.scale
    if a not in (2, 4):
        raise ValueError(f"upscale factor must be 2 or 4, got {a}")
    x = _conv(f_fu, wts, "upscale.expand")
    x = ops.pixel_shuffle(x, a)
    x = _conv(x, wts, "upscale.out")
    base = upsample(np.asarray(lr_views), a)
    return ops.add_constant(x, base)


def _as_groups(lr: np.ndarray, cfg: ModelConfig) -> np.ndarray:
    """Normalize LR input to (G, U, V, H, W)."""
    lr = np.asarray(lr)
    if lr.ndim == 5 and lr.shape[2] == 1 and lr.shape[:2] == (cfg.angular_u, cfg.angular_v):
        lr = lr[:, :, 0]
    if lr.ndim == 4:
        lr = lr[None]
    if lr.ndim != 5 or lr.shape[1:3] != (cfg.angular_u, cfg.angular_v):
        raise ValueError(
            f"LR input must be (U, V, H, W) or (G, U, V, H, W) with U x V = "
            f"{cfg.angular_u} x {cfg.angular_v}, got {lr.shape}"
        )
    return lr


def ddan_forward(lr, cfg: ModelConfig, wts: ModelWeights, record: Optional[dict] = None) -> Tensor:
    """Super-resolve every SAI of one or more Y-channel light fields.

    ``lr`` is (U, V, H, W) or (G, U, V, H, W); the result is a tensor of dims
    (G*U*V, 1, aH, aW) in row-major (g, u, v) order. When ``record`` is a
    dict, the view/channel attention weights of every block are appended to
    ``record["va"]`` / ``record["ca"]``.
    """
    if wts.config != cfg:
        raise ValueError("weights were built for a different config")
    lr = _as_groups(lr, cfg)
    G, U, V, H, W = lr.shape
    N, C = cfg.n_views, cfg.channels
    dtype = wts.dtype
    views = lr.reshape(G * N, 1, H, W)
    va_rec = ca_rec = None
    if record is not None:
        va_rec = record.setdefault("va", [])
        ca_rec = record.setdefault("ca", [])

    f_s = shallow_extract(Tensor(views.astype(dtype)), wts)
    if cfg.structure == "dual_branch":
        f_v0 = ops.swap_leading(f_s, G)
        va_blocks = [lambda t, k=k: rvab_forward(t, wts, f"va.{k}", va_rec) for k in range(1, cfg.n_blocks + 1)]
        ca_blocks = [lambda t, k=k: rcab_forward(t, wts, f"ca.{k}", ca_rec) for k in range(1, cfg.n_blocks + 1)]
        f_va = branch_forward(f_v0, va_blocks)
        f_ca = branch_forward(f_s, ca_blocks)
    else:

        def cascade(t: Tensor, k: int) -> Tensor:
            t = ops.swap_leading(rvab_forward(ops.swap_leading(t, G), wts, f"cascade.{k}.va", va_rec), G)
            return rcab_forward(t, wts, f"cascade.{k}.ca", ca_rec)

        f_ca = branch_forward(f_s, [lambda t, k=k: cascade(t, k) for k in range(1, cfg.n_blocks + 1)])
        f_va = ops.swap_leading(f_ca, G)
    f_fu = fuse(f_va, f_ca, wts, G)
    return upscale(f_fu, views, wts)


def super_resolve(lr, cfg: ModelConfig, wts: ModelWeights) -> np.ndarray:
    """Numpy wrapper: (U, V, H, W) -> (U, V, aH, aW); (G, U, V, H, W) keeps its G."""
    groups = _as_groups(lr, cfg)
    with no_grad():
        out = ddan_forward(groups, cfg, wts).data
    out = out.reshape(groups.shape[:3] + out.shape[2:])
    return out if np.ndim(lr) == 5 and np.shape(lr)[2] != 1 else out[0]


def probe_attention(lr, cfg: ModelConfig, wts: ModelWeights) -> np.ndarray:
    """View-attention weights per block, averaged over feature channels.

    Returns an (n_blocks, U*V) array; row k-1 holds Att_k.
    """
    if not cfg.use_va:
        raise ValueError("view attention is disabled in this configuration")
    record: dict = {}
    with no_grad():
        ddan_forward(lr, cfg, wts, record)
    rows = [w.reshape(-1, cfg.n_views).mean(axis=0) for w in record["va"]]
    return np.stack(rows).astype(np.float64)
