"""L1 training loop with a halving learning-rate staircase and per-epoch checkpoints.

All randomness of a run derives from ``TrainConfig.seed``: the patch order of
epoch e comes from the stream (seed, e) and the augmentation of batch b in
that epoch from (seed, e, b). A run can therefore resume from any saved step
and continue with the same trace.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .autograd import AdamState, NonFiniteError, Tensor, adam_step, ops
from .autograd.checkpoint import CheckpointError, load_arrays
from .data.augment import random_augment_pair
from .data.lightfield import LightField, y_channel
from .data.patches import extract_patches
from .model import ModelConfig, ModelWeights, ddan_forward

PatchPair = Tuple[np.ndarray, np.ndarray]  # LR (U, V, h, w), HR (U, V, a*h, a*w)

TRACE_COLUMNS = ("step", "epoch", "lr", "loss")


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    lr0: float = 5e-4
    halving_period: int = 20
    epochs: int = 80
    batch_size: int = 30
    seed: int = 0
    scale: int = 2
    patch_size: int = 64  # HR pixels
    stride: int = 32
    data_paths: Tuple[str, ...] = ()
    checkpoint: Optional[str] = None
    trace_path: Optional[str] = None
    max_steps: Optional[int] = None
    augment: bool = True

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if self.epochs < 0 or self.halving_period < 1:
            raise ValueError("epochs must be >= 0 and the halving period >= 1")

    @classmethod
    def desk(cls, **overrides) -> "TrainConfig":
        """Single-core defaults: batch 4 and 64-pixel HR patches (32 LR pixels at 2x)."""
        return replace(cls(batch_size=4), **overrides)

    def lr(self, epoch: int) -> float:
        return lr_schedule(epoch, self.lr0, self.halving_period)


def lr_schedule(epoch: int, lr0: float = 5e-4, period: int = 20) -> float:
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    return lr0 * 0.5 ** (epoch // period)


def l1_loss(sr: Tensor, hr) -> Tensor:
    """Mean absolute error per pixel, averaged over views (all views share dims)."""
    hr = hr.data if isinstance(hr, Tensor) else np.asarray(hr)
    if sr.shape != hr.shape:
        raise ValueError(f"l1_loss dims mismatch: {sr.shape} vs {hr.shape}")
    return ops.l1_mean(sr, hr)


def build_patches(lfs: Sequence[LightField], scale: int, size: int, stride: int) -> List[PatchPair]:
    """Y-channel LR/HR patch pairs from every light field, in input order."""
    pairs: List[PatchPair] = []
    for lf in lfs:
        for patch in extract_patches(y_channel(lf.to_real()), scale, size, stride):
            pairs.append((patch.lr[:, :, 0], patch.hr[:, :, 0]))
    return pairs


@dataclass
class TraceRow:
    step: int
    epoch: int
    lr: float
    loss: float


@dataclass
class TrainResult:
    weights: ModelWeights
    optimizer: AdamState
    trace: List[TraceRow] = field(default_factory=list)

    @property
    def steps(self) -> int:
        return self.optimizer.t


def steps_per_epoch(n_patches: int, batch_size: int) -> int:
    return math.ceil(n_patches / batch_size)


def epoch_order(seed: int, epoch: int, n: int) -> np.ndarray:
    return np.random.default_rng([seed, epoch]).permutation(n)


def make_batch(patches: Sequence[PatchPair], indices, rng: Optional[np.random.Generator]):
    """Stack a batch: LR (G, U, V, h, w) and HR (G*U*V, 1, a*h, a*w)."""
    lrs, hrs = [], []
    for i in indices:
        lr, hr = patches[i]
        if rng is not None:
            lr, hr = random_augment_pair(lr, hr, rng)
        lrs.append(lr)
        hrs.append(hr)
    lr = np.stack(lrs).astype(np.float32)
    hr = np.stack(hrs)
    return lr, hr.reshape(-1, 1, hr.shape[-2], hr.shape[-1])


def optimizer_arrays(state: AdamState) -> dict:
    out = {f"adam.m/{k}": v for k, v in state.m.items()}
    out.update({f"adam.v/{k}": v for k, v in state.v.items()})
    out["train.step"] = np.full((1, 1, 1, 1), state.t, np.float32)
    return out


def save_checkpoint(path, wts: ModelWeights, state: AdamState) -> None:
    wts.save(path, extra=optimizer_arrays(state))


def load_checkpoint(path, cfg: ModelConfig, dtype=None) -> Tuple[ModelWeights, AdamState]:
    """Weights plus optimizer state; a plain weights file gives a fresh optimizer."""
    arrays = load_arrays(path)
    wts = ModelWeights.from_arrays(cfg, arrays, dtype)
    state = AdamState()
    if "train.step" in arrays:
        state.t = int(arrays["train.step"].reshape(()))
        for p in wts:
            try:
                state.m[p.name] = arrays[f"adam.m/{p.name}"].astype(wts.dtype)
                state.v[p.name] = arrays[f"adam.v/{p.name}"].astype(wts.dtype)
            except KeyError as exc:
                raise CheckpointError(f"checkpoint lacks optimizer moments for {p.name}") from exc
    return wts, state


def _open_trace(path, append: bool):
    exists = Path(path).exists()
    handle = open(path, "a" if append else "w", newline="")
    writer = csv.writer(handle)
    if not (append and exists):
        writer.writerow(TRACE_COLUMNS)
    return handle, writer


def train(
    cfg: ModelConfig,
    wts: ModelWeights,
    patches: Sequence[PatchPair],
    tcfg: TrainConfig,
    state: Optional[AdamState] = None,
    on_step: Optional[Callable[[TraceRow], None]] = None,
) -> TrainResult:
    """Train ``wts`` in place; resumes at ``state.t`` when an optimizer state is given."""
    if len(patches) == 0:
        raise TrainingError("dataset is empty: no training patches")
    if wts.config != cfg:
        raise ValueError("weights were built for a different config")
    state = state or AdamState(lr=tcfg.lr0)
    spe = steps_per_epoch(len(patches), tcfg.batch_size)
    total = spe * tcfg.epochs
    if tcfg.max_steps is not None:
        total = min(total, tcfg.max_steps)
    result = TrainResult(wts, state)
    handle = writer = None
    if tcfg.trace_path:
        handle, writer = _open_trace(tcfg.trace_path, append=state.t > 0)
    try:
        while state.t < total:
            epoch, b = divmod(state.t, spe)
            order = epoch_order(tcfg.seed, epoch, len(patches))
            idx = order[b * tcfg.batch_size : (b + 1) * tcfg.batch_size]
            rng = np.random.default_rng([tcfg.seed, epoch, b]) if tcfg.augment else None
            lr, hr = make_batch(patches, idx, rng)
            state.lr = tcfg.lr(epoch)
            try:
                loss = l1_loss(ddan_forward(lr, cfg, wts), hr)
                loss.backward()
            except NonFiniteError as exc:
                raise TrainingError(f"non-finite values at step {state.t + 1} (epoch {epoch}): {exc}") from exc
            value = float(loss.data.reshape(()))
            del loss  # free the graph before the next forward pass
            if not np.isfinite(value):
                raise TrainingError(f"NaN loss at step {state.t + 1} (epoch {epoch})")
            adam_step(state, wts)
            wts.zero_grad()
            row = TraceRow(state.t, epoch, state.lr, value)
            result.trace.append(row)
            if writer is not None:
                writer.writerow([row.step, row.epoch, repr(row.lr), repr(row.loss)])
                handle.flush()
            if on_step is not None:
                on_step(row)
            if tcfg.checkpoint and (state.t % spe == 0 or state.t == total):
                save_checkpoint(tcfg.checkpoint, wts, state)
    finally:
        if handle is not None:
            handle.close()
    return result


def read_trace(path) -> List[TraceRow]:
    with open(path, newline="") as handle:
        rows = list(csv.DictReader(handle))
    return [TraceRow(int(r["step"]), int(r["epoch"]), float(r["lr"]), float(r["loss"])) for r in rows]
