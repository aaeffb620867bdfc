"""Central finite-difference checks of the autograd ops and the full model.

All checks run in 64-bit mode. Non-scalar outputs are reduced to a scalar
through a fixed random projection, so every output entry contributes to the
checked gradient. The relative error of one entry is
``|analytic - numeric| / max(|analytic|, |numeric|, floor)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

import numpy as np

from .autograd import Param, Tensor, ops, precision
from .model import PRESETS, ModelConfig, ModelWeights, ddan_forward, init_weights

STEP = 1e-5
FLOOR = 1e-6
OP_TOLERANCE = 1e-4
MODEL_TOLERANCE = 1e-3

Builder = Callable[[Dict[str, Tensor]], Tensor]


@dataclass
class CheckResult:
    name: str
    max_rel_err: float
    n_entries: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.tolerance


def relative_error(analytic, numeric, floor: float = FLOOR):
    analytic, numeric = np.asarray(analytic), np.asarray(numeric)
    return np.abs(analytic - numeric) / np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)


def _evaluate(build: Builder, arrays: Dict[str, np.ndarray]) -> float:
    return float(build({k: Tensor(v) for k, v in arrays.items()}).data.reshape(()))


def check_gradients(
    build: Builder,
    inputs: Dict[str, np.ndarray],
    rng: Optional[np.random.Generator] = None,
    entries: Optional[int] = None,
    h: float = STEP,
) -> tuple:
    """Compare backward() against central differences.

    ``entries`` limits the number of randomly chosen entries checked per
    input; ``None`` checks every entry. Returns (max relative error, count).
    """
    arrays = {k: np.array(v, dtype=np.float64) for k, v in inputs.items()}
    tensors = {k: Tensor(v.copy(), requires_grad=True) for k, v in arrays.items()}
    build(tensors).backward()
    worst, count = 0.0, 0
    for name, arr in arrays.items():
        grad = tensors[name].grad
        analytic = np.zeros_like(arr) if grad is None else grad
        flat = arr.reshape(-1)
        if entries is None or entries >= flat.size:
            picks = np.arange(flat.size)
        else:
            picks = (rng or np.random.default_rng(0)).choice(flat.size, entries, replace=False)
        for i in picks:
            keep = flat[i]
            flat[i] = keep + h
            f_plus = _evaluate(build, arrays)
            flat[i] = keep - h
            f_minus = _evaluate(build, arrays)
            flat[i] = keep
            numeric = (f_plus - f_minus) / (2 * h)
            worst = max(worst, float(relative_error(analytic.reshape(-1)[i], numeric)))
            count += 1
    return worst, count


def _away_from_zero(rng, shape, margin=0.05):
    x = rng.standard_normal(shape)
    return np.where(np.abs(x) < margin, np.sign(x + 1e-12) * margin, x)


def _op_cases() -> Dict[str, Callable[[np.random.Generator], tuple]]:
    """name -> trial factory returning (builder, inputs)."""

    def conv(k, dilation=1, stride=1, bias=True):
        def make(rng):
            B, C, O = rng.integers(1, 3), rng.integers(1, 4), rng.integers(1, 4)
            H, W = rng.integers(k + 1, 8), rng.integers(k + 1, 8)
            inputs = {"x": rng.standard_normal((B, C, H, W)), "w": rng.standard_normal((O, C, k, k))}
            if bias:
                inputs["b"] = rng.standard_normal((1, O, 1, 1))
            pad = dilation * (k - 1) // 2
            G = None

            def build(t):
                nonlocal G
                out = ops.conv2d(t["x"], t["w"], t.get("b"), stride=stride, dilation=dilation, pad=pad)
                if G is None:
                    G = rng.standard_normal(out.shape)
                return ops.weighted_sum(out, G)

            return build, inputs

        return make

    def unary(fn, sampler=None):
        def make(rng):
            shape = tuple(int(s) for s in rng.integers(1, 5, 4))
            x = (sampler or (lambda r, s: r.standard_normal(s)))(rng, shape)
            G = rng.standard_normal(fn(Tensor(x)).shape)
            return (lambda t: ops.weighted_sum(fn(t["x"]), G)), {"x": x}

        return make

    def shuffle(a):
        def make(rng):
            shape = (int(rng.integers(1, 3)), a * a * int(rng.integers(1, 3)), int(rng.integers(1, 4)), int(rng.integers(1, 4)))
            x = rng.standard_normal(shape)
            G = rng.standard_normal(ops.pixel_shuffle(Tensor(x), a).shape)
            return (lambda t: ops.weighted_sum(ops.pixel_shuffle(t["x"], a), G)), {"x": x}

        return make

    def binary(fn, second_shape=lambda s: s):
        def make(rng):
            shape = tuple(int(s) for s in rng.integers(1, 5, 4))
            x, y = rng.standard_normal(shape), rng.standard_normal(second_shape(shape))
            G = rng.standard_normal(fn(Tensor(x), Tensor(y)).shape)
            return (lambda t: ops.weighted_sum(fn(t["x"], t["y"]), G)), {"x": x, "y": y}

        return make

    def many(fn, n=3):
        def make(rng):
            shape = tuple(int(s) for s in rng.integers(1, 4, 4))
            inputs = {f"x{i}": rng.standard_normal(shape) for i in range(n)}
            G = rng.standard_normal(fn([Tensor(v) for v in inputs.values()]).shape)
            return (lambda t: ops.weighted_sum(fn([t[k] for k in sorted(t)]), G)), inputs

        return make

    def concat(rng):
        B, H, W = (int(s) for s in rng.integers(1, 4, 3))
        inputs = {f"x{i}": rng.standard_normal((B, int(rng.integers(1, 4)), H, W)) for i in range(3)}
        G = rng.standard_normal(ops.concat_channels([Tensor(v) for v in inputs.values()]).shape)
        return (lambda t: ops.weighted_sum(ops.concat_channels([t[k] for k in sorted(t)]), G)), inputs

    def swap(rng):
        g, n, c = (int(s) for s in rng.integers(1, 4, 3))
        x = rng.standard_normal((g * n, c, int(rng.integers(1, 4)), int(rng.integers(1, 4))))
        G = rng.standard_normal(ops.swap_leading(Tensor(x), g).shape)
        return (lambda t: ops.weighted_sum(ops.swap_leading(t["x"], g), G)), {"x": x}

    def l1(rng):
        shape = tuple(int(s) for s in rng.integers(1, 5, 4))
        target = rng.standard_normal(shape)
        x = target + _away_from_zero(rng, shape)
        return (lambda t: ops.l1_mean(t["x"], target)), {"x": x}

    def add_const(rng):
        shape = tuple(int(s) for s in rng.integers(1, 5, 4))
        c, G = rng.standard_normal(shape), rng.standard_normal(shape)
        return (lambda t: ops.weighted_sum(ops.add_constant(t["x"], c), G)), {"x": rng.standard_normal(shape)}

    def sigmoid_conv(rng):
        build, inputs = conv(3)(rng)
        G = rng.standard_normal((inputs["x"].shape[0], inputs["w"].shape[0]) + inputs["x"].shape[2:])
        return (lambda t: ops.weighted_sum(ops.sigmoid(ops.conv2d(t["x"], t["w"], t["b"])), G)), inputs

    return {
        "conv2d_3x3": conv(3),
        "conv2d_3x3_dil2": conv(3, dilation=2),
        "conv2d_3x3_dil4": conv(3, dilation=4),
        "conv2d_1x1": conv(1),
        "conv2d_3x3_stride2": conv(3, stride=2),
        "conv2d_nobias": conv(3, bias=False),
        "relu": unary(ops.relu, _away_from_zero),
        "sigmoid": unary(ops.sigmoid, lambda r, s: 3 * r.standard_normal(s)),
        "global_avg_pool": unary(ops.global_avg_pool),
        "pixel_shuffle_x2": shuffle(2),
        "pixel_shuffle_x4": shuffle(4),
        "add": binary(ops.add),
        "add_n": many(ops.add_n),
        "add_constant": add_const,
        "mul_scalar": unary(lambda x: ops.mul_scalar(x, -1.7)),
        "scale": binary(ops.scale, lambda s: s[:2] + (1, 1)),
        "concat_channels": concat,
        "swap_leading": swap,
        "l1_mean": l1,
        "sum_all": unary(ops.sum_all),
        "mean_all": unary(ops.mean_all),
        "sigmoid_of_conv2d": sigmoid_conv,
    }


OP_NAMES = tuple(_op_cases())


def check_ops(trials: int = 20, seed: int = 0, names=None) -> List[CheckResult]:
    """Every op on ``trials`` random small shapes, all entries checked."""
    results = []
    cases = _op_cases()
    with precision(np.float64):
        for name in names or OP_NAMES:
            rng = np.random.default_rng([seed, OP_NAMES.index(name)])
            worst, count = 0.0, 0
            for _ in range(trials):
                build, inputs = cases[name](rng)
                err, n = check_gradients(build, inputs)
                worst, count = max(worst, err), count + n
            results.append(CheckResult(name, worst, count, OP_TOLERANCE))
    return results


def check_model(
    cfg: Optional[ModelConfig] = None,
    size: int = 8,
    seed: int = 0,
    entries_per_param: int = 4,
) -> CheckResult:
    """Full forward pass on random weights; a random subset of entries per parameter."""
    cfg = cfg or PRESETS["tiny"]
    rng = np.random.default_rng(seed)
    with precision(np.float64):
        wts = init_weights(cfg, seed, np.float64)
        # nonzero biases so every bias path carries signal
        for p in wts:
            if p.name.endswith(".b"):
                p.value.data[...] = 0.1 * rng.standard_normal(p.shape)
        lr = rng.uniform(0.0, 1.0, (cfg.angular_u, cfg.angular_v, size, size))
        out_shape = (cfg.n_views, 1, cfg.scale * size, cfg.scale * size)
        G = rng.standard_normal(out_shape) / np.sqrt(np.prod(out_shape))
        names = [p.name for p in wts]

        def build(t):
            probe = ModelWeights(cfg, {n: Param(n, t[n], trainable=t[n].requires_grad) for n in names})
            return ops.weighted_sum(ddan_forward(lr, cfg, probe), G)

        inputs = {name: wts[name].data.copy() for name in names}
        worst, count = check_gradients(build, inputs, rng, entries=entries_per_param)
    label = "ddan_model" if cfg.structure == "dual_branch" else f"ddan_model_{cfg.structure}"
    return CheckResult(label, worst, count, MODEL_TOLERANCE)


def run_suite(trials: int = 20, seed: int = 0, entries_per_param: int = 4) -> List[CheckResult]:
    return check_ops(trials, seed) + [check_model(seed=seed, entries_per_param=entries_per_param)]
