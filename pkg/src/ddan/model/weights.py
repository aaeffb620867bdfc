"""Parameter layout of the network, derived from the configuration alone."""

from __future__ import annotations

from collections import OrderedDict
from typing import Dict, Iterator, List, Mapping, Tuple

import numpy as np

from ..autograd import Param, Tensor, default_dtype, kaiming_init
from ..autograd.checkpoint import CheckpointError, load_arrays, save_arrays
from .config import ModelConfig

Shape = Tuple[int, int, int, int]


def _conv(specs: list, name: str, cout: int, cin: int, k: int) -> None:
    specs.append((f"{name}.w", (cout, cin, k, k)))
    specs.append((f"{name}.b", (1, cout, 1, 1)))


def _resblock(specs: list, name: str, ch: int) -> None:
    _conv(specs, f"{name}.conv1", ch, ch, 3)
    _conv(specs, f"{name}.conv2", ch, ch, 3)


def _rvab(specs: list, name: str, cfg: ModelConfig) -> None:
    # the view branch runs on (C, N, H, W): its convolutions see N channels
    N = cfg.n_views
    _resblock(specs, f"{name}.rb1", N)
    _resblock(specs, f"{name}.rb2", N)
    if cfg.use_va:
        _conv(specs, f"{name}.gate1", cfg.view_hidden, N, 1)
        _conv(specs, f"{name}.gate2", N, cfg.view_hidden, 1)


def _rcab(specs: list, name: str, cfg: ModelConfig) -> None:
    C = cfg.channels
    _resblock(specs, f"{name}.rb1", C)
    _resblock(specs, f"{name}.rb2", C)
    if cfg.use_ca:
        _conv(specs, f"{name}.gate1", cfg.channel_hidden, C, 1)
        _conv(specs, f"{name}.gate2", C, cfg.channel_hidden, 1)


def param_shapes(cfg: ModelConfig) -> List[Tuple[str, Shape]]:
    """Ordered (name, dims) list for every parameter of ``cfg``."""
    C, a = cfg.channels, cfg.scale
    specs: list = []
    _conv(specs, "shallow.conv0", C, 1, 3)
    if cfg.use_aspp:
        for d in (1, 2, 4):
            _conv(specs, f"shallow.aspp.d{d}", C, C, 3)
        _conv(specs, "shallow.aspp.merge", C, 3 * C, 1)
    else:
        _resblock(specs, "shallow.aspp_rb", C)
    _resblock(specs, "shallow.rb1", C)
    _resblock(specs, "shallow.rb2", C)
    for k in range(1, cfg.n_blocks + 1):
        if cfg.structure == "dual_branch":
            _rvab(specs, f"va.{k}", cfg)
            _rcab(specs, f"ca.{k}", cfg)
        else:
            _rvab(specs, f"cascade.{k}.va", cfg)
            _rcab(specs, f"cascade.{k}.ca", cfg)
    _conv(specs, "fusion.in", 2 * C, 2 * C, 1)
    _resblock(specs, "fusion.rb1", 2 * C)
    _resblock(specs, "fusion.rb2", 2 * C)
    _conv(specs, "fusion.out", C, 2 * C, 1)
    _conv(specs, "upscale.expand", a * a * C, C, 1)
    _conv(specs, "upscale.out", 1, C, 3)
    return specs


def count_params(cfg: ModelConfig) -> int:
    return sum(int(np.prod(shape)) for _, shape in param_shapes(cfg))


class ModelWeights:
    """Ordered, uniquely named parameter set for one configuration."""

    def __init__(self, cfg: ModelConfig, params: Mapping[str, Param]):
        self.config = cfg
        self.params: "OrderedDict[str, Param]" = OrderedDict(params)
        expected = param_shapes(cfg)
        if [n for n, _ in expected] != list(self.params):
            got, want = set(self.params), {n for n, _ in expected}
            raise ValueError(
                f"weights do not match config: missing {sorted(want - got)[:3]}, unexpected {sorted(got - want)[:3]}"
            )
        for name, shape in expected:
            if self.params[name].shape != shape:
                raise ValueError(f"param {name} has dims {self.params[name].shape}, config needs {shape}")

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name].value

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def __iter__(self) -> Iterator[Param]:
        return iter(self.params.values())

    def __len__(self) -> int:
        return len(self.params)

    @property
    def dtype(self):
        return next(iter(self.params.values())).value.dtype

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def n_scalars(self) -> int:
        return sum(p.value.data.size for p in self.params.values())

    def arrays(self) -> Dict[str, np.ndarray]:
        return {name: p.value.data for name, p in self.params.items()}

    def astype(self, dtype) -> "ModelWeights":
        return ModelWeights(
            self.config,
            {n: Param(n, Tensor(p.value.data.astype(dtype)), p.trainable) for n, p in self.params.items()},
        )

    def copy(self) -> "ModelWeights":
        return self.astype(self.dtype)

    @classmethod
    def from_arrays(cls, cfg: ModelConfig, arrays: Mapping[str, np.ndarray], dtype=None) -> "ModelWeights":
        dtype = dtype or default_dtype()
        params = OrderedDict()
        for name, shape in param_shapes(cfg):
            if name not in arrays:
                raise CheckpointError(f"config/checkpoint mismatch: missing parameter {name}")
            arr = np.asarray(arrays[name])
            if arr.shape != shape:
                raise CheckpointError(f"config/checkpoint mismatch: {name} has dims {arr.shape}, config needs {shape}")
            params[name] = Param(name, Tensor(arr.astype(dtype)))
        return cls(cfg, params)

    def save(self, path, extra: Mapping[str, np.ndarray] = None) -> None:
        arrays = dict(self.arrays())
        if extra:
            arrays.update(extra)
        save_arrays(path, arrays)

    @classmethod
    def load(cls, cfg: ModelConfig, path, dtype=None) -> "ModelWeights":
        return cls.from_arrays(cfg, load_arrays(path), dtype)


RESIDUAL_SCALE = 0.1
HEAD_SCALE = 0.01


def _feeds_relu(name: str) -> bool:
    return name.endswith(".conv1.w") or name.endswith(".gate1.w")


def init_weights(
    cfg: ModelConfig,
    seed: int = 0,
    dtype=None,
    residual_scale: float = RESIDUAL_SCALE,
    head_scale: float = HEAD_SCALE,
) -> ModelWeights:
    """Kaiming-normal weights (fan_in = in_ch * k * k) and zero biases.

    Convs followed by a ReLU use gain 2, all others gain 1. The last conv of
    every residual branch is scaled by ``residual_scale`` and the output conv
    by ``head_scale``, so the dense sums start near the identity and the
    initial prediction near the bicubic upsample.
    """
    dtype = dtype or default_dtype()
    params = OrderedDict()
    for index, (name, shape) in enumerate(param_shapes(cfg)):
        if name.endswith(".b"):
            value = Tensor(np.zeros(shape, dtype=dtype))
        else:
            sub_seed = int(np.random.SeedSequence([seed, index]).generate_state(1)[0])
            gain = 2.0 if _feeds_relu(name) else 1.0
            value = kaiming_init(shape, shape[1] * shape[2] * shape[3], sub_seed, dtype, gain)
            if name.endswith(".conv2.w"):
                value.data *= value.dtype.type(residual_scale)
            elif name == "upscale.out.w":
                value.data *= value.dtype.type(head_scale)
        params[name] = Param(name, value)
    return ModelWeights(cfg, params)


def zero_weights(cfg: ModelConfig, dtype=None) -> ModelWeights:
    dtype = dtype or default_dtype()
    return ModelWeights(cfg, {n: Param(n, Tensor(np.zeros(s, dtype=dtype))) for n, s in param_shapes(cfg)})
