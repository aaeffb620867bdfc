"""Architecture hyperparameters and their line-based ``key=value`` file format."""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace
from pathlib import Path

STRUCTURES = ("dual_branch", "cascaded")


@dataclass(frozen=True)
class ModelConfig:
    angular_u: int = 5
    angular_v: int = 5
    channels: int = 32
    scale: int = 2
    n_blocks: int = 4
    ratio_view: int = 2
    ratio_channel: int = 2
    use_aspp: bool = True
    use_va: bool = True
    use_ca: bool = True
    structure: str = "dual_branch"

    def __post_init__(self):
        if self.angular_u < 1 or self.angular_v < 1:
            raise ValueError("angular extents must be >= 1")
        if self.channels < 1:
            raise ValueError("channels must be >= 1")
        if self.n_blocks < 1:
            raise ValueError("n_blocks must be >= 1")
        if self.ratio_view < 1 or self.ratio_channel < 1:
            raise ValueError("reduction ratios must be >= 1")
        if self.scale not in (2, 4):
            raise ValueError(f"scale must be 2 or 4, got {self.scale}")
        if self.structure not in STRUCTURES:
            raise ValueError(f"structure must be one of {STRUCTURES}, got {self.structure!r}")

    @property
    def n_views(self) -> int:
        return self.angular_u * self.angular_v

    @property
    def view_hidden(self) -> int:
        return max(1, self.n_views // self.ratio_view)

    @property
    def channel_hidden(self) -> int:
        return max(1, self.channels // self.ratio_channel)

    def with_(self, **changes) -> "ModelConfig":
        return replace(self, **changes)

    def ablation(self, name: str) -> "ModelConfig":
        """Variants named after the ablation study: w/o_aspp, w/o_va, w/o_ca, w/o_da, cascaded."""
        table = {
            "full": {},
            "w/o_aspp": {"use_aspp": False},
            "w/o_va": {"use_va": False},
            "w/o_ca": {"use_ca": False},
            "w/o_da": {"use_va": False, "use_ca": False},
            "cascaded": {"structure": "cascaded"},
        }
        if name not in table:
            raise ValueError(f"unknown ablation {name!r}; choose from {sorted(table)}")
        return replace(self, **table[name])


_KEYS = {
    "scale": ("scale", int),
    "angular_u": ("angular_u", int),
    "angular_v": ("angular_v", int),
    "channels": ("channels", int),
    "n_blocks": ("n_blocks", int),
    "ratio_view": ("ratio_view", int),
    "ratio_channel": ("ratio_channel", int),
    "use_aspp": ("use_aspp", bool),
    "use_va": ("use_va", bool),
    "use_ca": ("use_ca", bool),
    "structure": ("structure", str),
}


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_config(text: str) -> ModelConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KEYS:
            raise ValueError(f"line {lineno}: unknown config key {key!r}")
        field, kind = _KEYS[key]
        try:
            values[field] = _parse_bool(value) if kind is bool else kind(value)
        except ValueError as exc:
            raise ValueError(f"line {lineno}: bad value for {key}: {exc}") from exc
    return ModelConfig(**values)


def format_config(cfg: ModelConfig) -> str:
    fields = asdict(cfg)
    lines = []
    for key, (field, kind) in _KEYS.items():
        value = fields[field]
        lines.append(f"{key}={str(value).lower() if kind is bool else value}")
    return "\n".join(lines) + "\n"


PRESETS = {
    "canonical_5x5_x2": ModelConfig(5, 5, 32, 2),
    "canonical_5x5_x4": ModelConfig(5, 5, 32, 4),
    "canonical_9x9_x2": ModelConfig(9, 9, 32, 2),
    "canonical_9x9_x4": ModelConfig(9, 9, 32, 4),
    # finite-difference scale
    "tiny": ModelConfig(3, 3, 4, 2, n_blocks=1),
    # single-core training scale
    "desk": ModelConfig(5, 5, 16, 2, n_blocks=2),
}


def load_config(spec: str) -> ModelConfig:
    """Resolve a preset name or read a ``key=value`` file."""
    if spec in PRESETS:
        return PRESETS[spec]
    path = Path(spec)
    if not path.is_file():
        raise FileNotFoundError(f"config {spec!r} is neither a preset ({', '.join(PRESETS)}) nor a file")
    return parse_config(path.read_text())


def save_config(cfg: ModelConfig, path) -> None:
    Path(path).write_text(format_config(cfg))
