"""Network definition, parameter layout and configuration."""

from .config import PRESETS, ModelConfig, format_config, load_config, parse_config, save_config
from .network import (
    branch_forward,
    channel_attention,
    ddan_forward,
    fuse,
    probe_attention,
    rcab_forward,
    residual_block,
    rvab_forward,
    shallow_extract,
    super_resolve,
    upscale,
    view_attention,
)
from .weights import ModelWeights, count_params, init_weights, param_shapes, zero_weights
