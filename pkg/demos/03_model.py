"""
The dual-attention network
==========================

Shallow ASPP features feed two densely connected branches: one attends
over views, the other over channels. Their fused output is upscaled with a
pixel shuffle and added to the bicubic upsample of every view.
"""

import numpy as np

from ddan.autograd import precision
from ddan.data.resample import upsample
from ddan.model import PRESETS, count_params, init_weights, probe_attention, super_resolve, zero_weights

# Parameter counts of the canonical configurations.
for name in ("canonical_5x5_x2", "canonical_5x5_x4", "canonical_9x9_x2", "canonical_9x9_x4"):
    print(f"{name:18s} {count_params(PRESETS[name]):>9,d}")

# More attention blocks per branch means more parameters.
base = PRESETS["canonical_5x5_x2"]
print("blocks 2..5:", [count_params(base.with_(n_blocks=n)) for n in (2, 3, 4, 5)])

# Ablation switches are config knobs.
for variant in ("full", "w/o_aspp", "w/o_va", "w/o_ca", "w/o_da", "cascaded"):
    print(f"desk {variant:9s} {count_params(PRESETS['desk'].ablation(variant)):>7,d}")

# With every weight at zero the network is exactly the bicubic upsample.
cfg = PRESETS["desk"]
lr = np.random.default_rng(0).random((5, 5, 16, 16))
with precision(np.float64):
    sr = super_resolve(lr, cfg, zero_weights(cfg, np.float64))
print("zero network equals bicubic:", np.array_equal(sr, upsample(lr, 2)))

# A freshly initialised model starts close to bicubic, and its view-attention
# weights are strictly between 0 and 1.
wts = init_weights(cfg, seed=0)
sr = super_resolve(lr.astype(np.float32), cfg, wts)
print("max |init - bicubic|:", float(np.abs(sr - upsample(lr, 2)).max()))
att = probe_attention(lr.astype(np.float32), cfg, wts)
print("attention per block", att.shape, "range", float(att.min()), float(att.max()))
