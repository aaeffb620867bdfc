"""
Light fields, degradation and patches
=====================================

A light field is a (U, V) grid of sub-aperture images. Training pairs come
from bicubic downsampling of HR patches, with flips and rotations applied
jointly to the angular and spatial axes.
"""

import tempfile
from pathlib import Path

import numpy as np

from ddan.data.augment import OPS, augment
from ddan.data.io import load_lf, save_lf
from ddan.data.lightfield import y_channel
from ddan.data.noise import add_gaussian_noise
from ddan.data.patches import extract_patches
from ddan.data.resample import downsample, upsample
from ddan.data.synthetic import synthetic_light_field
from ddan.metrics import psnr

# A procedural 5x5 scene: textured layers at different depths, so views
# differ by small disparities.
lf = synthetic_light_field(seed=1)
print("light field", lf.data.shape, lf.color.name)

# Work on luma. Bicubic down and back up is the baseline the network beats.
y = y_channel(lf).data[:, :, 0]
lr = downsample(y, 2)
bic = np.clip(upsample(lr, 2), 0, 1)
print(f"bicubic 2x baseline: {psnr(bic, y):.2f} dB")

# Patches: 64-pixel HR crops on a 32-pixel stride, each with its LR partner.
patches = extract_patches(lf, a=2, p=64, s=32)
print("patches", len(patches))

# Every augmentation has an exact inverse, and the flips are involutions.
for op in OPS:
    back = augment(augment(lf, op), op, inverse=True)
    print(op, "inverse exact:", back == lf)

# Containers are a small binary header plus raw samples; round trips are bit-exact.
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "scene.lfsr"
    save_lf(lf.to_uint8(), path)
    print("uint8 round trip exact:", load_lf(path) == lf.to_uint8())

# Noise goes into one view only; the others are untouched.
noisy = add_gaussian_noise(lf, (2, 2), 0.01, seed=0)
changed = [(u, v) for u in range(5) for v in range(5) if not np.array_equal(noisy.data[u, v], lf.to_real().data[u, v])]
print("views changed by noise:", changed)
