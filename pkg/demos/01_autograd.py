"""
Reverse-mode autograd on rank-4 tensors
=======================================

The network is built from a small set of differentiable ops. This script
runs one forward and backward pass by hand, then checks the gradient of a
convolution against central finite differences in 64-bit mode.
"""

import numpy as np

from ddan.autograd import Tensor, ops, precision
from ddan.gradcheck import check_gradients, check_ops

rng = np.random.default_rng(0)

# Tensors are (batch, channels, height, width). Leaves that need gradients
# say so; every op records how to push a gradient back to its parents.
with precision(np.float64):
    x = Tensor(rng.standard_normal((1, 2, 6, 6)), requires_grad=True)
    w = Tensor(0.3 * rng.standard_normal((3, 2, 3, 3)), requires_grad=True)
    y = ops.relu(ops.conv2d(x, w, pad=1))
    loss = ops.mean_all(y)
    loss.backward()
    print("loss", float(loss.data.reshape(())))
    print("dL/dw shape", w.grad.shape, "dL/dx shape", x.grad.shape)

# The same gradient, estimated numerically. The builder receives fresh
# leaves for every perturbation, so any function of the inputs works.
with precision(np.float64):
    err, n = check_gradients(
        lambda t: ops.mean_all(ops.relu(ops.conv2d(t["x"], t["w"], pad=1))),
        {"x": x.data.copy(), "w": w.data.copy()},
    )
print(f"conv2d + relu: max relative error {err:.2e} over {n} entries")

# The packaged suite does this for every op the network uses.
for result in check_ops(trials=3):
    print(f"{result.name:24s} {result.max_rel_err:.1e}")
