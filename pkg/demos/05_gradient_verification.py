"""Checking every gradient against central finite differences.
==============================================================

The engine has no autodiff: each layer's backward pass is hand-derived, so
each is verified numerically.  The loss gradient with respect to the fused
image is checked the same way.  All checks run in float64.
"""

import numpy as np

from hdrfuse import nn
from hdrfuse.image import ExposurePair
from hdrfuse.loss import LossConfig, weighted_ssim_loss
from hdrfuse.nn.gradcheck import relative_error

rng = np.random.default_rng(0)

# Single layers at the default step h = 1e-3.  ReLU and max-pool inputs
# are sampled away from their kinks, where the derivative exists.
layers = [
    ("conv 3x3", nn.Conv2d(2, 3, rng, dtype=np.float64),
     rng.standard_normal((1, 2, 12, 12))),
    ("batch norm", nn.BatchNorm2d(3, dtype=np.float64),
     rng.standard_normal((2, 3, 8, 8))),
    ("relu", nn.ReLU(), nn.relu_safe_input(rng, (1, 2, 12, 12))),
    ("max pool", nn.MaxPool2d(), nn.pool_safe_input(rng, (1, 2, 12, 12))),
    ("upsample", nn.Upsample2d(), rng.standard_normal((1, 2, 6, 6))),
    ("softmax", nn.ChannelSoftmax(), rng.standard_normal((1, 2, 8, 8))),
]
print("layer gradients (relative error vs central differences):")
for name, layer, x in layers:
    err = nn.gradient_check(layer, x)
    print(f"  {name:12s} {err:.2e}")
    assert err < 1e-5

# A deeper fragment: smaller h, since at h = 1e-3 a pre-activation can sit
# within the finite-difference step of a relu kink.
frag = nn.Sequential([nn.Conv2d(2, 4, rng, dtype=np.float64), nn.ReLU(),
                      nn.Conv2d(4, 2, rng, dtype=np.float64),
                      nn.ChannelSoftmax()])
err = nn.gradient_check(frag, rng.standard_normal((1, 2, 8, 8)), h=1e-4)
print(f"  conv-relu-conv-softmax fragment: {err:.2e}")
assert err < 1e-5

# Loss gradient with respect to every fused pixel.
under = rng.random((16, 16, 3))
over = np.clip(under + rng.random((16, 16, 3)) * 0.3, 0, 1)
pair = ExposurePair(under=under, over=over)
fused = 0.5 * under + 0.5 * over
lc = LossConfig()
_, grad = weighted_ssim_loss(pair, fused, lc)
h = 1e-4
numeric = np.zeros_like(fused)
flat, nflat = fused.reshape(-1), numeric.reshape(-1)
for i in range(flat.size):
    orig = flat[i]
    flat[i] = orig + h
    lp = weighted_ssim_loss(pair, fused, lc, want_grad=False)
    flat[i] = orig - h
    lm = weighted_ssim_loss(pair, fused, lc, want_grad=False)
    flat[i] = orig
    nflat[i] = (lp - lm) / (2 * h)
err = relative_error(grad, numeric)
print(f"  weighted-SSIM loss gradient:     {err:.2e}")
assert err < 1e-5
print("all gradients verified")
