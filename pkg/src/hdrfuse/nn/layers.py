"""Forward/backward layers for the weight-map network.

Exactly the operations the encoder-decoder needs: 3x3 same-size
convolution, batch normalization, ReLU, 2x2 max pooling, nearest-neighbor
x2 upsampling and per-pixel channel softmax.  Activations are plain NCHW
numpy arrays; parameters are Tensors.  Each layer caches what its backward
pass needs when called with training=True.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


class Layer:
    """Base: no parameters, no state."""

    def parameters(self):
        return []

    def forward(self, x, training=False):
        raise NotImplementedError

    def backward(self, grad_out):
        raise NotImplementedError


class Conv2d(Layer):
    """3x3 cross-correlation, stride 1, zero padding 1 (spatial-preserving)."""

    KERNEL = 3

    def __init__(self, in_channels, out_channels, rng, dtype=np.float32, name="conv"):
        self.in_channels = in_channels
        self.out_channels = out_channels
        k = self.KERNEL
        # Kaiming-uniform, fan_in = in_channels * k * k
        bound = np.sqrt(6.0 / (in_channels * k * k))
        w = rng.uniform(-bound, bound, size=(out_channels, in_channels, k, k))
        self.weight = Tensor(w.astype(dtype), name=f"{name}.weight")
        self.bias = Tensor(np.zeros(out_channels, dtype=dtype), name=f"{name}.bias")
        self._cache = None

    def parameters(self):
        return [self.weight, self.bias]

    def forward(self, x, training=False):
        n, c, h, w = x.shape
        if c != self.in_channels:
            raise ValueError(f"expected {self.in_channels} input channels, got {c}")
        k = self.KERNEL
        xp = np.zeros((n, c, h + 2, w + 2), dtype=x.dtype)
        xp[:, :, 1:h + 1, 1:w + 1] = x
        y = np.zeros((n, self.out_channels, h, w), dtype=x.dtype)
        wk = self.weight.data
        yf = y.reshape(n, self.out_channels, h * w)
        for di in range(k):
            for dj in range(k):
                tap = xp[:, :, di:di + h, dj:dj + w].reshape(n, c, h * w)
                # (out,in) @ (n,in,hw) -> (n,out,hw)
                yf += np.matmul(wk[:, :, di, dj], tap)
        y += self.bias.data[None, :, None, None]
        if training:
            self._cache = xp
        return y

    def backward(self, grad_out):
        xp = self._cache
        if xp is None:
            raise RuntimeError("backward before forward(training=True)")
        n, c = xp.shape[0], self.in_channels
        h, w = xp.shape[2] - 2, xp.shape[3] - 2
        k = self.KERNEL
        g = grad_out.reshape(n, self.out_channels, h * w)
        gw = np.zeros_like(self.weight.data)
        gxp = np.zeros_like(xp)
        wk = self.weight.data
        for di in range(k):
            for dj in range(k):
                tap = xp[:, :, di:di + h, dj:dj + w].reshape(n, c, h * w)
                # sum_n (n,out,hw) x (n,in,hw)^T -> (out,in)
                gw[:, :, di, dj] = np.einsum("noh,nch->oc", g, tap, optimize=True)
                # (in,out) @ (n,out,hw) -> (n,in,hw)
                gxp[:, :, di:di + h, dj:dj + w] += np.matmul(
                    wk[:, :, di, dj].T, g).reshape(n, c, h, w)
        self.weight.accumulate(gw)
        self.bias.accumulate(grad_out.sum(axis=(0, 2, 3)))
        return gxp[:, :, 1:h + 1, 1:w + 1]


class BatchNorm2d(Layer):
    """Per-channel normalization with learned affine and running statistics.

    Training normalizes by the batch's population statistics and folds them
    into the running estimates with retention 0.9; inference normalizes by
    the running estimates and refuses to run before any update has landed.
    """

    def __init__(self, channels, dtype=np.float32, eps=1e-5, momentum=0.9, name="bn"):
        self.channels = channels
        self.eps = eps
        self.momentum = momentum
        self.scale = Tensor(np.ones(channels, dtype=dtype), name=f"{name}.scale")
        self.shift = Tensor(np.zeros(channels, dtype=dtype), name=f"{name}.shift")
        self.running_mean = Tensor(np.zeros(channels, dtype=dtype),
                                   name=f"{name}.running_mean")
        self.running_var = Tensor(np.ones(channels, dtype=dtype),
                                  name=f"{name}.running_var")
        self.batches_tracked = 0
        self._cache = None

    def parameters(self):
        return [self.scale, self.shift]

    def state_tensors(self):
        return [self.running_mean, self.running_var]

    def forward(self, x, training=False, update_stats=None):
        if x.shape[1] != self.channels:
            raise ValueError(f"expected {self.channels} channels, got {x.shape[1]}")
        if training:
            mean = x.mean(axis=(0, 2, 3))
            var = x.var(axis=(0, 2, 3))
            if update_stats is None or update_stats:
                m = self.momentum
                self.running_mean.data = (m * self.running_mean.data
                                          + (1.0 - m) * mean).astype(x.dtype)
                self.running_var.data = (m * self.running_var.data
                                         + (1.0 - m) * var).astype(x.dtype)
                self.batches_tracked += 1
        else:
            if self.batches_tracked == 0:
                raise RuntimeError(
                    f"{self.scale.name[:-6]}: inference before any training update "
                    "(running statistics uninitialized)")
            mean = self.running_mean.data
            var = self.running_var.data
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean[None, :, None, None]) * inv_std[None, :, None, None]
        y = self.scale.data[None, :, None, None] * xhat \
            + self.shift.data[None, :, None, None]
        if training:
            self._cache = (xhat, inv_std)
        return y.astype(x.dtype)

    def backward(self, grad_out):
        if self._cache is None:
            raise RuntimeError("backward before forward(training=True)")
        xhat, inv_std = self._cache
        g = grad_out
        axes = (0, 2, 3)
        self.shift.accumulate(g.sum(axis=axes))
        self.scale.accumulate((g * xhat).sum(axis=axes))
        gh = g * self.scale.data[None, :, None, None]
        mean_gh = gh.mean(axis=axes)
        mean_gh_xhat = (gh * xhat).mean(axis=axes)
        gx = inv_std[None, :, None, None] * (
            gh - mean_gh[None, :, None, None]
            - xhat * mean_gh_xhat[None, :, None, None])
        return gx.astype(grad_out.dtype)


class ReLU(Layer):
    def __init__(self):
        self._mask = None

    def forward(self, x, training=False):
        if training:
            self._mask = x > 0
        return np.maximum(x, 0)

    def backward(self, grad_out):
        return grad_out * self._mask


class MaxPool2d(Layer):
    """2x2 stride-2 max; gradient goes to the first argmax in row-major order."""

    def __init__(self):
        self._cache = None

    def forward(self, x, training=False):
        n, c, h, w = x.shape
        if h % 2 or w % 2:
            raise ValueError(f"max pool needs even spatial dims, got {h}x{w}")
        windows = x.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5)
        flat = windows.reshape(n, c, h // 2, w // 2, 4)
        idx = flat.argmax(axis=-1)
        y = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]
        if training:
            self._cache = (idx, (n, c, h, w))
        return y

    def backward(self, grad_out):
        idx, (n, c, h, w) = self._cache
        gflat = np.zeros((n, c, h // 2, w // 2, 4), dtype=grad_out.dtype)
        np.put_along_axis(gflat, idx[..., None], grad_out[..., None], axis=-1)
        gx = gflat.reshape(n, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
        return gx.reshape(n, c, h, w)


class Upsample2d(Layer):
    """Nearest-neighbor x2; backward sums each 2x2 fan-out."""

    def forward(self, x, training=False):
        return x.repeat(2, axis=2).repeat(2, axis=3)

    def backward(self, grad_out):
        n, c, h, w = grad_out.shape
        return grad_out.reshape(n, c, h // 2, 2, w // 2, 2).sum(axis=(3, 5))


class ChannelSoftmax(Layer):
    """Per-pixel softmax across the channel axis, max-subtracted for stability.

    Internally evaluated in float64 (then cast back) so each output is a
    correctly rounded quotient and per-pixel sums stay within 1e-7 of 1
    even for float32 activations.
    """

    def __init__(self):
        self._out = None

    def forward(self, x, training=False):
        z = x.astype(np.float64)
        z -= z.max(axis=1, keepdims=True)
        e = np.exp(z)
        y = (e / e.sum(axis=1, keepdims=True)).astype(x.dtype)
        if training:
            self._out = y
        return y

    def backward(self, grad_out):
        y = self._out
        dot = (grad_out * y).sum(axis=1, keepdims=True)
        return y * (grad_out - dot)


class Sequential(Layer):
    def __init__(self, layers):
        self.layers = list(layers)

    def parameters(self):
        params = []
        for layer in self.layers:
            params.extend(layer.parameters())
        return params

    def forward(self, x, training=False):
        for layer in self.layers:
            x = layer.forward(x, training=training)
        return x

    def backward(self, grad_out):
        for layer in reversed(self.layers):
            grad_out = layer.backward(grad_out)
        return grad_out
