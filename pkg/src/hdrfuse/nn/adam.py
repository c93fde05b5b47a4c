"""Adam optimizer with per-epoch exponential learning-rate decay."""

from __future__ import annotations

import numpy as np


class Adam:
    """Bias-corrected Adam over a fixed parameter list.

    The effective learning rate is lr0 * decay^epoch; call ``set_epoch``
    at each epoch boundary.
    """

    def __init__(self, params, lr0=1e-4, decay=0.99,
                 beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr0 = lr0
        self.decay = decay
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.lr = lr0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def set_epoch(self, epoch: int):
        self.lr = self.lr0 * self.decay ** epoch
        return self.lr

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self):
        self.step_count += 1
        t = self.step_count
        b1, b2 = self.beta1, self.beta2
        for i, p in enumerate(self.params):
            g = p.grad
            if g is None:
                continue
            if g.shape != p.data.shape:
                raise ValueError(f"gradient shape mismatch for {p.name}")
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * (g * g)
            m_hat = self.m[i] / (1.0 - b1 ** t)
            v_hat = self.v[i] / (1.0 - b2 ** t)
            p.data = (p.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(
                p.data.dtype)
