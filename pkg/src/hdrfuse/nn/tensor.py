"""Parameter tensor: a value array with a lazily allocated gradient buffer."""

from __future__ import annotations

import numpy as np


class Tensor:
    """Named parameter with matching-gradient storage."""

    __slots__ = ("name", "data", "grad")

    def __init__(self, data, name: str = ""):
        self.name = name
        self.data = np.asarray(data)
        self.grad = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def ensure_grad(self) -> np.ndarray:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        return self.grad

    def zero_grad(self):
        if self.grad is not None:
            self.grad.fill(0.0)

    def accumulate(self, g: np.ndarray):
        if g.shape != self.data.shape:
            raise ValueError(
                f"gradient shape {g.shape} does not match {self.name or 'tensor'} "
                f"shape {self.data.shape}")
        self.ensure_grad()
        self.grad += g

    def astype(self, dtype):
        self.data = self.data.astype(dtype)
        if self.grad is not None:
            self.grad = self.grad.astype(dtype)
        return self

    def __repr__(self):
        return f"Tensor({self.name or '?'}, shape={self.data.shape}, dtype={self.data.dtype})"
