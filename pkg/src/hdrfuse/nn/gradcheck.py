"""Central finite-difference verification of analytic gradients.

A fragment (single layer or Sequential) is scalarized through a fixed
random projection of its output; the analytic input and parameter
gradients from one backward pass are then compared against central
differences coordinate by coordinate.  The reported relative error for a
tensor is ||analytic - numeric||_2 / max(||analytic||_2, ||numeric||_2),
which keeps tiny individual coordinates from dominating.

Finite differences only estimate the true derivative away from kinks
(ReLU zero crossings, max-pool ties), so checks on layers with kinks
should use inputs bounded away from them; see the helpers below.
"""

from __future__ import annotations

import numpy as np

#: default central-difference step for 64-bit checks
DEFAULT_STEP = 1e-3


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    a = np.asarray(analytic, dtype=np.float64).ravel()
    n = np.asarray(numeric, dtype=np.float64).ravel()
    denom = max(np.linalg.norm(a), np.linalg.norm(n), 1e-12)
    return float(np.linalg.norm(a - n) / denom)


def gradient_check(fragment, x, h: float = DEFAULT_STEP, rng=None,
                   max_coords: int = 0) -> float:
    """Worst relative error between analytic and numeric gradients.

    Checks the gradient with respect to the input and every parameter of
    ``fragment``.  ``max_coords`` > 0 subsamples that many coordinates per
    tensor (deterministically from ``rng``) to bound runtime.  Expects
    float64 data for meaningful tolerances.
    """
    rng = rng or np.random.default_rng(0)
    x = np.asarray(x, dtype=np.float64)

    y = fragment.forward(x, training=True)
    proj = rng.standard_normal(y.shape)

    def scalar_at():
        return float((fragment.forward(x, training=True) * proj).sum())

    for p in fragment.parameters():
        p.zero_grad()
    grad_x = fragment.backward(proj.copy())

    worst = 0.0
    targets = [(x, grad_x)] + [(p.data, p.ensure_grad()) for p in fragment.parameters()]
    for data, analytic in targets:
        flat = data.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords and flat.size > max_coords:
            coords = rng.choice(flat.size, size=max_coords, replace=False)
            coords.sort()
        numeric = np.zeros(coords.size)
        for out_i, i in enumerate(coords):
            orig = flat[i]
            flat[i] = orig + h
            f_plus = scalar_at()
            flat[i] = orig - h
            f_minus = scalar_at()
            flat[i] = orig
            numeric[out_i] = (f_plus - f_minus) / (2.0 * h)
        worst = max(worst, relative_error(analytic.reshape(-1)[coords], numeric))
    return worst


def scalar_gradient_check(fn, arrays, h: float = DEFAULT_STEP,
                          max_coords: int = 0, rng=None) -> float:
    """Check d fn / d array for a scalar-valued fn against central differences.

    ``fn()`` must return (scalar, [grad per array]) computed from the
    current contents of ``arrays`` (mutated in place during the sweep).
    """
    rng = rng or np.random.default_rng(0)
    _, grads = fn()
    worst = 0.0
    for arr, analytic in zip(arrays, grads):
        flat = arr.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords and flat.size > max_coords:
            coords = rng.choice(flat.size, size=max_coords, replace=False)
            coords.sort()
        numeric = np.zeros(coords.size)
        for out_i, i in enumerate(coords):
            orig = flat[i]
            flat[i] = orig + h
            f_plus = fn()[0]
            flat[i] = orig - h
            f_minus = fn()[0]
            flat[i] = orig
            numeric[out_i] = (f_plus - f_minus) / (2.0 * h)
        worst = max(worst, relative_error(analytic.reshape(-1)[coords], numeric))
    return worst


def relu_safe_input(rng, shape, margin=0.05):
    """Random values whose magnitudes stay clear of the ReLU kink."""
    signs = np.where(rng.random(shape) < 0.5, -1.0, 1.0)
    return signs * rng.uniform(margin, 1.0, size=shape)


def pool_safe_input(rng, shape, gap=0.2):
    """Random values with distinct, well-separated entries per 2x2 window."""
    n, c, h, w = shape
    base = np.arange(4, dtype=np.float64) * (gap + 0.1)
    x = np.empty(shape)
    for ni in range(n):
        for ci in range(c):
            for i in range(0, h, 2):
                for j in range(0, w, 2):
                    vals = rng.permutation(base) + rng.uniform(0, gap / 2, size=4)
                    x[ni, ci, i:i + 2, j:j + 2] = vals.reshape(2, 2)
    return x
