"""Unsupervised weighted-SSIM loss for exposure-pair fusion.

Per color channel and per loss window, the SSIM of the fused image against
the under-exposed input is blended with its SSIM against the over-exposed
input using the window's gamma coefficient:

    loss = 1 - mean_{c,w}[ gamma_w * ssim(under_c, fused_c; w)
                           + (1 - gamma_w) * ssim(over_c, fused_c; w) ]

Gamma comes from perceptual attributes of the grayscale inputs and is a
constant during backpropagation (it never depends on the fused image), so
the returned gradient is exact for every fused pixel.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .attributes import GAMMA_FLOOR, AttributeKind, gamma_for_pair
from .image import ExposurePair, window_anchors, window_view
from .metrics import SsimWindowSpec


def loss_window_spec() -> SsimWindowSpec:
    """Default loss geometry: 7x7 windows tiled without overlap."""
    return SsimWindowSpec(window_size=7, stride=7)


@dataclass(frozen=True)
class LossConfig:
    gamma_kind: AttributeKind = AttributeKind.VAR_GRAD
    window: SsimWindowSpec = field(default_factory=loss_window_spec)
    sigma_e: float = 0.2
    gamma_floor: float = GAMMA_FLOOR


def _ssim_grid(x: np.ndarray, y: np.ndarray, spec: SsimWindowSpec,
               rows: np.ndarray, cols: np.ndarray, want_grad: bool):
    """Per-window SSIM of constant x against variable y, plus dSSIM/dy.

    Returns (scores (R, C), block gradients (R, C, k, k) or None).
    Population statistics, uniform window weighting.
    """
    k = spec.window_size
    n = float(k * k)
    xw = window_view(x, k, rows, cols)
    yw = window_view(y, k, rows, cols)
    mx = xw.mean(axis=(-2, -1))
    my = yw.mean(axis=(-2, -1))
    xc = xw - mx[..., None, None]
    yc = yw - my[..., None, None]
    vx = (xc * xc).mean(axis=(-2, -1))
    vy = (yc * yc).mean(axis=(-2, -1))
    cxy = (xc * yc).mean(axis=(-2, -1))
    c1, c2 = spec.c1, spec.c2
    a1 = 2.0 * mx * my + c1
    a2 = 2.0 * cxy + c2
    b1 = mx * mx + my * my + c1
    b2 = vx + vy + c2
    s = (a1 * a2) / (b1 * b2)
    if not want_grad:
        return s, None
    inv_b1b2 = 1.0 / (b1 * b2)
    lead = (mx * a2)[..., None, None] + a1[..., None, None] * xc
    trail = (s * (my / b1))[..., None, None] + (s / b2)[..., None, None] * yc
    grad = (2.0 / n) * (lead * inv_b1b2[..., None, None] - trail)
    return s, grad


def weighted_ssim_loss(pair: ExposurePair, fused: np.ndarray, cfg: LossConfig,
                       gamma: np.ndarray | None = None, want_grad: bool = True):
    """Loss value in [0, 2] and its exact gradient w.r.t. every fused pixel.

    ``gamma`` overrides the attribute-derived map (same window grid); it is
    treated as a constant either way.  Returns (loss, grad) or just the
    loss when want_grad is false.
    """
    under = np.asarray(pair.under, dtype=np.float64)
    over = np.asarray(pair.over, dtype=np.float64)
    f = np.asarray(fused, dtype=np.float64)
    if under.ndim != 3 or under.shape[2] != 3:
        raise ValueError("loss expects 3-channel color exposures")
    if f.shape != under.shape:
        raise ValueError(f"fused shape {f.shape} does not match pair {under.shape}")

    spec = cfg.window
    h, w = f.shape[:2]
    rows = window_anchors(h, spec.window_size, spec.stride)
    cols = window_anchors(w, spec.window_size, spec.stride)
    if gamma is None:
        gamma = gamma_for_pair(pair.under_gray, pair.over_gray, cfg.gamma_kind,
                               spec, cfg.sigma_e, cfg.gamma_floor)
    gamma = np.asarray(gamma, dtype=np.float64)
    if gamma.shape != (len(rows), len(cols)):
        raise ValueError(f"gamma grid {gamma.shape} does not match window grid "
                         f"{(len(rows), len(cols))}")

    k = spec.window_size
    n_windows = len(rows) * len(cols)
    norm = 3.0 * n_windows
    total = 0.0
    grad = np.zeros_like(f) if want_grad else None
    for c in range(3):
        su, gu = _ssim_grid(under[:, :, c], f[:, :, c], spec, rows, cols, want_grad)
        so, go = _ssim_grid(over[:, :, c], f[:, :, c], spec, rows, cols, want_grad)
        total += float((gamma * su + (1.0 - gamma) * so).sum())
        if want_grad:
            block = gamma[..., None, None] * gu + (1.0 - gamma)[..., None, None] * go
            gplane = grad[:, :, c]
            for i, r in enumerate(rows):
                for j, cc in enumerate(cols):
                    gplane[r:r + k, cc:cc + k] -= block[i, j] / norm
    loss = 1.0 - total / norm
    if want_grad:
        return loss, grad
    return loss
