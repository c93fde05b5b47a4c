"""Adaptive-weight multi-exposure fusion.

Two per-pixel weights are computed on the grayscale version of each
exposure: a well-exposedness weight (Gaussian preference for intensities
near an adaptive center) and an inverse histogram-density weight that
suppresses saturated pile-up regions.  Their product, normalized across
exposures, drives a per-pixel weighted sum of the color inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .image import ExposurePair, check_image, to_grayscale

WEIGHT_KINDS = ("wellexposedness", "histogram")


@dataclass(frozen=True)
class ClassicalParams:
    """Tuning knobs for the adaptive-weight fusion."""

    sigma_e: float = 0.2       # width of the well-exposedness Gaussian
    n_bins: int = 256          # intensity histogram resolution
    eps_g: float = 1e-3        # histogram density stabilizer
    eps_n: float = 1e-12       # cross-exposure normalization stabilizer


def wellexposedness_weight(img: np.ndarray, sigma_e: float = 0.2) -> np.ndarray:
    """Gaussian preference for intensities near an exposure-adaptive center.

    The center is 1 - mean(img), clamped to [0.25, 0.75]: a dark exposure
    favors its brighter pixels and vice versa, without the center leaving
    the informative mid-range.  Output is in (0, 1] with 1 at the center.
    """
    a = np.asarray(img, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("expected a single-channel image")
    center = float(np.clip(1.0 - a.mean(), 0.25, 0.75))
    return np.exp(-((a - center) ** 2) / (2.0 * sigma_e ** 2))


def histogram_gradient_weight(img: np.ndarray, n_bins: int = 256,
                              eps_g: float = 1e-3) -> np.ndarray:
    """Inverse histogram density at each pixel's intensity bin.

    The normalized histogram is the per-bin gradient of the cumulative
    intensity histogram, so pile-ups (saturated regions) get low weight and
    sparsely populated intensities get high weight.  The map is rescaled by
    its own maximum into (0, 1].
    """
    if n_bins < 2:
        raise ValueError("n_bins must be >= 2")
    a = np.asarray(img, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("expected a single-channel image")
    bins = np.minimum((a * n_bins).astype(np.intp), n_bins - 1)
    counts = np.bincount(bins.ravel(), minlength=n_bins)
    density = counts / a.size
    w = 1.0 / (density[bins] + eps_g)
    return w / w.max()


def combine_weights(w_lists: Sequence[Sequence[np.ndarray]],
                    eps_n: float = 1e-12) -> np.ndarray:
    """Multiply each exposure's weight maps, then normalize across exposures.

    ``w_lists[n]`` holds the weight maps of exposure n.  Returns an
    (n_exposures, H, W) array whose per-pixel sum is 1; the epsilon keeps
    the split defined (and uniform) where every product vanishes.
    """
    if len(w_lists) == 0:
        raise ValueError("need at least one exposure")
    products = []
    shape = None
    for maps in w_lists:
        prod = None
        for m in maps:
            m = np.asarray(m, dtype=np.float64)
            if shape is None:
                shape = m.shape
            elif m.shape != shape:
                raise ValueError(f"weight map shapes differ: {m.shape} vs {shape}")
            prod = m.copy() if prod is None else prod * m
        if prod is None:
            raise ValueError("each exposure needs at least one weight map")
        products.append(prod)
    stack = np.stack(products) + eps_n
    return stack / stack.sum(axis=0, keepdims=True)


def fuse(images: Sequence[np.ndarray], wmap: np.ndarray) -> np.ndarray:
    """Per-pixel weighted sum of the exposures, clamped to [0, 1].

    Weight maps are single-channel and apply identically to each color
    channel of the inputs.
    """
    if len(images) != wmap.shape[0]:
        raise ValueError(f"{len(images)} images but {wmap.shape[0]} weight maps")
    out = None
    for img, w in zip(images, wmap):
        a = check_image(img)
        if a.shape[:2] != w.shape:
            raise ValueError(f"image {a.shape} does not match weight map {w.shape}")
        ww = w if a.ndim == 2 else w[:, :, None]
        term = ww * a
        out = term if out is None else out + term
    return np.clip(out, 0.0, 1.0)


def fuse_exposures(images: Sequence[np.ndarray],
                   params: ClassicalParams = ClassicalParams(),
                   weights: Sequence[str] = WEIGHT_KINDS):
    """Adaptive-weight fusion of N >= 1 aligned exposures.

    ``weights`` selects which weight maps participate; passing a single
    kind gives the ablation variants.  Returns (fused, weight_map) with
    weight_map shaped (N, H, W).
    """
    if len(images) == 0:
        raise ValueError("need at least one exposure")
    unknown = set(weights) - set(WEIGHT_KINDS)
    if unknown:
        raise ValueError(f"unknown weight kinds: {sorted(unknown)}")
    per_exposure = []
    for img in images:
        gray = to_grayscale(check_image(img))
        maps = []
        if "wellexposedness" in weights:
            maps.append(wellexposedness_weight(gray, params.sigma_e))
        if "histogram" in weights:
            maps.append(histogram_gradient_weight(gray, params.n_bins, params.eps_g))
        per_exposure.append(maps)
    wmap = combine_weights(per_exposure, params.eps_n)
    return fuse(images, wmap), wmap


def adaptive_mef(pair: ExposurePair,
                 params: ClassicalParams = ClassicalParams(),
                 weights: Sequence[str] = WEIGHT_KINDS):
    """Fuse an under/over exposure pair with combined adaptive weights."""
    return fuse_exposures([pair.under, pair.over], params, weights)
