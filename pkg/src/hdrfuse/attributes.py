"""Per-window perceptual attributes and the blending coefficients they induce.

Three attributes are measured on each loss window of a grayscale exposure:
intensity variance, mean gradient magnitude, and well-exposedness.  Single
attributes or product-over-root-sum-of-squares hybrids of two of them are
turned into a per-window coefficient gamma in [0, 1] that decides how much
the under-exposed image (versus the over-exposed one) anchors each window
of the fused output.
"""

from __future__ import annotations

import enum

import numpy as np

from .image import ExposurePair, window_anchors, window_view
from .metrics import SsimWindowSpec

#: attribute values below this floor are clamped before the gamma ratio,
#: so two structureless windows split the blend evenly
GAMMA_FLOOR = 1e-4


class AttributeKind(enum.Enum):
    VARIANCE = "variance"
    GRADIENT = "gradient"
    WELL_EXPOSEDNESS = "wellexp"
    VAR_GRAD = "var-grad"
    GRAD_WELL = "grad-well"
    VAR_WELL = "var-well"


def _grid(img, spec):
    a = np.asarray(img, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("expected a single-channel image")
    rows = window_anchors(a.shape[0], spec.window_size, spec.stride)
    cols = window_anchors(a.shape[1], spec.window_size, spec.stride)
    return a, rows, cols


def local_variance(img: np.ndarray, spec: SsimWindowSpec) -> np.ndarray:
    """Population variance of each window's pixels."""
    a, rows, cols = _grid(img, spec)
    win = window_view(a, spec.window_size, rows, cols)
    return win.var(axis=(-2, -1))


def gradient_magnitude(img: np.ndarray) -> np.ndarray:
    """Per-pixel central-difference gradient magnitude, replicated borders."""
    a = np.asarray(img, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("expected a single-channel image")
    p = np.pad(a, 1, mode="edge")
    gy = (p[2:, 1:-1] - p[:-2, 1:-1]) / 2.0
    gx = (p[1:-1, 2:] - p[1:-1, :-2]) / 2.0
    return np.sqrt(gx * gx + gy * gy)


def local_gradient(img: np.ndarray, spec: SsimWindowSpec) -> np.ndarray:
    """Window mean of the per-pixel gradient magnitude."""
    a, rows, cols = _grid(img, spec)
    mag = gradient_magnitude(a)
    win = window_view(mag, spec.window_size, rows, cols)
    return win.mean(axis=(-2, -1))


def local_wellexposedness(img: np.ndarray, spec: SsimWindowSpec,
                          sigma_e: float = 0.2) -> np.ndarray:
    """Window mean of exp(-(I - 0.5)^2 / (2 sigma_e^2)).

    Fixed mid-gray center: this is the loss-side flavor, unlike the
    adaptive center used by the classical fusion weights.
    """
    a, rows, cols = _grid(img, spec)
    we = np.exp(-((a - 0.5) ** 2) / (2.0 * sigma_e ** 2))
    win = window_view(we, spec.window_size, rows, cols)
    return win.mean(axis=(-2, -1))


def hybrid_attribute(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Combine two attribute maps as a*b / sqrt(a^2 + b^2).

    Zero where both attributes vanish; the gamma floor later resolves such
    windows to an even split.  The result never exceeds min(a, b).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"attribute grids differ: {a.shape} vs {b.shape}")
    sq = a * a + b * b
    out = np.zeros_like(sq)
    live = sq > 0
    out[live] = (a * b)[live] / np.sqrt(sq[live])
    return out


def attribute_map(img: np.ndarray, kind: AttributeKind, spec: SsimWindowSpec,
                  sigma_e: float = 0.2) -> np.ndarray:
    """Plain or hybrid attribute map of one grayscale image."""
    if kind is AttributeKind.VARIANCE:
        return local_variance(img, spec)
    if kind is AttributeKind.GRADIENT:
        return local_gradient(img, spec)
    if kind is AttributeKind.WELL_EXPOSEDNESS:
        return local_wellexposedness(img, spec, sigma_e)
    if kind is AttributeKind.VAR_GRAD:
        return hybrid_attribute(local_variance(img, spec), local_gradient(img, spec))
    if kind is AttributeKind.GRAD_WELL:
        return hybrid_attribute(local_wellexposedness(img, spec, sigma_e),
                                local_gradient(img, spec))
    if kind is AttributeKind.VAR_WELL:
        return hybrid_attribute(local_variance(img, spec),
                                local_wellexposedness(img, spec, sigma_e))
    raise ValueError(f"unknown attribute kind: {kind}")


def gamma_from_attributes(attr_under: np.ndarray, attr_over: np.ndarray,
                          floor: float = GAMMA_FLOOR) -> np.ndarray:
    """Per-window share of the under-exposed image in the blend.

    gamma = g(a_under) / (g(a_under) + g(a_over)) with g(x) = max(x, floor).
    The over-exposed share is exactly 1 - gamma.
    """
    au = np.maximum(np.asarray(attr_under, dtype=np.float64), floor)
    ao = np.maximum(np.asarray(attr_over, dtype=np.float64), floor)
    if au.shape != ao.shape:
        raise ValueError(f"attribute grids differ: {au.shape} vs {ao.shape}")
    return au / (au + ao)


def gamma_for_pair(gray_under: np.ndarray, gray_over: np.ndarray,
                   kind: AttributeKind, spec: SsimWindowSpec,
                   sigma_e: float = 0.2, floor: float = GAMMA_FLOOR) -> np.ndarray:
    """Gamma map of an exposure pair for the chosen attribute kind."""
    au = attribute_map(gray_under, kind, spec, sigma_e)
    ao = attribute_map(gray_over, kind, spec, sigma_e)
    return gamma_from_attributes(au, ao, floor)


def render_attribute_maps(pair: ExposurePair, kind: AttributeKind,
                          spec: SsimWindowSpec, sigma_e: float = 0.2):
    """Attribute maps of both exposures as displayable grayscale images.

    Both maps are rescaled by their joint maximum into [0, 1] and returned
    at window-grid resolution (one pixel per window).
    """
    au = attribute_map(pair.under_gray, kind, spec, sigma_e)
    ao = attribute_map(pair.over_gray, kind, spec, sigma_e)
    joint = max(float(au.max()), float(ao.max()))
    if joint <= 0:
        return np.zeros_like(au), np.zeros_like(ao)
    return au / joint, ao / joint
