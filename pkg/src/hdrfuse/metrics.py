"""Structural similarity metrics for fused images.

``ssim_window`` is the classic single-window SSIM with uniform (box)
weighting and population statistics.  ``mef_ssim`` scores a fused image
against its whole exposure stack: each sliding window builds a desired
reference patch (maximum contrast, contrast-weighted average structure,
luminance ignored) and measures the structural agreement of the fused
window with that reference.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .image import to_grayscale, window_anchors

#: exponent of the contrast-based structure weighting
STRUCTURE_EXPONENT = 4

#: below this, a window's contrast is treated as zero (flat window)
_FLAT_EPS = 1e-12


@dataclass(frozen=True)
class SsimWindowSpec:
    """Window geometry and stabilizers for SSIM-family scores.

    Classic SSIM uses odd window sizes; the stack metric defaults to 8, so
    only size >= 2 is enforced here.
    """

    window_size: int = 7
    stride: int = 1
    c1: float = 0.01 ** 2
    c2: float = 0.03 ** 2

    def __post_init__(self):
        if self.window_size < 2:
            raise ValueError("window_size must be >= 2")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.c1 <= 0 or self.c2 <= 0:
            raise ValueError("stabilizers c1, c2 must be positive")


#: default geometry for scoring fused images against their stack
MEF_SSIM_SPEC = SsimWindowSpec(window_size=8, stride=1)


def ssim_window(a: np.ndarray, b: np.ndarray,
                spec: SsimWindowSpec = SsimWindowSpec()) -> float:
    """SSIM of two equally sized single-channel patches.

    Box weighting over the whole patch, population statistics.  Result lies
    in [-1, 1] with 1 iff the patches are identical.
    """
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"patch shapes differ: {x.shape} vs {y.shape}")
    mx, my = x.mean(), y.mean()
    xc, yc = x - mx, y - my
    vx, vy = (xc * xc).mean(), (yc * yc).mean()
    cxy = (xc * yc).mean()
    c1, c2 = spec.c1, spec.c2
    num = (2.0 * mx * my + c1) * (2.0 * cxy + c2)
    den = (mx * mx + my * my + c1) * (vx + vy + c2)
    return float(num / den)


@dataclass(frozen=True)
class MefSsimReport:
    """Per-window fidelity scores of a fused image, plus their mean."""

    global_score: float
    anchor_rows: np.ndarray
    anchor_cols: np.ndarray
    scores: np.ndarray  # (len(anchor_rows), len(anchor_cols))

    @property
    def per_patch_scores(self) -> dict:
        return {(int(r), int(c)): float(self.scores[i, j])
                for i, r in enumerate(self.anchor_rows)
                for j, c in enumerate(self.anchor_cols)}

    def iter_rows(self):
        """Yield (anchor_row, anchor_col, score) in row-major order."""
        for i, r in enumerate(self.anchor_rows):
            for j, c in enumerate(self.anchor_cols):
                yield int(r), int(c), float(self.scores[i, j])


def _integral(img: np.ndarray) -> np.ndarray:
    s = np.zeros((img.shape[0] + 1, img.shape[1] + 1), dtype=np.float64)
    np.cumsum(np.cumsum(img, axis=0), axis=1, out=s[1:, 1:])
    return s


def _box_sums(integral: np.ndarray, size: int,
              rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Window sums at every (row, col) anchor from an integral image."""
    r0, c0 = rows[:, None], cols[None, :]
    r1, c1 = r0 + size, c0 + size
    return integral[r1, c1] - integral[r0, c1] - integral[r1, c0] + integral[r0, c0]


def mef_ssim(stack: Sequence[np.ndarray], fused: np.ndarray,
             spec: SsimWindowSpec = MEF_SSIM_SPEC) -> MefSsimReport:
    """Structural fidelity of a fused image against its exposure stack.

    Per window, each input patch splits into mean / contrast / structure.
    The desired patch takes the maximum contrast and the contrast-weighted
    (exponent 4) average structure; the window score is the structural
    SSIM term between that desired patch and the mean-removed fused patch.
    Color inputs are scored on their grayscale conversion.

    Windows slide by ``spec.stride`` with an extra edge-flush row/column
    when the strided grid stops short of the border.
    """
    if len(stack) < 2:
        raise ValueError("need an exposure stack of at least 2 images")
    xs = [np.asarray(to_grayscale(img), dtype=np.float64) for img in stack]
    y = np.asarray(to_grayscale(fused), dtype=np.float64)
    for x in xs:
        if x.shape != y.shape:
            raise ValueError(f"stack image {x.shape} does not match fused {y.shape}")

    k = spec.window_size
    h, w = y.shape
    rows = window_anchors(h, k, spec.stride)
    cols = window_anchors(w, k, spec.stride)
    n = float(k * k)
    n_exp = len(xs)

    ints = [_integral(x) for x in xs]
    int_y = _integral(y)
    sum_x = np.stack([_box_sums(s, k, rows, cols) for s in ints])        # (N, R, C)
    sum_y = _box_sums(int_y, k, rows, cols)
    sum_yy = _box_sums(_integral(y * y), k, rows, cols)
    sum_xy = np.stack([_box_sums(_integral(x * y), k, rows, cols) for x in xs])

    # Centered inner products between exposures: <x_i - mu_i, x_j - mu_j>.
    mu = sum_x / n
    mu_y = sum_y / n
    gram = np.empty((n_exp, n_exp) + sum_y.shape, dtype=np.float64)
    for i in range(n_exp):
        for j in range(i, n_exp):
            s_ij = _box_sums(_integral(xs[i] * xs[j]), k, rows, cols)
            gram[i, j] = gram[j, i] = s_ij - n * mu[i] * mu[j]
    contrast = np.sqrt(np.maximum(np.einsum("iirc->irc", gram), 0.0))     # (N, R, C)

    # Structure weights: omega_k proportional to contrast^4.  Folding one
    # contrast factor into the weights (contrast^3 / sum contrast^4) keeps
    # flat windows finite: their term simply drops out.
    quart = contrast ** STRUCTURE_EXPONENT
    denom = quart.sum(axis=0)
    live = denom > _FLAT_EPS
    rho = np.zeros_like(contrast)
    np.divide(contrast ** (STRUCTURE_EXPONENT - 1), denom,
              out=rho, where=live[None, :, :])

    # z = sum_k rho_k (x_k - mu_k); the desired patch is c_hat * z / |z|.
    z_norm_sq = np.einsum("irc,jrc,ijrc->rc", rho, rho, gram)
    z_dot_y = ((sum_xy - n * mu * mu_y[None]) * rho).sum(axis=0)
    c_hat = contrast.max(axis=0)
    z_norm = np.sqrt(np.maximum(z_norm_sq, 0.0))
    live_z = z_norm > _FLAT_EPS

    scale = np.zeros_like(c_hat)
    np.divide(c_hat, z_norm, out=scale, where=live_z)
    var_ref = np.where(live_z, c_hat * c_hat / n, 0.0)
    cov_ref = scale * z_dot_y / n
    var_y = np.maximum(sum_yy - n * mu_y * mu_y, 0.0) / n

    scores = (2.0 * cov_ref + spec.c2) / (var_ref + var_y + spec.c2)
    return MefSsimReport(
        global_score=float(scores.mean()),
        anchor_rows=rows,
        anchor_cols=cols,
        scores=scores,
    )


def ideal_reference_fusion(stack: Sequence[np.ndarray],
                           spec: SsimWindowSpec) -> np.ndarray:
    """Reassemble the per-window desired patches into one array.

    Only meaningful for non-overlapping window grids (stride >= size); the
    result scores 1.0 under ``mef_ssim`` with the same spec and bounds any
    other fusion of the stack from above.  Values are not clamped to [0, 1]
    (clamping would distort the desired patches), so this is a metric-space
    reference rather than a displayable image.
    """
    xs = [np.asarray(to_grayscale(img), dtype=np.float64) for img in stack]
    k = spec.window_size
    h, w = xs[0].shape
    out = np.zeros((h, w), dtype=np.float64)
    rows = window_anchors(h, k, spec.stride)
    cols = window_anchors(w, k, spec.stride)
    for r in rows:
        for c in cols:
            patches = [x[r:r + k, c:c + k] for x in xs]
            mus = [p.mean() for p in patches]
            centered = [p - m for p, m in zip(patches, mus)]
            contrasts = [float(np.sqrt((p * p).sum())) for p in centered]
            quart = sum(cc ** STRUCTURE_EXPONENT for cc in contrasts)
            if quart <= _FLAT_EPS:
                ref = np.zeros((k, k))
            else:
                z = sum((cc ** (STRUCTURE_EXPONENT - 1) / quart) * p
                        for cc, p in zip(contrasts, centered))
                zn = float(np.sqrt((z * z).sum()))
                ref = max(contrasts) * z / zn if zn > _FLAT_EPS else np.zeros((k, k))
            out[r:r + k, c:c + k] = ref + float(np.mean(mus))
    return out
