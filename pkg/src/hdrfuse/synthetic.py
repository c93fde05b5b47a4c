"""Deterministic synthetic exposure pairs for tests, demos and harnesses.

Each scene is a radiance field with three kinds of regions:

* mid-radiance textured zones whose over-exposure stays unclipped with
  amplified contrast while the under-exposure sits nearer mid-gray, so
  intensity-based and structure-based cues genuinely disagree;
* bright zones that saturate (and flatten) in the over-exposure;
* dark zones that only the over-exposure renders with usable contrast.

The under/over images are gain-plus-offset exposures of the same radiance,
clipped to [0, 1], with a mild per-channel tint.
"""

from __future__ import annotations

import numpy as np

from .image import ExposurePair

UNDER_GAIN, UNDER_OFFSET = 0.55, 0.02
OVER_GAIN, OVER_OFFSET = 1.9, 0.05


def _smooth(a: np.ndarray, passes: int = 1) -> np.ndarray:
    for _ in range(passes):
        p = np.pad(a, 1, mode="edge")
        a = (p[:-2, :-2] + p[:-2, 1:-1] + p[:-2, 2:]
             + p[1:-1, :-2] + p[1:-1, 1:-1] + p[1:-1, 2:]
             + p[2:, :-2] + p[2:, 1:-1] + p[2:, 2:]) / 9.0
    return a


def _coarse_field(rng, size, lo, hi, cells=5):
    coarse = rng.uniform(lo, hi, size=(cells, cells))
    reps = -(-size // cells)
    field = np.kron(coarse, np.ones((reps, reps)))[:size, :size]
    return _smooth(field, passes=4)


def _paint_blobs(rng, scene, texture_amp, value, amp, count, size):
    for _ in range(count):
        h = int(rng.integers(size // 6, size // 2))
        w = int(rng.integers(size // 6, size // 2))
        r = int(rng.integers(0, size - h + 1))
        c = int(rng.integers(0, size - w + 1))
        scene[r:r + h, c:c + w] = value + rng.uniform(-0.02, 0.02)
        texture_amp[r:r + h, c:c + w] = amp


def synthetic_scene(seed: int, size: int = 128) -> np.ndarray:
    """Radiance field in [0, 1] with mid / bright / dark textured zones."""
    rng = np.random.default_rng(seed)
    scene = _coarse_field(rng, size, 0.20, 0.55)
    texture_amp = np.full((size, size), 0.03)
    _paint_blobs(rng, scene, texture_amp, value=0.42, amp=0.05, count=3, size=size)
    _paint_blobs(rng, scene, texture_amp, value=0.66, amp=0.05, count=2, size=size)
    _paint_blobs(rng, scene, texture_amp, value=0.10, amp=0.03, count=2, size=size)
    texture = _smooth(rng.standard_normal((size, size)), passes=1)
    texture /= max(np.abs(texture).max(), 1e-9)
    return np.clip(scene + texture_amp * texture, 0.0, 1.0)


def expose(scene: np.ndarray, gain: float, offset: float,
           tint: np.ndarray) -> np.ndarray:
    """Gain-plus-offset exposure of a radiance field, mild per-channel tint."""
    out = (scene[:, :, None] * (1.0 + tint[None, None, :])) * gain + offset
    return np.clip(out, 0.0, 1.0)


def synthetic_pair(seed: int, size: int = 128) -> ExposurePair:
    """Color under/over exposure pair of one synthetic scene."""
    scene = synthetic_scene(seed, size)
    rng = np.random.default_rng(seed + 104729)
    tint = rng.uniform(-0.08, 0.08, size=3)
    under = expose(scene, UNDER_GAIN, UNDER_OFFSET, tint)
    over = expose(scene, OVER_GAIN, OVER_OFFSET, tint)
    return ExposurePair(under=under, over=over)


def synthetic_corpus(count: int, size: int = 128, seed0: int = 0):
    """List of independent synthetic pairs, seeds seed0 .. seed0+count-1."""
    return [synthetic_pair(seed0 + i, size) for i in range(count)]


def ablation_pair(seed: int, size: int = 200) -> ExposurePair:
    """Banded pair on which each classical weight has a distinct failure.

    One band is a flat mid-gray wall in the over-exposure (the intensity
    preference misfires there; the histogram weight vetoes it), other bands
    pit a dim exposure against a well-exposed one (the intensity weight
    decides cleanly; raw histogram lookups only add jitter), plus clipped
    and crushed bands where every weighting agrees.  Combining both weights
    scores above either one alone.
    """
    rng = np.random.default_rng(seed)
    tex = np.clip(rng.standard_normal((size, size)), -2.5, 2.5)
    tex = _smooth(tex, passes=1)
    tex /= max(np.abs(tex).max(), 1e-9)
    under = np.empty((size, size))
    over = np.empty((size, size))
    h = size // 20
    bands = (  # rows, under base/amplitude, over base/amplitude
        (7, 0.30, 0.08, 0.37, 0.0),   # flat over wall, textured under
        (4, 0.08, 0.02, 0.45, 0.10),  # dim under, well-exposed over
        (3, 0.47, 0.10, 0.93, 0.02),  # near-saturated over, good under
        (3, 0.45, 0.06, 1.00, 0.0),   # clipped over
        (3, 0.00, 0.0, 0.35, 0.06),   # crushed under
    )
    row = 0
    for rows, ub, ua, ob, oa in bands:
        sl = slice(row * h, (row + rows) * h if row + rows < 20 else size)
        under[sl] = ub + ua * tex[sl]
        over[sl] = ob + oa * tex[sl]
        row += rows
    under = np.clip(under, 0.0, 1.0)
    over = np.clip(over, 0.0, 1.0)
    return ExposurePair(under=np.stack([under] * 3, axis=2),
                        over=np.stack([over] * 3, axis=2))
