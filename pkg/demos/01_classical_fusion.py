"""Adaptive-weight exposure fusion, and why it takes two weights.
================================================================

A banded test scene puts each weighting function in a situation it cannot
handle alone: the intensity-based weight walks into a flat mid-gray wall,
the histogram-based weight dithers where both exposures have spread
histograms.  Fusing with both weights multiplied keeps the best of each.
"""

from pathlib import Path

import numpy as np

from hdrfuse import ClassicalParams, fuse_exposures, mef_ssim, save_image
from hdrfuse.synthetic import ablation_pair

out_dir = Path(__file__).parent / "output" / "01_classical_fusion"
out_dir.mkdir(parents=True, exist_ok=True)

# A reproducible scene: a flat wall in the over-exposure, a dim band that
# only the over-exposure renders well, a clipped band, a crushed band.
pair = ablation_pair(seed=0)
save_image(pair.under, out_dir / "under.png")
save_image(pair.over, out_dir / "over.png")

stack = [pair.under, pair.over]
params = ClassicalParams()  # sigma_e=0.2, 256 histogram bins

# Fuse three ways: both weights, and each weight alone.
variants = {
    "combined": ("wellexposedness", "histogram"),
    "wellexposedness_only": ("wellexposedness",),
    "histogram_only": ("histogram",),
}
scores = {}
for name, kinds in variants.items():
    fused, wmap = fuse_exposures(stack, params, kinds)
    save_image(fused, out_dir / f"fused_{name}.png")
    # the per-exposure weight maps, exported as grayscale panels
    save_image(wmap[0], out_dir / f"weights_{name}_under.png")
    save_image(wmap[1], out_dir / f"weights_{name}_over.png")
    scores[name] = mef_ssim(stack, fused).global_score

print("stack fidelity (higher is better):")
for name, score in scores.items():
    print(f"  {name:22s} {score:.4f}")

best = max(scores, key=scores.get)
print(f"\nbest variant: {best}")
assert best == "combined"
print(f"outputs in {out_dir}")
