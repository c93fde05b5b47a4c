"""What the stack-fidelity score measures.
==========================================

Each sliding window of the fused image is compared with a "desired" patch
assembled from the exposure stack: the strongest local contrast, and the
contrast-weighted average structure.  Luminance is ignored, so the score
rewards keeping detail, not any particular brightness.
"""

from pathlib import Path

import numpy as np

from hdrfuse import mef_ssim, save_image
from hdrfuse.metrics import ideal_reference_fusion, SsimWindowSpec
from hdrfuse.synthetic import synthetic_pair

out_dir = Path(__file__).parent / "output" / "02_stack_fidelity"
out_dir.mkdir(parents=True, exist_ok=True)

pair = synthetic_pair(seed=3, size=128)
stack = [pair.under, pair.over]

# Candidate fusions, from degenerate to sensible.
candidates = {
    "under_itself": pair.under,
    "over_itself": pair.over,
    "flat_gray": np.full_like(pair.under, 0.5),
    "plain_average": 0.5 * pair.under + 0.5 * pair.over,
}
for name, img in candidates.items():
    report = mef_ssim(stack, img)
    print(f"  {name:14s} {report.global_score:.4f}")
    save_image(np.clip(report.scores, 0, 1), out_dir / f"heatmap_{name}.png")

# A duplicate stack is a sanity check: the only detail to keep is the
# image itself, so scoring it against {img, img} must give exactly 1.
dup = mef_ssim([pair.under, pair.under], pair.under).global_score
print(f"  duplicate-stack identity: {dup:.6f}")

# On a non-overlapping grid the desired patches can be stitched into a
# reference no candidate can beat.
spec = SsimWindowSpec(window_size=8, stride=8)
reference = ideal_reference_fusion([pair.under_gray, pair.over_gray], spec)
ref_score = mef_ssim([pair.under_gray, pair.over_gray], reference, spec).global_score
print(f"  stitched-reference upper bound: {ref_score:.6f}")
print(f"heatmaps in {out_dir}")
