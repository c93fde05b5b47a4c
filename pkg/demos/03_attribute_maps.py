"""Per-window attributes and the blend coefficients they induce.
================================================================

Variance, gradient and well-exposedness are measured on 7x7 windows of
each exposure, alone and in pairwise hybrid combinations.  The resulting
gamma map decides, window by window, whether the training loss anchors the
fused image to the under- or the over-exposed input.
"""

from pathlib import Path

import numpy as np

from hdrfuse import AttributeKind, gamma_for_pair, render_attribute_maps, save_image
from hdrfuse.loss import loss_window_spec
from hdrfuse.synthetic import synthetic_pair

out_dir = Path(__file__).parent / "output" / "03_attribute_maps"
out_dir.mkdir(parents=True, exist_ok=True)

pair = synthetic_pair(seed=0, size=128)
save_image(pair.under, out_dir / "under.png")
save_image(pair.over, out_dir / "over.png")

spec = loss_window_spec()  # 7x7 windows, stride 7

# The full panel: each attribute kind, both exposures, jointly rescaled.
for kind in AttributeKind:
    map_under, map_over = render_attribute_maps(pair, kind, spec)
    save_image(map_under, out_dir / f"{kind.value}_under.png")
    save_image(map_over, out_dir / f"{kind.value}_over.png")

# Gamma summaries: the mean tells which exposure dominates the loss.
print("mean gamma (share of the under-exposed image) per attribute kind:")
for kind in AttributeKind:
    gamma = gamma_for_pair(pair.under_gray, pair.over_gray, kind, spec)
    print(f"  {kind.value:10s} mean={gamma.mean():.3f} "
          f"min={gamma.min():.3f} max={gamma.max():.3f}")
    assert np.all((gamma >= 0) & (gamma <= 1))

print(f"panels in {out_dir}")
