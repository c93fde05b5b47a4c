"""Training the weight-map network without ground truth.
========================================================

A desk-scale run (1/16 channel width, 64-pixel patches): the encoder
decoder sees the grayscale exposure stack, predicts a per-pixel softmax
weight map, and is trained purely by the weighted-SSIM loss against its
own inputs.  Takes around a minute on a laptop CPU.
"""

import sys
from pathlib import Path

import numpy as np

from hdrfuse import LossConfig, TrainConfig, fuse, fuse_learned, mef_ssim, save_image
from hdrfuse.model import predict_weights
from hdrfuse.synthetic import synthetic_corpus, synthetic_pair
from hdrfuse.trainer import train

out_dir = Path(__file__).parent / "output" / "04_train_weight_network"
out_dir.mkdir(parents=True, exist_ok=True)

# Two training scenes; a third scene is held out for the comparison below.
corpus = synthetic_corpus(2, size=128, seed0=0)
tc = TrainConfig(patch_size=64, batch_size=8, lr0=2e-3, epochs=100,
                 seed=0, width_multiplier=1 / 16, checkpoint_every=0)
lc = LossConfig()  # variance+gradient gamma, 7x7 stride-7 loss windows

print("epoch\tmean_loss\tlr\twall_ms")
net, log = train(corpus, tc, lc, out=out_dir / "model.ckpt",
                 log_stream=sys.stdout)
print(f"loss: {log.initial_loss:.4f} -> {log.final_loss:.4f}")

held_out = synthetic_pair(7, 128)
save_image(held_out.under, out_dir / "under.png")
save_image(held_out.over, out_dir / "over.png")

learned = fuse_learned(net, held_out)
naive = fuse([held_out.under, held_out.over], np.full((2, 128, 128), 0.5))
save_image(learned, out_dir / "fused_learned.png")
save_image(naive, out_dir / "fused_naive_average.png")

wmap = predict_weights(net, held_out)
save_image(wmap[0], out_dir / "weights_under.png")
save_image(wmap[1], out_dir / "weights_over.png")

stack = [held_out.under, held_out.over]
print(f"held-out fidelity: learned {mef_ssim(stack, learned).global_score:.4f}"
      f" vs naive average {mef_ssim(stack, naive).global_score:.4f}")
print(f"outputs in {out_dir}")
