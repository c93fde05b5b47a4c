"""Encoder-decoder network that predicts per-pixel fusion weight maps.

The two grayscale exposures enter as one 2-channel image.  A VGG-style
encoder (10 conv+BN+ReLU layers, 2x2 pools after layers 2, 4, 7 and 10)
contracts by 16x; the mirrored decoder upsamples before each block and a
final projection produces 2-channel logits whose per-pixel softmax is the
weight map.  A width multiplier scales every channel count so the same
shape runs at desk scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .classical import fuse
from .image import ExposurePair, to_grayscale

ENCODER_CHANNELS = (64, 64, 128, 128, 256, 256, 256, 512, 512, 512)
DECODER_CHANNELS = tuple(reversed(ENCODER_CHANNELS))
POOL_AFTER = (2, 4, 7, 10)      # 1-based encoder conv indices
UPSAMPLE_BEFORE = (1, 4, 7, 9)  # 1-based decoder conv indices
SPATIAL_MULTIPLE = 16           # 2^(pool count)


@dataclass(frozen=True)
class ModelConfig:
    width_multiplier: float = 1.0
    input_channels: int = 2
    output_channels: int = 2

    def __post_init__(self):
        if not (0.0 < self.width_multiplier <= 1.0):
            raise ValueError("width_multiplier must be in (0, 1]")

    def scale(self, channels: int) -> int:
        return max(1, int(round(channels * self.width_multiplier)))

    @property
    def encoder_channels(self):
        return tuple(self.scale(c) for c in ENCODER_CHANNELS)

    @property
    def decoder_channels(self):
        return tuple(self.scale(c) for c in DECODER_CHANNELS)


class FusionNet:
    """The layer stack plus its configuration; owns all parameter tensors."""

    def __init__(self, cfg: ModelConfig, layers):
        self.cfg = cfg
        self.net = nn.Sequential(layers)

    # -- construction ------------------------------------------------------

    @classmethod
    def build(cls, cfg: ModelConfig, seed: int, dtype=np.float32):
        rng = np.random.default_rng(seed)
        layers = []
        prev = cfg.input_channels
        for i, ch in enumerate(cfg.encoder_channels, start=1):
            layers.append(nn.Conv2d(prev, ch, rng, dtype=dtype, name=f"enc{i:02d}"))
            layers.append(nn.BatchNorm2d(ch, dtype=dtype, name=f"enc{i:02d}_bn"))
            layers.append(nn.ReLU())
            if i in POOL_AFTER:
                layers.append(nn.MaxPool2d())
            prev = ch
        for i, ch in enumerate(cfg.decoder_channels, start=1):
            if i in UPSAMPLE_BEFORE:
                layers.append(nn.Upsample2d())
            layers.append(nn.Conv2d(prev, ch, rng, dtype=dtype, name=f"dec{i:02d}"))
            layers.append(nn.BatchNorm2d(ch, dtype=dtype, name=f"dec{i:02d}_bn"))
            layers.append(nn.ReLU())
            prev = ch
        layers.append(nn.Conv2d(prev, cfg.output_channels, rng, dtype=dtype,
                                name="head"))
        layers.append(nn.ChannelSoftmax())
        return cls(cfg, layers)

    # -- introspection -----------------------------------------------------

    def parameters(self):
        """Trainable tensors in declaration order."""
        return self.net.parameters()

    def all_tensors(self):
        """Trainable tensors plus batch-norm running stats, in order."""
        out = []
        for layer in self.net.layers:
            out.extend(layer.parameters())
            if isinstance(layer, nn.BatchNorm2d):
                out.extend(layer.state_tensors())
        return out

    def batchnorms(self):
        return [l for l in self.net.layers if isinstance(l, nn.BatchNorm2d)]

    @property
    def stats_ready(self) -> bool:
        return all(bn.batches_tracked > 0 for bn in self.batchnorms())

    def astype(self, dtype):
        for t in self.all_tensors():
            t.astype(dtype)
        return self

    # -- execution ---------------------------------------------------------

    def forward(self, x, training=False):
        return self.net.forward(x, training=training)

    def backward(self, grad_out):
        return self.net.backward(grad_out)

    # -- persistence -------------------------------------------------------

    def layer_specs(self):
        specs = []
        for layer in self.net.layers:
            if isinstance(layer, nn.Conv2d):
                specs.append((nn.CONV, layer.in_channels, layer.out_channels))
            elif isinstance(layer, nn.BatchNorm2d):
                specs.append((nn.BATCHNORM, layer.channels, layer.channels))
            elif isinstance(layer, nn.ReLU):
                specs.append((nn.RELU, 0, 0))
            elif isinstance(layer, nn.MaxPool2d):
                specs.append((nn.MAXPOOL, 0, 0))
            elif isinstance(layer, nn.Upsample2d):
                specs.append((nn.UPSAMPLE, 0, 0))
            elif isinstance(layer, nn.ChannelSoftmax):
                specs.append((nn.SOFTMAX, 0, 0))
            else:
                raise TypeError(f"unknown layer {type(layer).__name__}")
        return specs

    def save(self, path):
        steps = min((bn.batches_tracked for bn in self.batchnorms()), default=0)
        nn.save_checkpoint(path, self.cfg.width_multiplier, steps,
                           self.layer_specs(), self.all_tensors())

    @classmethod
    def load(cls, path):
        width, steps, specs, arrays = nn.load_checkpoint(path)
        cfg_in = next(s for s in specs if s[0] == nn.CONV)[1]
        cfg_out = next(s for s in reversed(specs) if s[0] == nn.CONV)[2]
        cfg = ModelConfig(width_multiplier=width, input_channels=cfg_in,
                          output_channels=cfg_out)
        rng = np.random.default_rng(0)
        layers = []
        for idx, (kind, in_ch, out_ch) in enumerate(specs):
            if kind == nn.CONV:
                layers.append(nn.Conv2d(in_ch, out_ch, rng, name=f"layer{idx:02d}"))
            elif kind == nn.BATCHNORM:
                bn = nn.BatchNorm2d(in_ch, name=f"layer{idx:02d}_bn")
                bn.batches_tracked = steps
                layers.append(bn)
            elif kind == nn.RELU:
                layers.append(nn.ReLU())
            elif kind == nn.MAXPOOL:
                layers.append(nn.MaxPool2d())
            elif kind == nn.UPSAMPLE:
                layers.append(nn.Upsample2d())
            elif kind == nn.SOFTMAX:
                layers.append(nn.ChannelSoftmax())
            else:
                raise nn.CheckpointError(f"{path}: unknown layer kind {kind}")
        net = cls(cfg, layers)
        tensors = net.all_tensors()
        if len(tensors) != len(arrays):
            raise nn.CheckpointError(
                f"{path}: expected {len(tensors)} tensors, found {len(arrays)}")
        for t, a in zip(tensors, arrays):
            if t.shape != a.shape:
                raise nn.CheckpointError(
                    f"{path}: tensor {t.name} shape {t.shape} != stored {a.shape}")
            t.data = a
        return net


def build_model(cfg: ModelConfig, seed: int, dtype=np.float32) -> FusionNet:
    """Deterministically initialized network for the given configuration."""
    return FusionNet.build(cfg, seed, dtype=dtype)


# ---------------------------------------------------------------------------
# Inference
# ---------------------------------------------------------------------------

def pair_to_input(pair: ExposurePair, dtype=np.float32) -> np.ndarray:
    """Stack the grayscale exposures as one (1, 2, H, W) network input."""
    u = to_grayscale(pair.under)
    o = to_grayscale(pair.over)
    return np.stack([u, o])[None].astype(dtype)


def pad_to_multiple(x: np.ndarray, multiple: int = SPATIAL_MULTIPLE) -> np.ndarray:
    """Pad the trailing two axes up to the next multiple by edge reflection.

    Symmetric (edge-inclusive) reflection so inputs smaller than the pad
    amount remain valid.
    """
    h, w = x.shape[-2:]
    ph = (-h) % multiple
    pw = (-w) % multiple
    if ph == 0 and pw == 0:
        return x
    pad = [(0, 0)] * (x.ndim - 2) + [(0, ph), (0, pw)]
    return np.pad(x, pad, mode="symmetric")


def predict_weights(net: FusionNet, pair: ExposurePair) -> np.ndarray:
    """Per-pixel softmax weight map (2, H, W) for the pair, inference mode.

    Inputs whose sides are not multiples of 16 are reflect-padded through
    the network and the weight map is cropped back.
    """
    x = pair_to_input(pair, dtype=net.all_tensors()[0].dtype)
    h, w = x.shape[-2:]
    y = net.forward(pad_to_multiple(x), training=False)
    return y[0, :, :h, :w].astype(np.float64)


def fuse_learned(net: FusionNet, pair: ExposurePair) -> np.ndarray:
    """Apply the predicted weight map to the color inputs."""
    wmap = predict_weights(net, pair)
    return fuse([pair.under, pair.over], wmap)


def calibrate(net: FusionNet, pairs) -> None:
    """Populate batch-norm running statistics with training-mode forwards.

    Leaves weights untouched; useful before inference with a model that has
    not seen an optimizer step yet.
    """
    for pair in pairs:
        x = pad_to_multiple(pair_to_input(pair, dtype=net.all_tensors()[0].dtype))
        net.forward(x, training=True)
