"""Patch-based unsupervised training of the weight-map network.

Each aligned exposure pair contributes square patches; every optimizer
step runs the network on a batch of grayscale patch stacks, fuses the
color patches with the predicted weights, evaluates the weighted-SSIM
loss, and backpropagates its exact gradient.  Gamma maps depend only on
the inputs, so they are computed once per patch and reused as constants
for the whole run.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .attributes import AttributeKind, gamma_for_pair
from .image import ExposurePair, extract_patches, to_grayscale
from .loss import LossConfig, weighted_ssim_loss
from .metrics import MEF_SSIM_SPEC, SsimWindowSpec, mef_ssim
from .model import (ModelConfig, FusionNet, build_model, fuse_learned,
                    pad_to_multiple)
from .nn import Adam


@dataclass(frozen=True)
class TrainConfig:
    patch_size: int = 250
    batch_size: int = 64
    lr0: float = 1e-4
    lr_decay: float = 0.99
    epochs: int = 10
    seed: int = 0
    width_multiplier: float = 1.0
    checkpoint_every: int = 1   # 0 disables per-epoch checkpoint files


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    mean_loss: float
    lr: float
    wall_ms: int

    def line(self) -> str:
        return f"{self.epoch}\t{self.mean_loss:.6f}\t{self.lr:.6e}\t{self.wall_ms}"


@dataclass
class TrainingLog:
    epochs: list = field(default_factory=list)

    @property
    def initial_loss(self) -> float:
        return self.epochs[0].mean_loss

    @property
    def final_loss(self) -> float:
        return self.epochs[-1].mean_loss


class _Sample:
    """One training patch: color planes, grayscale stack, frozen gamma map."""

    __slots__ = ("under", "over", "gray", "gamma")

    def __init__(self, under, over, lc: LossConfig):
        self.under = under
        self.over = over
        self.gray = np.stack([to_grayscale(under), to_grayscale(over)])
        self.gamma = gamma_for_pair(self.gray[0], self.gray[1], lc.gamma_kind,
                                    lc.window, lc.sigma_e, lc.gamma_floor)


def _collect_samples(corpus, tc: TrainConfig, lc: LossConfig):
    if not corpus:
        raise ValueError("training corpus is empty")
    if lc.window.window_size > tc.patch_size:
        raise ValueError("loss window larger than the training patch")
    samples = []
    for pair in corpus:
        grid = extract_patches(pair.under, tc.patch_size, tc.patch_size)
        for r, c in grid.anchors:
            sl = (slice(r, r + tc.patch_size), slice(c, c + tc.patch_size))
            samples.append(_Sample(pair.under[sl], pair.over[sl], lc))
    return samples


def _epoch_checkpoint_path(out: Path, epoch: int) -> Path:
    return out.with_name(f"{out.stem}_epoch{epoch:03d}{out.suffix}")


def train(corpus, tc: TrainConfig, lc: LossConfig, out=None,
          log_stream=None, net: FusionNet | None = None):
    """Run the training loop; returns (net, TrainingLog).

    ``out`` names the final checkpoint; per-epoch checkpoints sit next to
    it as <stem>_epochNNN<suffix> when tc.checkpoint_every > 0.  A log
    line per epoch (epoch, mean loss, lr, wall ms; tab-separated) goes to
    ``log_stream`` when given.
    """
    samples = _collect_samples(corpus, tc, lc)
    if net is None:
        net = build_model(ModelConfig(width_multiplier=tc.width_multiplier),
                          seed=tc.seed)
    dtype = net.all_tensors()[0].dtype
    adam = Adam(net.parameters(), lr0=tc.lr0, decay=tc.lr_decay)
    rng = np.random.default_rng(tc.seed)
    out = Path(out) if out is not None else None
    log = TrainingLog()

    for epoch in range(tc.epochs):
        t0 = time.perf_counter()
        lr = adam.set_epoch(epoch)
        order = rng.permutation(len(samples))
        loss_sum = 0.0
        for start in range(0, len(order), tc.batch_size):
            batch = [samples[i] for i in order[start:start + tc.batch_size]]
            loss_sum += _train_step(net, adam, batch, lc, dtype)
        stats = EpochStats(epoch=epoch, mean_loss=loss_sum / len(samples),
                           lr=lr, wall_ms=int((time.perf_counter() - t0) * 1000))
        log.epochs.append(stats)
        if log_stream is not None:
            print(stats.line(), file=log_stream, flush=True)
        if out is not None and tc.checkpoint_every and \
                (epoch + 1) % tc.checkpoint_every == 0:
            net.save(_epoch_checkpoint_path(out, epoch))
    if out is not None:
        net.save(out)
    return net, log


def _train_step(net, adam, batch, lc, dtype):
    """One forward/backward/update on a batch; returns the summed loss."""
    size = batch[0].gray.shape[-1]
    x = pad_to_multiple(np.stack([s.gray for s in batch]).astype(dtype))
    weights = net.forward(x, training=True)
    grad_w = np.zeros_like(weights)
    b = len(batch)
    loss_sum = 0.0
    for i, s in enumerate(batch):
        w = weights[i, :, :size, :size].astype(np.float64)
        fused = w[0][:, :, None] * s.under + w[1][:, :, None] * s.over
        pair = ExposurePair(under=s.under, over=s.over)
        loss, gf = weighted_ssim_loss(pair, fused, lc, gamma=s.gamma)
        loss_sum += loss
        grad_w[i, 0, :size, :size] = (gf * s.under).sum(axis=2) / b
        grad_w[i, 1, :size, :size] = (gf * s.over).sum(axis=2) / b
    adam.zero_grad()
    net.backward(grad_w)
    adam.step()
    return loss_sum


# ---------------------------------------------------------------------------
# Gamma comparison harness
# ---------------------------------------------------------------------------

#: the five gamma configurations compared in the score table
TABLE_KINDS = (AttributeKind.VARIANCE, AttributeKind.GRADIENT,
               AttributeKind.WELL_EXPOSEDNESS, AttributeKind.GRAD_WELL,
               AttributeKind.VAR_GRAD)


@dataclass
class GammaScoreTable:
    kinds: tuple
    names: tuple
    scores: np.ndarray  # (n_pairs, n_kinds)

    @property
    def averages(self) -> np.ndarray:
        return self.scores.mean(axis=0)

    def to_csv(self) -> str:
        lines = ["image," + ",".join(k.value for k in self.kinds)]
        for name, row in zip(self.names, self.scores):
            lines.append(name + "," + ",".join(f"{v:.4f}" for v in row))
        lines.append("average," + ",".join(f"{v:.4f}" for v in self.averages))
        return "\n".join(lines) + "\n"


def evaluate_gamma_table(corpus, configs, tc: TrainConfig, names=None,
                         eval_spec: SsimWindowSpec = MEF_SSIM_SPEC,
                         log_stream=None) -> GammaScoreTable:
    """Train one model per gamma configuration and score every pair.

    Each configuration trains from scratch with the same TrainConfig; the
    fused output of each pair is scored against its own exposure stack.
    """
    if not corpus:
        raise ValueError("need at least one exposure pair")
    if names is None:
        names = tuple(f"pair_{i}" for i in range(len(corpus)))
    scores = np.zeros((len(corpus), len(configs)))
    for j, lc in enumerate(configs):
        net, _ = train(corpus, tc, lc, out=None, log_stream=log_stream)
        for i, pair in enumerate(corpus):
            fused = fuse_learned(net, pair)
            scores[i, j] = mef_ssim([pair.under, pair.over], fused,
                                    eval_spec).global_score
    kinds = tuple(lc.gamma_kind for lc in configs)
    return GammaScoreTable(kinds=kinds, names=tuple(names), scores=scores)


def table_configs(window: SsimWindowSpec | None = None, sigma_e: float = 0.2):
    """LossConfigs for the five standard gamma kinds."""
    base = LossConfig() if window is None else LossConfig(window=window)
    return [replace(base, gamma_kind=k, sigma_e=sigma_e) for k in TABLE_KINDS]


# ---------------------------------------------------------------------------
# Flat key = value config files
# ---------------------------------------------------------------------------

_TRAIN_FIELDS = {f.name: f.type for f in fields(TrainConfig)}
_LOSS_SCALARS = {"sigma_e": float, "gamma_floor": float}


def parse_config_text(text: str) -> dict:
    """Parse 'key = value' lines; '#' starts a comment, blanks ignored."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key] = value
    return out


def configs_from_mapping(kv: dict, tc: TrainConfig | None = None,
                         lc: LossConfig | None = None):
    """Apply config keys over defaults; unknown keys are an error."""
    tc = tc or TrainConfig()
    lc = lc or LossConfig()
    window = lc.window
    for key, value in kv.items():
        if key in _TRAIN_FIELDS:
            caster = float if key in ("lr0", "lr_decay", "width_multiplier") else int
            tc = replace(tc, **{key: caster(value)})
        elif key == "gamma_kind":
            lc = replace(lc, gamma_kind=AttributeKind(value))
        elif key in _LOSS_SCALARS:
            lc = replace(lc, **{key: float(value)})
        elif key == "window_size":
            window = replace(window, window_size=int(value))
        elif key == "window_stride":
            window = replace(window, stride=int(value))
        else:
            raise ValueError(f"unknown config key: {key}")
    lc = replace(lc, window=window)
    return tc, lc


def load_config_file(path, tc=None, lc=None):
    return configs_from_mapping(parse_config_text(Path(path).read_text()), tc, lc)
