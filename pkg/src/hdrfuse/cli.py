"""Command-line interface for the fusion toolkit.

Exit codes: 0 success, 1 usage error, 2 I/O error, 3 numeric or contract
failure.  Diagnostics go to stderr; scores and logs to stdout; images and
tables to files.  Output files are staged in memory and written via
temp-and-rename, so a failing invocation leaves no partial outputs.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from .attributes import AttributeKind, render_attribute_maps
from .classical import ClassicalParams, fuse_exposures
from .image import (ExposurePair, ImageFormatError, dynamic_range,
                    encode_image, load_image, load_pair)
from .loss import LossConfig, loss_window_spec
from .metrics import MEF_SSIM_SPEC, SsimWindowSpec, mef_ssim
from .model import FusionNet, fuse_learned, predict_weights
from .nn import CheckpointError
from .trainer import (TrainConfig, configs_from_mapping, evaluate_gamma_table,
                      parse_config_text, table_configs, train)

GAMMA_CHOICES = tuple(kind.value for kind in AttributeKind)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems through our exit-code scheme."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


class _Outputs:
    """Staged output files: rendered first, written atomically at the end."""

    def __init__(self):
        self._items = []

    def add_image(self, path, img):
        path = Path(path)
        self._items.append((path, encode_image(img, path.suffix)))

    def add_text(self, path, text):
        self._items.append((Path(path), text.encode()))

    def commit(self):
        written = []
        try:
            for path, data in self._items:
                fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."),
                                           prefix=path.name + ".")
                with os.fdopen(fd, "wb") as f:
                    f.write(data)
                os.replace(tmp, path)
                written.append(path)
        except BaseException:
            for path in written:
                try:
                    path.unlink()
                except OSError:
                    pass
            raise


def _score_spec(args) -> SsimWindowSpec:
    size = getattr(args, "window", None) or MEF_SSIM_SPEC.window_size
    stride = getattr(args, "stride", None) or MEF_SSIM_SPEC.stride
    return SsimWindowSpec(window_size=size, stride=stride)


def _loss_spec(args) -> SsimWindowSpec:
    default = loss_window_spec()
    size = getattr(args, "window", None) or default.window_size
    stride = getattr(args, "stride", None) or default.stride
    return SsimWindowSpec(window_size=size, stride=stride)


def _load_scene_images(scene: Path):
    """All images of one scene directory: under, over, then any extras."""
    named = {}
    extras = []
    for p in sorted(scene.iterdir()):
        if p.suffix.lower() not in (".png", ".ppm"):
            continue
        if p.stem in ("under", "over"):
            named[p.stem] = p
        else:
            extras.append(p)
    if "under" not in named or "over" not in named:
        raise FileNotFoundError(f"{scene}: expected under.png/under.ppm and over.*")
    pair = load_pair(named["under"], named["over"])
    images = [pair.under, pair.over] + [load_image(p) for p in extras]
    return pair, images


def _load_scenes(data_dir):
    data_dir = Path(data_dir)
    scenes = [d for d in sorted(data_dir.iterdir()) if d.is_dir()]
    if not scenes:
        raise FileNotFoundError(f"{data_dir}: no scene subdirectories")
    return [(d.name, *_load_scene_images(d)) for d in scenes]


def _train_configs(args):
    tc, lc = TrainConfig(), LossConfig()
    if getattr(args, "config", None):
        tc, lc = configs_from_mapping(
            parse_config_text(Path(args.config).read_text()), tc, lc)
    kv = {}
    if getattr(args, "seed", None) is not None:
        kv["seed"] = args.seed
    if getattr(args, "epochs", None) is not None:
        kv["epochs"] = args.epochs
    if getattr(args, "width_mult", None) is not None:
        kv["width_multiplier"] = args.width_mult
    if getattr(args, "gamma", None):
        kv["gamma_kind"] = args.gamma
    if getattr(args, "window", None):
        kv["window_size"] = args.window
    if getattr(args, "stride", None):
        kv["window_stride"] = args.stride
    return configs_from_mapping(kv, tc, lc)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _cmd_fuse_classical(args):
    pair = load_pair(args.under, args.over)
    fused, wmap = fuse_exposures([pair.under, pair.over], ClassicalParams())
    out = _Outputs()
    out.add_image(args.out, fused)
    if args.weights_out:
        for i in range(wmap.shape[0]):
            out.add_image(f"{args.weights_out}_{i}.png", wmap[i])
    score = mef_ssim([pair.under, pair.over], fused, _score_spec(args))
    out.commit()
    print(f"mef_ssim={score.global_score:.6f}")
    return 0


def _cmd_fuse_learned(args):
    pair = load_pair(args.under, args.over)
    net = FusionNet.load(args.model)
    wmap = predict_weights(net, pair)
    fused = fuse_learned(net, pair)
    out = _Outputs()
    out.add_image(args.out, fused)
    if args.weights_out:
        for i in range(wmap.shape[0]):
            out.add_image(f"{args.weights_out}_{i}.png", wmap[i])
    score = mef_ssim([pair.under, pair.over], fused, _score_spec(args))
    out.commit()
    print(f"mef_ssim={score.global_score:.6f}")
    return 0


def _cmd_train(args):
    tc, lc = _train_configs(args)
    scenes = _load_scenes(args.data)
    corpus = [pair for _, pair, _ in scenes]
    train(corpus, tc, lc, out=args.out, log_stream=sys.stdout)
    return 0


def _cmd_eval(args):
    stack = [load_image(p) for p in args.stack]
    fused = load_image(args.fused)
    report = mef_ssim(stack, fused, _score_spec(args))
    out = _Outputs()
    if args.heatmap:
        out.add_image(args.heatmap, np.clip(report.scores, 0.0, 1.0))
    if args.csv:
        lines = ["anchor_row,anchor_col,score"]
        lines += [f"{r},{c},{s:.6f}" for r, c, s in report.iter_rows()]
        out.add_text(args.csv, "\n".join(lines) + "\n")
    out.commit()
    print(f"mef_ssim={report.global_score:.6f}")
    return 0


def _cmd_gamma_viz(args):
    pair = load_pair(args.under, args.over)
    spec = _loss_spec(args)
    kinds = [AttributeKind(args.gamma)] if args.gamma else list(AttributeKind)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    out = _Outputs()
    for kind in kinds:
        map_u, map_o = render_attribute_maps(pair, kind, spec)
        out.add_image(out_dir / f"{kind.value}_under.png", map_u)
        out.add_image(out_dir / f"{kind.value}_over.png", map_o)
    out.commit()
    print(f"wrote {2 * len(kinds)} attribute maps to {out_dir}")
    return 0


def _cmd_table1(args):
    scenes = _load_scenes(args.data)
    spec = _score_spec(args)
    params = ClassicalParams()
    variants = (("combined", ("wellexposedness", "histogram")),
                ("wellexposedness_only", ("wellexposedness",)),
                ("histogram_only", ("histogram",)))
    rows = []
    for name, _, images in scenes:
        scores = []
        for _, kinds in variants:
            fused, _ = fuse_exposures(images, params, kinds)
            scores.append(mef_ssim(images, fused, spec).global_score)
        rows.append((name, scores))
    lines = ["scene," + ",".join(v for v, _ in variants)]
    for name, scores in rows:
        lines.append(name + "," + ",".join(f"{s:.4f}" for s in scores))
    avg = np.mean([s for _, s in rows], axis=0)
    lines.append("average," + ",".join(f"{s:.4f}" for s in avg))
    csv_text = "\n".join(lines) + "\n"
    if args.csv:
        out = _Outputs()
        out.add_text(args.csv, csv_text)
        out.commit()
    print(csv_text, end="")
    return 0


def _cmd_table2(args):
    tc, lc = _train_configs(args)
    scenes = _load_scenes(args.data)
    corpus = [pair for _, pair, _ in scenes]
    names = [name for name, _, _ in scenes]
    configs = table_configs(window=lc.window, sigma_e=lc.sigma_e)
    table = evaluate_gamma_table(corpus, configs, tc, names=names)
    csv_text = table.to_csv()
    if args.csv:
        out = _Outputs()
        out.add_text(args.csv, csv_text)
        out.commit()
    print(csv_text, end="")
    return 0


def _cmd_dr(args):
    img = load_image(args.image)
    print(f"dr={dynamic_range(img):.6f}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_pair_args(p):
    p.add_argument("--under", required=True, help="first exposure image")
    p.add_argument("--over", required=True, help="second exposure image")


def _add_window_args(p):
    p.add_argument("--window", type=int, help="window size in pixels")
    p.add_argument("--stride", type=int, help="window stride in pixels")


def _add_train_args(p):
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--seed", type=int, help="run seed")
    p.add_argument("--epochs", type=int, help="training epochs")
    p.add_argument("--width-mult", type=float, help="channel width multiplier")
    p.add_argument("--gamma", choices=GAMMA_CHOICES, help="gamma attribute kind")
    p.add_argument("--deterministic", action="store_true",
                   help="force sequential, bit-reproducible execution")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hdrfuse",
                     description="Multi-exposure HDR fusion toolkit")
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("fuse-classical", help="adaptive-weight fusion of a pair")
    _add_pair_args(p)
    p.add_argument("--out", required=True, help="fused output image")
    p.add_argument("--weights-out", help="prefix for per-exposure weight PNGs")
    _add_window_args(p)
    p.set_defaults(func=_cmd_fuse_classical)

    p = sub.add_parser("fuse-learned", help="network weight-map fusion of a pair")
    _add_pair_args(p)
    p.add_argument("--model", required=True, help="checkpoint file")
    p.add_argument("--out", required=True, help="fused output image")
    p.add_argument("--weights-out", help="prefix for per-exposure weight PNGs")
    _add_window_args(p)
    p.set_defaults(func=_cmd_fuse_learned)

    p = sub.add_parser("train", help="train the weight-map network")
    p.add_argument("--data", required=True,
                   help="directory of scene subdirectories with under/over images")
    p.add_argument("--out", required=True, help="final checkpoint path")
    _add_train_args(p)
    _add_window_args(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="score a fused image against its stack")
    p.add_argument("--stack", nargs="+", required=True, help="exposure images")
    p.add_argument("--fused", required=True, help="fused image to score")
    p.add_argument("--heatmap", help="write per-window score map PNG")
    p.add_argument("--csv", help="write per-window scores CSV")
    _add_window_args(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("gamma-viz", help="render per-window attribute maps")
    _add_pair_args(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--gamma", choices=GAMMA_CHOICES,
                   help="single attribute kind (default: all six)")
    _add_window_args(p)
    p.set_defaults(func=_cmd_gamma_viz)

    p = sub.add_parser("table1", help="classical fusion ablation score table")
    p.add_argument("--data", required=True, help="directory of scenes")
    p.add_argument("--csv", help="write the score table CSV")
    _add_window_args(p)
    p.set_defaults(func=_cmd_table1)

    p = sub.add_parser("table2", help="gamma-kind training comparison table")
    p.add_argument("--data", required=True, help="directory of scenes")
    p.add_argument("--csv", help="write the score table CSV")
    _add_train_args(p)
    _add_window_args(p)
    p.set_defaults(func=_cmd_table2)

    p = sub.add_parser("dr", help="dynamic range of one image")
    p.add_argument("--image", required=True, help="input image")
    p.set_defaults(func=_cmd_dr)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            raise UsageError("hdrfuse: a command is required")
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        print("run 'hdrfuse --help' for usage", file=sys.stderr)
        return 1
    except (OSError, ImageFormatError, CheckpointError) as exc:
        print(f"hdrfuse: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, ArithmeticError) as exc:
        print(f"hdrfuse: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
