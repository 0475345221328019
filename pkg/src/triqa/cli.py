"""Command-line interface.

Commands: ``score``, ``train``, ``eval``, ``preprocess-dump``, ``macs``,
``synth``. Exit codes: 0 success, 1 partial/data failure, 2 usage or config
error, 3 numerical failure during training. All machine-readable output is
CSV with headers; all randomness flows from the single ``seed`` value.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import config as cfgmod
from .checkpoint import load_checkpoint
from .complexity import macs_estimate, macs_vs_resolution
from .data import (
    DistortionKind,
    SplitSpec,
    generate_synthetic_dataset,
    load_labels,
    save_labels,
    split,
)
from .errors import (
    CellTooSmall,
    DecodeError,
    ImageTooSmall,
    InvalidConfig,
    InvalidGrid,
    NonFiniteLoss,
    OutOfBounds,
    TriqaError,
    UnsupportedFormat,
)
from .imaging import decode_image, to_uint8, write_png
from .metrics import CSV_HEADER
from .model import init_model, predict_quality
from .preprocess import SampleMode, preprocess_triplet
from .train import evaluate, save_result, train

EXIT_OK = 0
EXIT_DATA = 1
EXIT_USAGE = 2
EXIT_NUMERIC = 3

_KIND_NAMES = {k.value: k for k in DistortionKind}

# Failures caused by the input data (exit 1) rather than by usage (exit 2).
_DATA_ERRORS = (
    DecodeError,
    UnsupportedFormat,
    ImageTooSmall,
    CellTooSmall,
    InvalidGrid,
    OutOfBounds,
)


def _config_overrides(args: argparse.Namespace) -> dict:
    """Collect --key overrides that map 1:1 onto config keys."""
    overrides = {}
    for key in cfgmod.SCHEMA:
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = val
    return overrides


def _add_config_flags(p: argparse.ArgumentParser, keys: tuple[str, ...]) -> None:
    for key in keys:
        parser_fn, _ = cfgmod.SCHEMA[key]
        flag = "--" + key.replace("_", "-")
        if parser_fn is int:
            p.add_argument(flag, dest=key, type=int)
        elif parser_fn is float:
            p.add_argument(flag, dest=key, type=float)
        elif parser_fn is str:
            p.add_argument(flag, dest=key, type=str)
        else:
            p.add_argument(flag, dest=key, type=parser_fn)


_TRAIN_KEYS = tuple(k for k in cfgmod.SCHEMA if k != "version")
_GEOMETRY_KEYS = ("min_side_resize", "view_size", "grid_n", "mini_patch", "salient_size")
_ARCH_KEYS = ("patch_size", "embed_dim", "blocks", "heads", "mlp_ratio", "pos_embed",
              "branches", "head_hidden")


def cmd_train(args: argparse.Namespace) -> int:
    cfg = cfgmod.load_config(args.config, _config_overrides(args))
    if not cfg["labels_csv"]:
        raise InvalidConfig("labels_csv is required (flag --labels-csv or config key)")
    samples = load_labels(cfg["labels_csv"], root=cfg["data_root"] or None)
    if len(samples) < 2:
        raise cfgmod.InvalidConfig("need at least 2 labeled samples to train")
    train_set, val_set = split(samples, SplitSpec(cfg["train_fraction"], seed=cfg["seed"]))

    pre = cfgmod.build_preprocess(cfg)
    spec = cfgmod.build_extractor_spec(cfg)
    tcfg = cfgmod.build_train_config(cfg)
    model = init_model(
        spec,
        view_size=pre.view_size,
        branches=cfg["branches"],
        head_hidden=cfg["head_hidden"],
        norm_mean=cfg["norm_mean"],
        norm_std=cfg["norm_std"],
        seed=cfg["seed"],
    )

    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)

    def on_epoch(row):
        print(
            f"epoch {row['epoch']:3d}  lr {row['lr']:.3g}  "
            f"loss {row['train_loss']:.5f}  val_srcc {row['val_srcc']:.4f}"
        )

    try:
        result = train(model, train_set, val_set, tcfg, pre, on_epoch=on_epoch)
    except NonFiniteLoss as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    paths = save_result(result, out_dir)
    (out_dir / "config.txt").write_text(cfgmod.dump_config(cfg), encoding="utf-8")
    save_labels(train_set, out_dir / "train_split.csv", root=out_dir)
    save_labels(val_set, out_dir / "val_split.csv", root=out_dir)
    best = result.checkpoint
    print(f"best epoch {best.epoch}  val_srcc {best.val_metrics.srcc:.6f}")
    print(f"checkpoint: {paths['checkpoint']}")
    print(f"trace: {paths['trace']}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    samples = load_labels(args.labels, root=args.root)
    if len(samples) < 2:
        print("error: label file has fewer than 2 rows", file=sys.stderr)
        return EXIT_USAGE
    report = evaluate(ckpt.model, samples, ckpt.preprocess)
    if args.format == "csv":
        print(CSV_HEADER)
        print(report.to_csv_row())
    else:
        print(report.to_text())
    if args.out_csv:
        Path(args.out_csv).write_text(
            CSV_HEADER + "\n" + report.to_csv_row() + "\n", encoding="utf-8"
        )
    return EXIT_OK


def cmd_score(args: argparse.Namespace) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    failed = 0
    for path in args.images:
        try:
            img = decode_image(path)
            views = preprocess_triplet(img, ckpt.preprocess, SampleMode.EVAL)
            score = predict_quality(ckpt.model, views)
        except TriqaError as exc:
            print(f"error: {path}: {exc}", file=sys.stderr)
            failed += 1
            continue
        print(f"{path},{score:.17g}")
    return EXIT_DATA if failed else EXIT_OK


def cmd_preprocess_dump(args: argparse.Namespace) -> int:
    cfg = cfgmod.load_config(args.config, _config_overrides(args))
    pre = cfgmod.build_preprocess(cfg)
    mode = SampleMode.TRAIN if args.mode == "train" else SampleMode.EVAL
    try:
        img = decode_image(args.image)
        views = preprocess_triplet(img, pre, mode, seed=cfg["seed"])
    except _DATA_ERRORS as exc:
        print(f"error: {args.image}: {exc}", file=sys.stderr)
        return EXIT_DATA
    stem = Path(args.image).stem
    out_dir = Path(args.out_dir) if args.out_dir else Path(args.image).parent
    out_dir.mkdir(parents=True, exist_ok=True)
    # All three views exist before anything is written: no partial output.
    for name, view in (
        ("aesthetic", views.aesthetic),
        ("fragment", views.fragment),
        ("salient", views.salient),
    ):
        write_png(to_uint8(view), out_dir / f"{stem}.{name}.png")
        print(out_dir / f"{stem}.{name}.png")
    return EXIT_OK


def cmd_macs(args: argparse.Namespace) -> int:
    cfg = cfgmod.load_config(args.config, _config_overrides(args))
    pre = cfgmod.build_preprocess(cfg)
    spec = cfgmod.build_extractor_spec(cfg)
    breakdown = macs_estimate(spec, pre, cfg["branches"], cfg["head_hidden"])
    print(f"view {pre.view_size}x{pre.view_size}, {spec.tokens(pre.view_size)} tokens/branch")
    for name, count in breakdown.per_branch:
        print(f"branch {name}: {count:,} MACs")
    print(f"head: {breakdown.head:,} MACs")
    print(f"total: {breakdown.total:,} MACs ({breakdown.total / 1e9:.4f} G)")
    if args.resolutions:
        resolutions = []
        for spec_text in args.resolutions.split(","):
            h, _, w = spec_text.strip().partition("x")
            resolutions.append((int(h), int(w)))
        rows = macs_vs_resolution(spec, pre, resolutions, cfg["branches"], cfg["head_hidden"])
        csv_lines = ["height,width,pipeline_macs,fullres_macs"]
        csv_lines += [
            f"{r['height']},{r['width']},{r['pipeline_macs']},{r['fullres_macs']}" for r in rows
        ]
        print("\n".join(csv_lines))
        if args.out_csv:
            Path(args.out_csv).write_text("\n".join(csv_lines) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    kinds = tuple(_KIND_NAMES[k.strip()] for k in args.kinds.split(",") if k.strip())
    try:
        samples = generate_synthetic_dataset(
            args.out,
            count=args.count,
            seed=args.seed,
            height=args.height,
            width=args.width,
            kinds=kinds,
            severity_range=(args.severity_min, args.severity_max),
            grain_amp=args.grain,
        )
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    print(f"wrote {len(samples)} images + labels.csv under {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="triqa",
        description="Efficient no-reference quality assessment for UHD images "
        "via three low-resolution views.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a labels CSV")
    p.add_argument("--config", type=str, default=None, help="key = value config file")
    _add_config_flags(p, _TRAIN_KEYS)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint against a labels CSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--root", default=None)
    p.add_argument("--format", choices=("text", "csv"), default="text")
    p.add_argument("--out-csv", default=None)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("score", help="print one 'path,score' line per image")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("images", nargs="+")
    p.set_defaults(fn=cmd_score)

    p = sub.add_parser("preprocess-dump", help="write the three branch views as PNGs")
    p.add_argument("--image", required=True)
    p.add_argument("--out-dir", default=None)
    p.add_argument("--mode", choices=("train", "eval"), default="eval")
    p.add_argument("--config", type=str, default=None)
    _add_config_flags(p, _GEOMETRY_KEYS + ("seed",))
    p.set_defaults(fn=cmd_preprocess_dump)

    p = sub.add_parser("macs", help="analytic multiply-accumulate counts")
    p.add_argument("--config", type=str, default=None)
    p.add_argument("--resolutions", default=None, help="e.g. 2160x3840,2880x5120")
    p.add_argument("--out-csv", default=None)
    _add_config_flags(p, _GEOMETRY_KEYS + _ARCH_KEYS)
    p.set_defaults(fn=cmd_macs)

    p = sub.add_parser("synth", help="generate a synthetic distorted dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--height", type=int, default=320)
    p.add_argument("--width", type=int, default=320)
    p.add_argument("--kinds", default="blur,noise", help="comma list: blur,noise,jpeg")
    p.add_argument("--severity-min", type=float, default=0.0)
    p.add_argument("--severity-max", type=float, default=1.0)
    p.add_argument("--grain", type=float, default=0.0)
    p.set_defaults(fn=cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except NonFiniteLoss as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except TriqaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
