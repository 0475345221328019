"""Flat key = value experiment configuration.

One option per line, ``#`` comments, a mandatory ``version`` key. Unknown
keys are rejected so typos fail loudly. Command-line flags override file
values; :func:`dump_config` writes the merged effective configuration back
out in a form that reproduces the run exactly.
"""

from __future__ import annotations

from pathlib import Path

from .errors import InvalidConfig
from .loss import LossWeights
from .model import (
    BRANCHES,
    DEFAULT_HEAD_HIDDEN,
    DEFAULT_NORM_MEAN,
    DEFAULT_NORM_STD,
    FeatureExtractorSpec,
)
from .preprocess import PreprocessConfig
from .train import TrainConfig

CONFIG_VERSION = 1


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "1", "yes", "on"):
        return True
    if t in ("false", "0", "no", "off"):
        return False
    raise InvalidConfig(f"cannot parse boolean from {text!r}")


def _parse_branches(text: str) -> tuple[str, ...]:
    names = tuple(p.strip() for p in text.split(",") if p.strip())
    bad = set(names) - set(BRANCHES)
    if bad:
        raise InvalidConfig(f"unknown branches {sorted(bad)}; valid: {BRANCHES}")
    return names


def _parse_triple(text: str) -> tuple[float, float, float]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise InvalidConfig(f"expected three comma-separated values, got {text!r}")
    return tuple(float(p) for p in parts)  # type: ignore[return-value]


def _parse_optional_float(text: str):
    return None if text.strip().lower() in ("none", "") else float(text)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(_fmt(v) for v in value)
    if value is None:
        return "none"
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


# key -> (parser, default)
SCHEMA: dict[str, tuple] = {
    "version": (int, CONFIG_VERSION),
    # preprocess geometry
    "min_side_resize": (int, 512),
    "view_size": (int, 480),
    "grid_n": (int, 15),
    "mini_patch": (int, 32),
    "salient_size": (int, 480),
    # extractor architecture
    "patch_size": (int, 16),
    "embed_dim": (int, 64),
    "blocks": (int, 2),
    "heads": (int, 2),
    "mlp_ratio": (float, 2.0),
    "pos_embed": (_parse_bool, True),
    # model assembly
    "branches": (_parse_branches, BRANCHES),
    "head_hidden": (int, DEFAULT_HEAD_HIDDEN),
    "norm_mean": (_parse_triple, DEFAULT_NORM_MEAN),
    "norm_std": (_parse_triple, DEFAULT_NORM_STD),
    # optimization
    "lr": (float, 1e-5),
    "batch_size": (int, 12),
    "epochs": (int, 100),
    "decay_factor": (float, 0.1),
    "decay_every": (int, 10),
    "decay_once": (_parse_bool, False),
    "alpha": (float, 1.0),
    "beta": (float, 0.1),
    "tie_eps": (float, 0.0),
    "pairing": (str, "disjoint"),
    "grad_clip": (_parse_optional_float, None),
    "seed": (int, 0),
    # data
    "train_fraction": (float, 0.8),
    "labels_csv": (str, ""),
    "data_root": (str, ""),
    "out_dir": (str, "out"),
}


def default_config() -> dict:
    return {k: default for k, (_, default) in SCHEMA.items()}


def parse_config_text(text: str) -> dict:
    """Parse config file text into a (partial) key/value dict."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidConfig(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in SCHEMA:
            raise InvalidConfig(f"line {lineno}: unknown config key {key!r}")
        parser, _ = SCHEMA[key]
        try:
            values[key] = parser(val)
        except InvalidConfig:
            raise
        except (ValueError, TypeError) as exc:
            raise InvalidConfig(f"line {lineno}: bad value for {key!r}: {exc}") from exc
    return values


def load_config(path: str | Path | None, overrides: dict | None = None) -> dict:
    """Defaults <- file <- overrides, then validate the merged result."""
    cfg = default_config()
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except FileNotFoundError as exc:
            raise InvalidConfig(f"config file not found: {path}") from exc
        cfg.update(parse_config_text(text))
    if overrides:
        unknown = set(overrides) - set(SCHEMA)
        if unknown:
            raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
        cfg.update({k: v for k, v in overrides.items() if v is not None})
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    if cfg["version"] != CONFIG_VERSION:
        raise InvalidConfig(f"unsupported config version {cfg['version']}")
    if cfg["alpha"] + cfg["beta"] <= 0:
        raise InvalidConfig("alpha + beta must be positive for training")
    # Component constructors enforce their own invariants.
    build_preprocess(cfg)
    build_extractor_spec(cfg)
    build_train_config(cfg)


def dump_config(cfg: dict) -> str:
    lines = [f"{k} = {_fmt(cfg[k])}" for k in SCHEMA]
    return "\n".join(lines) + "\n"


def build_preprocess(cfg: dict) -> PreprocessConfig:
    return PreprocessConfig(
        min_side_resize=cfg["min_side_resize"],
        view_size=cfg["view_size"],
        grid_n=cfg["grid_n"],
        mini_patch=cfg["mini_patch"],
        salient_size=cfg["salient_size"],
    )


def build_extractor_spec(cfg: dict) -> FeatureExtractorSpec:
    return FeatureExtractorSpec(
        patch_size=cfg["patch_size"],
        embed_dim=cfg["embed_dim"],
        blocks=cfg["blocks"],
        heads=cfg["heads"],
        mlp_ratio=cfg["mlp_ratio"],
        pos_embed=cfg["pos_embed"],
    )


def build_train_config(cfg: dict) -> TrainConfig:
    return TrainConfig(
        lr=cfg["lr"],
        batch_size=cfg["batch_size"],
        epochs=cfg["epochs"],
        decay_factor=cfg["decay_factor"],
        decay_every=cfg["decay_every"],
        decay_once=cfg["decay_once"],
        weights=LossWeights(alpha=cfg["alpha"], beta=cfg["beta"]),
        seed=cfg["seed"],
        tie_eps=cfg["tie_eps"],
        pairing=cfg["pairing"],
        grad_clip=cfg["grad_clip"],
    )
