"""Optimization loop: Adam, step-decay schedule, checkpoint selection.

One epoch shuffles the training set (seeded), walks it in batches, builds
augmented branch views per image from a seed derived from (global seed,
epoch, image index), samples disjoint pairs per batch, and applies one
bias-corrected adaptive-moment update per batch. After every epoch the
validation set is scored with deterministic (eval-mode) preprocessing and
the float32-rounded parameter snapshot — exactly what a checkpoint would
store — so metrics recomputed after a save/load round trip match the trace
bit for bit. The checkpoint with the highest validation SRCC wins, earlier
epoch on ties.

Master parameters and gradient arithmetic are float64 throughout; only
checkpoint storage rounds to float32. Given equal (seed, config, data) two
runs produce bit-identical parameters and traces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .checkpoint import Checkpoint, config_fingerprint, save_checkpoint
from .data import ImageCache, LabeledSample, all_pairs, sample_pairs
from .errors import InvalidConfig, NonFiniteLoss, ShapeMismatch
from .loss import LossWeights
from .metrics import MetricsReport, compute_report
from .model import QualityModel, forward_backward, predict_batch
from .preprocess import PreprocessConfig, SampleMode, preprocess_triplet
from .seeding import (
    STREAM_AUGMENT,
    STREAM_BATCH_ORDER,
    STREAM_PAIRING,
    derive_seed,
    rng_for,
)

TRACE_HEADER = "epoch,lr,train_loss,val_srcc,val_plcc,val_krcc,val_rmse,val_mae"

_EVAL_CHUNK = 16


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer and schedule settings."""

    lr: float = 1e-5
    batch_size: int = 12
    epochs: int = 100
    decay_factor: float = 0.1
    decay_every: int = 10
    decay_once: bool = False
    weights: LossWeights = field(default_factory=LossWeights)
    seed: int = 0
    betas: tuple[float, float] = (0.9, 0.999)
    epsilon: float = 1e-8
    tie_eps: float = 0.0
    pairing: str = "disjoint"  # or "all"
    grad_clip: float | None = None

    def __post_init__(self):
        if self.lr <= 0:
            raise InvalidConfig(f"lr must be positive, got {self.lr}")
        if not 0.0 < self.decay_factor <= 1.0:
            raise InvalidConfig(f"decay_factor must be in (0, 1], got {self.decay_factor}")
        if self.batch_size < 2:
            raise InvalidConfig(f"batch_size must be >= 2, got {self.batch_size}")
        if self.epochs < 1:
            raise InvalidConfig(f"epochs must be >= 1, got {self.epochs}")
        if self.decay_every < 1:
            raise InvalidConfig(f"decay_every must be >= 1, got {self.decay_every}")
        if self.pairing not in ("disjoint", "all"):
            raise InvalidConfig(f"pairing must be 'disjoint' or 'all', got {self.pairing!r}")
        if not 0.0 <= self.betas[0] < 1.0 or not 0.0 <= self.betas[1] < 1.0:
            raise InvalidConfig(f"betas must be in [0, 1), got {self.betas}")


def lr_at(epoch: int, cfg: TrainConfig) -> float:
    """Learning rate for an epoch: base · factor^floor(epoch / every).

    With ``decay_once`` the factor is applied a single time after
    ``decay_every`` epochs instead of repeatedly.
    """
    if epoch < 0:
        raise InvalidConfig(f"epoch must be >= 0, got {epoch}")
    if cfg.decay_once:
        return cfg.lr * (cfg.decay_factor if epoch >= cfg.decay_every else 1.0)
    return cfg.lr * cfg.decay_factor ** (epoch // cfg.decay_every)


@dataclass
class AdamState:
    """Per-parameter first/second moments and the shared step count."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0


def init_adam_state(params: dict[str, np.ndarray]) -> AdamState:
    return AdamState(
        m={k: np.zeros_like(p) for k, p in params.items()},
        v={k: np.zeros_like(p) for k, p in params.items()},
    )


def optimizer_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
    betas: tuple[float, float] = (0.9, 0.999),
    epsilon: float = 1e-8,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One bias-corrected adaptive-moment update, in place.

    m ← β₁m + (1−β₁)g;  v ← β₂v + (1−β₂)g²;  with step count t the
    bias-corrected moments are m/(1−β₁ᵗ) and v/(1−β₂ᵗ), and the update is
    −lr · m̂ / (√v̂ + ε).
    """
    b1, b2 = betas
    state.step += 1
    t = state.step
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for k, p in params.items():
        g = grads[k]
        if g.shape != p.shape:
            raise ShapeMismatch(f"gradient shape {g.shape} != parameter shape {p.shape} for {k}")
        m = state.m[k]
        v = state.v[k]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + epsilon)
    return params, state


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    trace: list[dict]


def _global_grad_norm(grads: dict[str, np.ndarray]) -> float:
    return math.sqrt(sum(float((g * g).sum()) for g in grads.values()))


def predict_dataset(
    model: QualityModel,
    samples: list[LabeledSample],
    pre_cfg: PreprocessConfig,
    loader: ImageCache | None = None,
) -> np.ndarray:
    """Eval-mode (deterministic) predictions for every sample, in order."""
    loader = loader or ImageCache()
    preds = np.empty(len(samples))
    for start in range(0, len(samples), _EVAL_CHUNK):
        chunk = samples[start : start + _EVAL_CHUNK]
        inputs = [
            preprocess_triplet(loader.get(s.image_path), pre_cfg, SampleMode.EVAL)
            for s in chunk
        ]
        preds[start : start + len(chunk)] = predict_batch(model, inputs)
    return preds


def evaluate(
    model: QualityModel,
    samples: list[LabeledSample],
    pre_cfg: PreprocessConfig,
    loader: ImageCache | None = None,
) -> MetricsReport:
    """All five criteria on a dataset, eval-mode preprocessing.

    Degenerate correlations (constant predictions) surface as NaN fields in
    the report — RMSE and MAE are still computed.
    """
    if len(samples) < 2:
        raise InvalidConfig(f"need at least 2 samples to evaluate, got {len(samples)}")
    preds = predict_dataset(model, samples, pre_cfg, loader)
    labels = np.asarray([s.mos for s in samples])
    return compute_report(preds, labels)


def train(
    model: QualityModel,
    train_samples: list[LabeledSample],
    val_samples: list[LabeledSample],
    cfg: TrainConfig,
    pre_cfg: PreprocessConfig,
    loader: ImageCache | None = None,
    on_epoch=None,
) -> TrainResult:
    """Run the full optimization loop and return the best checkpoint + trace.

    Selection maximizes validation SRCC (ties resolved to the earlier
    epoch); if every epoch's SRCC is undefined the first epoch's snapshot is
    returned. Raises ``NonFiniteLoss`` before any non-finite value reaches
    the parameters.
    """
    if len(train_samples) < cfg.batch_size:
        raise InvalidConfig(
            f"training set ({len(train_samples)}) smaller than batch_size ({cfg.batch_size})"
        )
    if len(val_samples) < 2:
        raise InvalidConfig(f"validation set must have >= 2 samples, got {len(val_samples)}")
    loader = loader or ImageCache()
    fingerprint = config_fingerprint(cfg, pre_cfg, model.spec)
    state = init_adam_state(model.params)
    n = len(train_samples)
    trace: list[dict] = []
    best: tuple[float, int, QualityModel, MetricsReport] | None = None
    fallback: tuple[int, QualityModel, MetricsReport] | None = None

    for epoch in range(cfg.epochs):
        lr = lr_at(epoch, cfg)
        order = rng_for(cfg.seed, STREAM_BATCH_ORDER, epoch).permutation(n)
        losses: list[float] = []
        for batch_index, start in enumerate(range(0, n, cfg.batch_size)):
            chunk = order[start : start + cfg.batch_size]
            if len(chunk) < 2:
                continue  # cannot form a pair; skip the remainder
            batch = []
            for sample_idx in chunk:
                s = train_samples[int(sample_idx)]
                aug_seed = derive_seed(cfg.seed, STREAM_AUGMENT, epoch, int(sample_idx))
                views = preprocess_triplet(
                    loader.get(s.image_path), pre_cfg, SampleMode.TRAIN, aug_seed
                )
                batch.append((views, s.mos))
            if cfg.pairing == "all":
                pairs = all_pairs(range(len(batch)))
            else:
                pairs = sample_pairs(
                    range(len(batch)), derive_seed(cfg.seed, STREAM_PAIRING, epoch, batch_index)
                )
            loss, grads = forward_backward(model, batch, cfg.weights, pairs, cfg.tie_eps)
            if not math.isfinite(loss) or any(
                not np.isfinite(g).all() for g in grads.values()
            ):
                raise NonFiniteLoss(
                    f"non-finite loss or gradient at epoch {epoch}, batch {batch_index}",
                    epoch=epoch,
                    batch_index=batch_index,
                )
            if cfg.grad_clip is not None:
                norm = _global_grad_norm(grads)
                if norm > cfg.grad_clip:
                    scale = cfg.grad_clip / norm
                    for g in grads.values():
                        g *= scale
            optimizer_step(model.params, grads, state, lr, cfg.betas, cfg.epsilon)
            losses.append(loss)

        snapshot = model.float32_snapshot()
        report = evaluate(snapshot, val_samples, pre_cfg, loader)
        row = {
            "epoch": epoch,
            "lr": lr,
            "train_loss": float(np.mean(losses)) if losses else float("nan"),
            "val_srcc": report.srcc,
            "val_plcc": report.plcc,
            "val_krcc": report.krcc,
            "val_rmse": report.rmse,
            "val_mae": report.mae,
        }
        trace.append(row)
        if fallback is None:
            fallback = (epoch, snapshot, report)
        if not math.isnan(report.srcc) and (best is None or report.srcc > best[0]):
            best = (report.srcc, epoch, snapshot, report)
        if on_epoch is not None:
            on_epoch(row)

    if best is not None:
        _, best_epoch, best_model, best_report = best
    else:
        best_epoch, best_model, best_report = fallback
    ckpt = Checkpoint(
        model=best_model,
        preprocess=pre_cfg,
        epoch=best_epoch,
        val_metrics=best_report,
        fingerprint=fingerprint,
    )
    return TrainResult(checkpoint=ckpt, trace=trace)


def format_trace_row(row: dict) -> str:
    vals = [str(row["epoch"])] + [
        f"{row[k]:.17g}"
        for k in ("lr", "train_loss", "val_srcc", "val_plcc", "val_krcc", "val_rmse", "val_mae")
    ]
    return ",".join(vals)


def write_trace(trace: list[dict], path: str | Path) -> None:
    lines = [TRACE_HEADER] + [format_trace_row(r) for r in trace]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def save_result(result: TrainResult, out_dir: str | Path) -> dict[str, Path]:
    """Write checkpoint + trace into ``out_dir``; returns the file map."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "checkpoint": out / "checkpoint.ckpt",
        "trace": out / "trace.csv",
    }
    save_checkpoint(result.checkpoint, paths["checkpoint"])
    write_trace(result.trace, paths["trace"])
    return paths


__all__ = [
    "TrainConfig",
    "AdamState",
    "TrainResult",
    "lr_at",
    "init_adam_state",
    "optimizer_step",
    "train",
    "evaluate",
    "predict_dataset",
    "write_trace",
    "format_trace_row",
    "save_result",
    "TRACE_HEADER",
    "Checkpoint",
]
