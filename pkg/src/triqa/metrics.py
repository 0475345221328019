"""Evaluation criteria: SRCC, PLCC, KRCC, RMSE, MAE.

Rank correlations are tie-aware: SRCC is the Pearson correlation of
average ranks, KRCC is Kendall's tau-b. Correlations on a constant vector
raise :class:`UndefinedCorrelation` instead of silently returning 0, since
a constant prediction vector usually means a degenerate model.

PLCC is computed on the raw scores with no nonlinear remapping; predicted
and ground-truth scores share the [0, 1] scale here, so the four-parameter
logistic fit some evaluation protocols apply is intentionally omitted.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np
import scipy.stats

from .errors import LengthMismatch, UndefinedCorrelation

CSV_HEADER = "srcc,plcc,krcc,rmse,mae"


@dataclass(frozen=True)
class MetricsReport:
    """The five criteria for one prediction/label set.

    Correlation fields are NaN when the corresponding statistic was
    undefined (constant input); ``degenerate`` names those fields.
    """

    srcc: float
    plcc: float
    krcc: float
    rmse: float
    mae: float
    degenerate: tuple[str, ...] = ()

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            if f.name == "degenerate":
                continue
            lines.append(f"{f.name} = {getattr(self, f.name):.6f}")
        return "\n".join(lines)

    def to_csv_row(self) -> str:
        return ",".join(
            f"{getattr(self, name):.17g}" for name in ("srcc", "plcc", "krcc", "rmse", "mae")
        )


def _validate_pair(predictions, labels, min_n: int) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(predictions, dtype=np.float64).ravel()
    y = np.asarray(labels, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise LengthMismatch(f"predictions and labels differ in length: {x.shape} vs {y.shape}")
    if x.size < min_n:
        raise UndefinedCorrelation(f"need at least {min_n} samples, got {x.size}")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise UndefinedCorrelation("non-finite values in predictions or labels")
    return x, y


def _is_constant(v: np.ndarray) -> bool:
    return bool(np.all(v == v[0]))


def average_ranks(values) -> np.ndarray:
    """1-based ranks; tied values share the mean of their occupied positions."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        return np.empty(0)
    return scipy.stats.rankdata(v, method="average")


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    if _is_constant(x) or _is_constant(y):
        raise UndefinedCorrelation("correlation undefined for a constant vector")
    xc = x - x.mean()
    yc = y - y.mean()
    denom = np.sqrt((xc * xc).sum() * (yc * yc).sum())
    if denom == 0.0:
        raise UndefinedCorrelation("zero variance after centering")
    return float((xc * yc).sum() / denom)


def plcc(predictions, labels) -> float:
    """Pearson linear correlation on raw values."""
    x, y = _validate_pair(predictions, labels, min_n=2)
    return _pearson(x, y)


def srcc(predictions, labels) -> float:
    """Spearman rank correlation: Pearson correlation of average ranks."""
    x, y = _validate_pair(predictions, labels, min_n=2)
    return _pearson(average_ranks(x), average_ranks(y))


def krcc(predictions, labels) -> float:
    """Kendall rank correlation, tau-b (tie-corrected) variant."""
    x, y = _validate_pair(predictions, labels, min_n=2)
    if _is_constant(x) or _is_constant(y):
        raise UndefinedCorrelation("tau-b undefined when one vector is entirely tied")
    res = scipy.stats.kendalltau(x, y, variant="b")
    return float(res.statistic)


def rmse(predictions, labels) -> float:
    x, y = _validate_pair(predictions, labels, min_n=1)
    return float(np.sqrt(np.mean((x - y) ** 2)))


def mae(predictions, labels) -> float:
    x, y = _validate_pair(predictions, labels, min_n=1)
    return float(np.mean(np.abs(x - y)))


def compute_report(predictions, labels) -> MetricsReport:
    """All five criteria; degenerate correlations become NaN fields.

    RMSE and MAE are always defined and always reported.
    """
    values: dict[str, float] = {}
    degenerate: list[str] = []
    for name, fn in (("srcc", srcc), ("plcc", plcc), ("krcc", krcc)):
        try:
            values[name] = fn(predictions, labels)
        except UndefinedCorrelation:
            values[name] = float("nan")
            degenerate.append(name)
    return MetricsReport(
        srcc=values["srcc"],
        plcc=values["plcc"],
        krcc=values["krcc"],
        rmse=rmse(predictions, labels),
        mae=mae(predictions, labels),
        degenerate=tuple(degenerate),
    )
