"""Self-describing, byte-deterministic checkpoint container.

Layout::

    8 bytes   magic ``TRIQCKP1``
    8 bytes   header length, little-endian uint64
    N bytes   canonical JSON header (sorted keys, no whitespace)
    ...       tensor payloads, little-endian float32, row-major, in header order

The header records the format version, extractor architecture, preprocess
geometry, branch list, normalization constants, the epoch and validation
metrics of the stored snapshot, a fingerprint of the producing
configuration, and the name/shape/dtype of every tensor. Parameters are
stored in 32-bit precision (training accumulates in 64-bit); loading casts
back to float64.

Identical inputs produce identical bytes: there are no timestamps and the
JSON key order is canonical.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CheckpointError
from .metrics import MetricsReport
from .model import FeatureExtractorSpec, QualityModel
from .preprocess import PreprocessConfig

MAGIC = b"TRIQCKP1"
FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    """A trained-model snapshot plus the context needed to reuse it."""

    model: QualityModel
    preprocess: PreprocessConfig
    epoch: int
    val_metrics: MetricsReport | None
    fingerprint: str


def _canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_fingerprint(*configs) -> str:
    """sha256 over the canonical JSON of dataclass configs (order-sensitive)."""
    payload = []
    for c in configs:
        d = dataclasses.asdict(c) if dataclasses.is_dataclass(c) else c
        payload.append({type(c).__name__: _jsonable(d)})
    return hashlib.sha256(_canonical_json(payload).encode("utf-8")).hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        obj = obj.item()
    if isinstance(obj, float) and math.isnan(obj):
        return None
    if hasattr(obj, "value") and not isinstance(obj, (int, float, str, bool)):
        return obj.value  # enums
    return obj


def _metrics_to_header(m: MetricsReport | None):
    if m is None:
        return None
    return {
        "srcc": _nan_to_none(m.srcc),
        "plcc": _nan_to_none(m.plcc),
        "krcc": _nan_to_none(m.krcc),
        "rmse": m.rmse,
        "mae": m.mae,
        "degenerate": list(m.degenerate),
    }


def _metrics_from_header(d) -> MetricsReport | None:
    if d is None:
        return None
    nan = float("nan")
    return MetricsReport(
        srcc=d["srcc"] if d["srcc"] is not None else nan,
        plcc=d["plcc"] if d["plcc"] is not None else nan,
        krcc=d["krcc"] if d["krcc"] is not None else nan,
        rmse=d["rmse"],
        mae=d["mae"],
        degenerate=tuple(d.get("degenerate", ())),
    )


def _nan_to_none(x: float):
    return None if math.isnan(x) else x


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> None:
    model = ckpt.model
    tensors = [(name, arr.astype("<f4")) for name, arr in model.params.items()]
    header = {
        "format_version": FORMAT_VERSION,
        "extractor_spec": dataclasses.asdict(model.spec),
        "preprocess": dataclasses.asdict(ckpt.preprocess),
        "view_size": model.view_size,
        "branches": list(model.branches),
        "head_hidden": model.head_hidden,
        "norm_mean": model.norm_mean.tolist(),
        "norm_std": model.norm_std.tolist(),
        "epoch": ckpt.epoch,
        "val_metrics": _metrics_to_header(ckpt.val_metrics),
        "fingerprint": ckpt.fingerprint,
        "tensors": [
            {"name": name, "shape": list(arr.shape), "dtype": "<f4"} for name, arr in tensors
        ],
    }
    header_bytes = _canonical_json(header).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(header_bytes)))
        f.write(header_bytes)
        for _, arr in tensors:
            f.write(np.ascontiguousarray(arr).tobytes())


def load_checkpoint(path: str | Path) -> Checkpoint:
    try:
        blob = Path(path).read_bytes()
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        raise CheckpointError(f"cannot read checkpoint: {path}") from exc
    if len(blob) < len(MAGIC) + 8 or blob[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"not a checkpoint file: {path}")
    (header_len,) = struct.unpack("<Q", blob[len(MAGIC) : len(MAGIC) + 8])
    start = len(MAGIC) + 8
    try:
        header = json.loads(blob[start : start + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint header in {path}") from exc
    if header.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint format version {header.get('format_version')}"
        )

    offset = start + header_len
    params: dict[str, np.ndarray] = {}
    for t in header["tensors"]:
        if t["dtype"] != "<f4":
            raise CheckpointError(f"unsupported tensor dtype {t['dtype']}")
        shape = tuple(t["shape"])
        nbytes = int(np.prod(shape, dtype=np.int64)) * 4 if shape else 4
        raw = blob[offset : offset + nbytes]
        if len(raw) != nbytes:
            raise CheckpointError(f"truncated checkpoint: tensor {t['name']} incomplete")
        params[t["name"]] = (
            np.frombuffer(raw, dtype="<f4").reshape(shape).astype(np.float64)
        )
        offset += nbytes
    if offset != len(blob):
        raise CheckpointError(f"trailing bytes in checkpoint {path}")

    spec = FeatureExtractorSpec(**header["extractor_spec"])
    model = QualityModel(
        spec=spec,
        view_size=header["view_size"],
        branches=tuple(header["branches"]),
        params=params,
        norm_mean=np.asarray(header["norm_mean"], dtype=np.float64),
        norm_std=np.asarray(header["norm_std"], dtype=np.float64),
        head_hidden=header["head_hidden"],
    )
    return Checkpoint(
        model=model,
        preprocess=PreprocessConfig(**header["preprocess"]),
        epoch=header["epoch"],
        val_metrics=_metrics_from_header(header["val_metrics"]),
        fingerprint=header["fingerprint"],
    )
