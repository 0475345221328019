"""Dataset ingestion, splitting, pair sampling, and synthetic data.

The label format is a CSV with header ``filename,mos``: one image per row,
paths resolved against a root directory, scores in [0, 1]. The synthetic
generator produces layered random content (smooth color fields plus
band-limited texture plus optional fine grain), degrades it with a
parameterized distortion, and assigns the linear pseudo-score
``1 - severity`` — a known monotone ground truth against which rank
learning is verifiable.
"""

from __future__ import annotations

import csv
import enum
import warnings
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.ndimage

from .errors import DegenerateBatch, InvalidConfig, MissingFile, ParseError, RangeError
from .imaging import decode_image, encode_jpeg, resize_bilinear, to_float, write_png
from .seeding import (
    STREAM_PAIRING,
    STREAM_SPLIT,
    STREAM_SYNTH_CONTENT,
    STREAM_SYNTH_DISTORT,
    rng_for,
)

LABELS_HEADER = ("filename", "mos")

# Severity-to-strength maps: blur sigma in pixels, noise standard deviation
# in [0,1] units, JPEG quality factor.
BLUR_SIGMA_MAX = 8.0
NOISE_STD_MAX = 0.25
JPEG_QUALITY_RANGE = (100, 10)


@dataclass(frozen=True)
class LabeledSample:
    """One image path with its ground-truth quality score."""

    image_path: Path
    mos: float


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise InvalidConfig(f"train_fraction must be in (0, 1), got {self.train_fraction}")


class DistortionKind(enum.Enum):
    GAUSSIAN_BLUR = "blur"
    GAUSSIAN_NOISE = "noise"
    JPEG_LIKE = "jpeg"


@dataclass(frozen=True)
class DistortionRecipe:
    kind: DistortionKind
    severity: float

    def __post_init__(self):
        if not 0.0 <= self.severity <= 1.0:
            raise InvalidConfig(f"severity must be in [0, 1], got {self.severity}")


def load_labels(
    csv_path: str | Path,
    root: str | Path | None = None,
    allow_any_range: bool = False,
    require_files: bool = True,
) -> list[LabeledSample]:
    """Parse a ``filename,mos`` CSV into samples, in file order.

    Paths are resolved against ``root`` (default: the CSV's directory).
    Raises ``ParseError`` with the offending row number on malformed rows,
    ``RangeError`` for scores outside [0, 1] unless ``allow_any_range``, and
    ``MissingFile`` listing every absent image when ``require_files``.
    """
    csv_path = Path(csv_path)
    base = Path(root) if root is not None else csv_path.parent
    try:
        text = csv_path.read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise MissingFile(f"label file not found: {csv_path}") from exc

    reader = csv.reader(text.splitlines())
    rows = list(reader)
    if not rows:
        raise ParseError("empty label file (missing header)")
    header = tuple(h.strip() for h in rows[0])
    if header != LABELS_HEADER:
        raise ParseError(f"expected header {','.join(LABELS_HEADER)!r}, got {','.join(header)!r}")

    samples: list[LabeledSample] = []
    for i, row in enumerate(rows[1:], start=1):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 2:
            raise ParseError(f"expected 2 fields, got {len(row)}", row=i)
        name, mos_text = row[0].strip(), row[1].strip()
        if not name:
            raise ParseError("empty filename", row=i)
        try:
            mos = float(mos_text)
        except ValueError:
            raise ParseError(f"cannot parse mos value {mos_text!r}", row=i) from None
        if not np.isfinite(mos):
            raise ParseError(f"non-finite mos value {mos_text!r}", row=i)
        if not allow_any_range and not 0.0 <= mos <= 1.0:
            raise RangeError(f"row {i}: mos {mos} outside [0, 1]")
        samples.append(LabeledSample(image_path=base / name, mos=mos))

    if not samples:
        warnings.warn(f"label file {csv_path} contains a header but no rows", stacklevel=2)
    if require_files:
        missing = [str(s.image_path) for s in samples if not s.image_path.exists()]
        if missing:
            raise MissingFile(f"{len(missing)} image file(s) missing: {', '.join(missing[:5])}"
                              + ("..." if len(missing) > 5 else ""))
    return samples


def save_labels(samples: list[LabeledSample], csv_path: str | Path, root: str | Path | None = None) -> None:
    """Write samples as a ``filename,mos`` CSV, paths relative to ``root``.

    Scores are written with ``repr`` precision so a load round-trips exactly.
    """
    csv_path = Path(csv_path)
    base = Path(root) if root is not None else csv_path.parent
    lines = [",".join(LABELS_HEADER)]
    for s in samples:
        try:
            rel = Path(s.image_path).relative_to(base)
        except ValueError:
            # not under the root: store an absolute path so the CSV loads
            # correctly regardless of where it is read from
            rel = Path(s.image_path).resolve()
        lines.append(f"{rel.as_posix()},{s.mos!r}")
    csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def split(samples: list[LabeledSample], spec: SplitSpec) -> tuple[list[LabeledSample], list[LabeledSample]]:
    """Deterministic shuffled partition; first floor(n·fraction) go to train."""
    n = len(samples)
    if n < 2:
        raise InvalidConfig(f"need at least 2 samples to split, got {n}")
    perm = rng_for(spec.seed, STREAM_SPLIT).permutation(n)
    n_train = int(np.floor(n * spec.train_fraction))
    train = [samples[i] for i in perm[:n_train]]
    val = [samples[i] for i in perm[n_train:]]
    return train, val


def sample_pairs(batch_indices, seed: int) -> list[tuple[int, int]]:
    """Random disjoint pairing of a batch: shuffle, then take adjacent pairs.

    Every element appears in at most one pair; an odd leftover is dropped.
    Self-pairs are impossible by construction.
    """
    idx = list(batch_indices)
    if len(idx) < 2:
        raise DegenerateBatch(f"need at least 2 elements to pair, got {len(idx)}")
    order = rng_for(seed, STREAM_PAIRING).permutation(len(idx))
    shuffled = [idx[i] for i in order]
    return [(shuffled[i], shuffled[i + 1]) for i in range(0, len(shuffled) - 1, 2)]


def all_pairs(batch_indices) -> list[tuple[int, int]]:
    """Every unordered pair of the batch (O(B²) ablation alternative)."""
    idx = list(batch_indices)
    return [(idx[i], idx[j]) for i in range(len(idx)) for j in range(i + 1, len(idx))]


def synth_distort(
    img: np.ndarray, recipe: DistortionRecipe, seed: int = 0
) -> tuple[np.ndarray, float]:
    """Apply a parameterized degradation; returns (image, pseudo_mos).

    pseudo_mos is ``1 - severity`` by construction. Severity 0 returns a
    pixel-identical copy for every kind. Noise output is not clipped here;
    clipping to [0, 1] happens at PNG quantization.
    """
    img = to_float(img)
    if recipe.severity == 0.0:
        return img.copy(), 1.0
    if recipe.kind is DistortionKind.GAUSSIAN_BLUR:
        sigma = BLUR_SIGMA_MAX * recipe.severity
        out = scipy.ndimage.gaussian_filter(img, sigma=(sigma, sigma, 0.0), mode="nearest")
    elif recipe.kind is DistortionKind.GAUSSIAN_NOISE:
        std = NOISE_STD_MAX * recipe.severity
        rng = rng_for(seed, STREAM_SYNTH_DISTORT)
        out = img + rng.normal(0.0, std, size=img.shape)
    elif recipe.kind is DistortionKind.JPEG_LIKE:
        q_hi, q_lo = JPEG_QUALITY_RANGE
        quality = int(round(q_hi + (q_lo - q_hi) * recipe.severity))
        out = decode_image(encode_jpeg(img, quality=quality))
    else:  # pragma: no cover - enum is closed
        raise InvalidConfig(f"unknown distortion kind {recipe.kind}")
    return out, 1.0 - recipe.severity


def make_content(
    rng: np.random.Generator,
    height: int,
    width: int,
    low_amp: float = 0.35,
    mid_amp: float = 0.15,
    grain_amp: float = 0.0,
) -> np.ndarray:
    """Random pristine content: smooth color field + band-limited texture (+ grain)."""
    low = resize_bilinear(rng.uniform(0.5 - low_amp, 0.5 + low_amp, size=(4, 4, 3)), height, width)
    mid_grid = rng.uniform(-mid_amp, mid_amp, size=(max(2, height // 16), max(2, width // 16), 3))
    mid = resize_bilinear(mid_grid + 0.5, height, width) - 0.5
    img = low + mid
    if grain_amp > 0.0:
        img = img + rng.uniform(-grain_amp, grain_amp, size=img.shape)
    return np.clip(img, 0.0, 1.0)


def generate_synthetic_dataset(
    out_dir: str | Path,
    count: int,
    seed: int = 0,
    height: int = 320,
    width: int = 320,
    kinds: tuple[DistortionKind, ...] = (DistortionKind.GAUSSIAN_BLUR, DistortionKind.GAUSSIAN_NOISE),
    severity_range: tuple[float, float] = (0.0, 1.0),
    grain_amp: float = 0.0,
) -> list[LabeledSample]:
    """Emit ``<out_dir>/images/*.png`` and ``<out_dir>/labels.csv``.

    Per image: random content, a random kind from ``kinds``, severity drawn
    uniformly from ``severity_range``. Everything derives from ``seed``, so
    equal seeds give byte-identical datasets.
    """
    if count < 0:
        raise InvalidConfig(f"count must be >= 0, got {count}")
    out_dir = Path(out_dir)
    images_dir = out_dir / "images"
    images_dir.mkdir(parents=True, exist_ok=True)
    samples: list[LabeledSample] = []
    lo, hi = severity_range
    for i in range(count):
        rng = rng_for(seed, STREAM_SYNTH_CONTENT, i)
        img = make_content(rng, height, width, grain_amp=grain_amp)
        kind = kinds[int(rng.integers(0, len(kinds)))]
        severity = float(rng.uniform(lo, hi))
        distorted, mos = synth_distort(img, DistortionRecipe(kind, severity), seed=seed + i)
        path = images_dir / f"img_{i:04d}.png"
        write_png(distorted, path)
        samples.append(LabeledSample(image_path=path, mos=mos))
    save_labels(samples, out_dir / "labels.csv", root=out_dir)
    return samples


class ImageCache:
    """Small LRU cache of decoded uint8 images, bounded by total bytes."""

    def __init__(self, max_bytes: int = 1_500_000_000):
        self.max_bytes = max_bytes
        self._items: OrderedDict[str, np.ndarray] = OrderedDict()
        self._bytes = 0

    def get(self, path: str | Path) -> np.ndarray:
        key = str(path)
        cached = self._items.get(key)
        if cached is not None:
            self._items.move_to_end(key)
            return cached
        img = decode_image(path, normalized=False)
        self._items[key] = img
        self._bytes += img.nbytes
        while self._bytes > self.max_bytes and len(self._items) > 1:
            _, evicted = self._items.popitem(last=False)
            self._bytes -= evicted.nbytes
        return img
