"""Construction of the three fixed-resolution branch views.

A full-resolution image is reduced to three views of identical shape
``(view_size, view_size, 3)``:

* aesthetic view: aspect-preserving bilinear resize so the short side equals
  ``min_side_resize``, followed by a square crop (random position during
  training, centered during evaluation);
* fragment view: the image is split into a ``grid_n x grid_n`` uniform grid,
  one ``mini_patch``-sized window is sampled from every cell (random offset
  during training, cell-centered during evaluation) and the windows are
  spliced back in grid order;
* salient view: a centered crop at the original resolution, using center
  bias as the saliency proxy.

The fragment and salient views sample the original-resolution pixels; only
the aesthetic view is resized. All outputs are float64 in [0, 1]. Given the
same (image, config, mode, seed) the views are bit-identical; evaluation
mode ignores the seed entirely.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import CellTooSmall, ImageTooSmall, InvalidConfig, InvalidGrid
from .imaging import Rect, crop, resize_bilinear, to_float, validate_image
from .seeding import STREAM_VIEW_AESTHETIC, STREAM_VIEW_FRAGMENT, rng_for


class SampleMode(enum.Enum):
    """Crop-position policy: random offsets for TRAIN, deterministic centers for EVAL."""

    TRAIN = "train"
    EVAL = "eval"


@dataclass(frozen=True)
class PreprocessConfig:
    """Geometry of the three branch views.

    Invariant: ``grid_n * mini_patch == view_size`` so the fragment image
    tiles exactly, and ``view_size <= min_side_resize`` so the aesthetic
    crop always fits after the resize.
    """

    min_side_resize: int = 512
    view_size: int = 480
    grid_n: int = 15
    mini_patch: int = 32
    salient_size: int = 480

    def __post_init__(self):
        for name in ("min_side_resize", "view_size", "grid_n", "mini_patch", "salient_size"):
            if getattr(self, name) < 1:
                raise InvalidConfig(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.grid_n * self.mini_patch != self.view_size:
            raise InvalidConfig(
                f"grid_n * mini_patch must equal view_size "
                f"({self.grid_n} * {self.mini_patch} != {self.view_size})"
            )
        if self.view_size > self.min_side_resize:
            raise InvalidConfig(
                f"view_size {self.view_size} exceeds min_side_resize {self.min_side_resize}"
            )
        if self.salient_size != self.view_size:
            # All three views must share one shape so they can feed extractors
            # with a common input contract.
            raise InvalidConfig(
                f"salient_size {self.salient_size} must equal view_size {self.view_size}"
            )


@dataclass
class BranchInputs:
    """The three branch views of one image, each (view_size, view_size, 3) float64."""

    aesthetic: np.ndarray
    fragment: np.ndarray
    salient: np.ndarray

    def view(self, branch: str) -> np.ndarray:
        return getattr(self, branch)


def resized_dims(h: int, w: int, min_side: int) -> tuple[int, int]:
    """Aspect-preserving target dims with the short side pinned to ``min_side``.

    The free side is rounded half-up to the nearest integer.
    """
    if h <= w:
        return min_side, max(1, int(math.floor(w * min_side / h + 0.5)))
    return max(1, int(math.floor(h * min_side / w + 0.5))), min_side


def aesthetic_view(
    img: np.ndarray,
    cfg: PreprocessConfig,
    mode: SampleMode = SampleMode.EVAL,
    seed: int = 0,
) -> np.ndarray:
    """Resize to ``min_side_resize`` on the short side, then crop ``view_size``²."""
    img = validate_image(img)
    h, w = img.shape[:2]
    new_h, new_w = resized_dims(h, w, cfg.min_side_resize)
    if new_h < cfg.view_size or new_w < cfg.view_size:
        raise ImageTooSmall(
            f"resized image {new_h}x{new_w} cannot contain a {cfg.view_size}² crop"
        )
    if (new_h, new_w) == (h, w):
        resized = to_float(img)
    else:
        resized = resize_bilinear(img, new_h, new_w)
    if mode is SampleMode.TRAIN:
        rng = rng_for(seed, STREAM_VIEW_AESTHETIC)
        top = int(rng.integers(0, new_h - cfg.view_size + 1))
        left = int(rng.integers(0, new_w - cfg.view_size + 1))
    else:
        top = (new_h - cfg.view_size) // 2
        left = (new_w - cfg.view_size) // 2
    return crop(resized, Rect(top, left, cfg.view_size, cfg.view_size))


def grid_split(img: np.ndarray, grid_n: int) -> list[Rect]:
    """Split the image into ``grid_n``² cells, row-major.

    Cell (i, j) spans rows [floor(i*H/n), floor((i+1)*H/n)) and the analogous
    column range; the cells are disjoint and cover the image exactly. When a
    dimension is not divisible the trailing cells absorb the remainder.
    """
    img = validate_image(img)
    h, w = img.shape[:2]
    if grid_n < 1:
        raise InvalidGrid(f"grid_n must be >= 1, got {grid_n}")
    if grid_n > h or grid_n > w:
        raise InvalidGrid(f"grid_n {grid_n} exceeds image dimensions {h}x{w}")
    row_edges = [(i * h) // grid_n for i in range(grid_n + 1)]
    col_edges = [(j * w) // grid_n for j in range(grid_n + 1)]
    rects = []
    for i in range(grid_n):
        for j in range(grid_n):
            rects.append(
                Rect(
                    top=row_edges[i],
                    left=col_edges[j],
                    height=row_edges[i + 1] - row_edges[i],
                    width=col_edges[j + 1] - col_edges[j],
                )
            )
    return rects


def fragment_view(
    img: np.ndarray,
    cfg: PreprocessConfig,
    mode: SampleMode = SampleMode.EVAL,
    seed: int = 0,
) -> np.ndarray:
    """Splice one mini-patch per grid cell into a ``view_size``² fragment image.

    Offsets within each cell are uniform-random in TRAIN mode (drawn from a
    generator keyed by ``seed``, cells visited row-major) and centered in
    EVAL mode. Sampling happens at the original resolution: every fragment
    block is an exact pixel copy of some window inside its source cell.
    """
    img = validate_image(img)
    rects = grid_split(img, cfg.grid_n)
    mp = cfg.mini_patch
    for r in rects:
        if r.height < mp or r.width < mp:
            raise CellTooSmall(
                f"grid cell {r.height}x{r.width} cannot contain a {mp}² mini-patch"
            )
    rng = rng_for(seed, STREAM_VIEW_FRAGMENT) if mode is SampleMode.TRAIN else None
    out = np.empty((cfg.view_size, cfg.view_size, 3), dtype=np.float64)
    for idx, r in enumerate(rects):
        if rng is not None:
            dy = int(rng.integers(0, r.height - mp + 1))
            dx = int(rng.integers(0, r.width - mp + 1))
        else:
            dy = (r.height - mp) // 2
            dx = (r.width - mp) // 2
        patch = to_float(crop(img, Rect(r.top + dy, r.left + dx, mp, mp)))
        i, j = divmod(idx, cfg.grid_n)
        out[i * mp : (i + 1) * mp, j * mp : (j + 1) * mp] = patch
    return out


def salient_view(img: np.ndarray, cfg: PreprocessConfig) -> np.ndarray:
    """Center crop of size ``salient_size``² at the original resolution."""
    img = validate_image(img)
    h, w = img.shape[:2]
    s = cfg.salient_size
    if h < s or w < s:
        raise ImageTooSmall(f"image {h}x{w} cannot contain a {s}² salient crop")
    return to_float(crop(img, Rect((h - s) // 2, (w - s) // 2, s, s)))


def preprocess_triplet(
    img: np.ndarray,
    cfg: PreprocessConfig,
    mode: SampleMode = SampleMode.EVAL,
    seed: int = 0,
) -> BranchInputs:
    """Build all three branch views of one image.

    The fragment and salient views read the original-resolution pixels; the
    aesthetic view reads the resized image. Errors from the individual views
    propagate unchanged.
    """
    return BranchInputs(
        aesthetic=aesthetic_view(img, cfg, mode, seed),
        fragment=fragment_view(img, cfg, mode, seed),
        salient=salient_view(img, cfg),
    )
