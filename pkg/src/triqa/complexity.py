"""Analytic multiply-accumulate (MAC) counts for the configured pipeline.

Counting convention: one MAC is one multiply-accumulate. A linear layer of
shape (in, out) applied to T tokens costs T·in·out; the attention matrix
and value aggregation cost T²·D each per block (summed over heads); global
average pooling costs T·D accumulations. Softmax, normalization, bias adds,
positional-embedding adds and activations are excluded — the convention
counts multiplies, matching common profiler output closely enough to
compare architectures.

Because every branch view has the fixed shape (view_size, view_size, 3),
the counts are independent of the source image resolution: that invariance
is the pipeline's efficiency argument, and :func:`macs_vs_resolution` makes
it visible next to a hypothetical full-resolution extractor whose cost
grows with the pixel count.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ImageTooSmall, InvalidGrid
from .model import BRANCHES, DEFAULT_HEAD_HIDDEN, FeatureExtractorSpec
from .preprocess import PreprocessConfig


@dataclass(frozen=True)
class MacsBreakdown:
    """Per-branch, head, and total MAC counts; total == sum of parts."""

    per_branch: tuple[tuple[str, int], ...]
    head: int
    total: int


def _extractor_macs(spec: FeatureExtractorSpec, tokens: int) -> int:
    d = spec.embed_dim
    embed = tokens * (spec.patch_size * spec.patch_size * 3) * d
    qkv = 3 * tokens * d * d
    attn_matrix = tokens * tokens * d
    value_agg = tokens * tokens * d
    out_proj = tokens * d * d
    mlp = 2 * tokens * d * spec.mlp_hidden
    block = qkv + attn_matrix + value_agg + out_proj + mlp
    pool = tokens * d
    return embed + spec.blocks * block + pool


def _head_macs(spec: FeatureExtractorSpec, n_branches: int, head_hidden: int) -> int:
    fused = n_branches * spec.embed_dim
    return fused * head_hidden + head_hidden * 1


def macs_estimate(
    spec: FeatureExtractorSpec,
    pre: PreprocessConfig,
    branches: tuple[str, ...] = BRANCHES,
    head_hidden: int = DEFAULT_HEAD_HIDDEN,
) -> MacsBreakdown:
    """Closed-form MAC count of the full multi-branch pipeline.

    The count depends only on the architecture and the view geometry, never
    on the source image resolution.
    """
    tokens = spec.tokens(pre.view_size)
    per_branch = tuple((br, _extractor_macs(spec, tokens)) for br in branches)
    head = _head_macs(spec, len(branches), head_hidden)
    total = sum(c for _, c in per_branch) + head
    return MacsBreakdown(per_branch=per_branch, head=head, total=total)


def fullres_macs(
    spec: FeatureExtractorSpec,
    height: int,
    width: int,
    branches: tuple[str, ...] = BRANCHES,
    head_hidden: int = DEFAULT_HEAD_HIDDEN,
) -> int:
    """Cost of hypothetically running the extractor on the full-resolution image.

    Token count becomes (H/P)·(W/P), so this grows with the pixel count
    (quadratically once attention dominates). Reported for comparison only.
    """
    tokens = (height // spec.patch_size) * (width // spec.patch_size)
    return len(branches) * _extractor_macs(spec, tokens) + _head_macs(
        spec, len(branches), head_hidden
    )


def validate_source_resolution(pre: PreprocessConfig, height: int, width: int) -> None:
    """Check that a source resolution satisfies every view's preconditions."""
    if height < pre.salient_size or width < pre.salient_size:
        raise ImageTooSmall(
            f"{height}x{width} cannot contain a {pre.salient_size}² salient crop"
        )
    if height < pre.grid_n or width < pre.grid_n:
        raise InvalidGrid(f"{pre.grid_n}² grid does not fit in {height}x{width}")
    if height // pre.grid_n < pre.mini_patch or width // pre.grid_n < pre.mini_patch:
        raise ImageTooSmall(
            f"grid cells of a {height}x{width} image are smaller than "
            f"{pre.mini_patch}² mini-patches"
        )


def macs_vs_resolution(
    spec: FeatureExtractorSpec,
    pre: PreprocessConfig,
    source_resolutions: list[tuple[int, int]],
    branches: tuple[str, ...] = BRANCHES,
    head_hidden: int = DEFAULT_HEAD_HIDDEN,
) -> list[dict]:
    """One row per source resolution: pipeline MACs (constant) vs full-res MACs."""
    pipeline = macs_estimate(spec, pre, branches, head_hidden)
    rows = []
    for h, w in source_resolutions:
        validate_source_resolution(pre, h, w)
        rows.append(
            {
                "height": h,
                "width": w,
                "pipeline_macs": pipeline.total,
                "fullres_macs": fullres_macs(spec, h, w, branches, head_hidden),
            }
        )
    return rows
