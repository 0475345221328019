"""Multi-branch feature extraction and quality regression.

Each enabled branch (aesthetic "aes", distortion "dis", salient "sal") owns
an independent copy of a small patch-embedding transformer encoder:
non-overlapping patch embedding, optional learnable positional embedding,
``blocks`` pre-norm self-attention blocks, then global average pooling over
tokens. Branch features are concatenated in fixed (aes, dis, sal) order and
regressed to a scalar score by a two-layer MLP (hidden 128, ReLU, output 1).

The extractor here is a deliberately small reference network: the branch
structure is the point, the backbone is pluggable. Anything obeying
``extract_features``'s contract (view in, fixed-length feature vector out)
can stand in for it.

Parameters are float64 numpy arrays in a flat, insertion-ordered dict; all
forward passes run through the :mod:`triqa.autodiff` tape, so training
gradients are exact. Inference builds no gradient state and never mutates
parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from . import autodiff as ad
from .errors import DegenerateBatch, InvalidConfig, LengthMismatch, ShapeMismatch
from .loss import LossWeights, combined_loss, combined_loss_grad
from .preprocess import BranchInputs
from .seeding import STREAM_MODEL_INIT, rng_for

BRANCHES = ("aes", "dis", "sal")
_BRANCH_VIEW = {"aes": "aesthetic", "dis": "fragment", "sal": "salient"}

# Widely used natural-image channel statistics (RGB).
DEFAULT_NORM_MEAN = (0.485, 0.456, 0.406)
DEFAULT_NORM_STD = (0.229, 0.224, 0.225)

DEFAULT_HEAD_HIDDEN = 128


@dataclass(frozen=True)
class FeatureExtractorSpec:
    """Architecture of one branch extractor."""

    patch_size: int = 16
    embed_dim: int = 64
    blocks: int = 2
    heads: int = 2
    mlp_ratio: float = 2.0
    pos_embed: bool = True

    def __post_init__(self):
        if min(self.patch_size, self.embed_dim, self.blocks + 1, self.heads) < 1:
            raise InvalidConfig(f"non-positive extractor dimension in {self}")
        if self.embed_dim % self.heads != 0:
            raise InvalidConfig(
                f"embed_dim {self.embed_dim} not divisible by heads {self.heads}"
            )
        if self.mlp_ratio <= 0:
            raise InvalidConfig(f"mlp_ratio must be positive, got {self.mlp_ratio}")

    @property
    def mlp_hidden(self) -> int:
        return max(1, int(round(self.embed_dim * self.mlp_ratio)))

    def tokens(self, view_size: int) -> int:
        if view_size % self.patch_size != 0:
            raise InvalidConfig(
                f"view_size {view_size} not divisible by patch_size {self.patch_size}"
            )
        return (view_size // self.patch_size) ** 2


@dataclass
class QualityModel:
    """Parameters and configuration of the full three-branch regressor."""

    spec: FeatureExtractorSpec
    view_size: int
    branches: tuple[str, ...]
    params: dict[str, np.ndarray]
    norm_mean: np.ndarray
    norm_std: np.ndarray
    head_hidden: int = DEFAULT_HEAD_HIDDEN
    extra: dict = field(default_factory=dict)

    def param_names(self) -> list[str]:
        return list(self.params.keys())

    def float32_snapshot(self) -> "QualityModel":
        """Copy with every parameter rounded through little-endian float32.

        This is exactly the numeric content a checkpoint stores, so metrics
        computed on the snapshot match metrics computed after a save/load
        round trip bit for bit.
        """
        rounded = {
            k: v.astype("<f4").astype(np.float64) for k, v in self.params.items()
        }
        return QualityModel(
            spec=self.spec,
            view_size=self.view_size,
            branches=self.branches,
            params=rounded,
            norm_mean=self.norm_mean.copy(),
            norm_std=self.norm_std.copy(),
            head_hidden=self.head_hidden,
        )

    def copy(self) -> "QualityModel":
        return QualityModel(
            spec=self.spec,
            view_size=self.view_size,
            branches=self.branches,
            params={k: v.copy() for k, v in self.params.items()},
            norm_mean=self.norm_mean.copy(),
            norm_std=self.norm_std.copy(),
            head_hidden=self.head_hidden,
        )


def _trunc_normal(rng: np.random.Generator, shape, std: float = 0.02) -> np.ndarray:
    """Truncated normal within ±2 std, sampled by inverse CDF (deterministic)."""
    lo = 0.5 * math.erfc(2.0 / math.sqrt(2.0))  # Phi(-2)
    u = rng.uniform(lo, 1.0 - lo, size=shape)
    return (ndtri(u) * std).astype(np.float64)


def init_model(
    spec: FeatureExtractorSpec,
    view_size: int,
    branches: tuple[str, ...] = BRANCHES,
    head_hidden: int = DEFAULT_HEAD_HIDDEN,
    norm_mean=DEFAULT_NORM_MEAN,
    norm_std=DEFAULT_NORM_STD,
    seed: int = 0,
) -> QualityModel:
    """Create a model with truncated-normal weights (std 0.02) and zero biases.

    Branch order is normalized to the fixed (aes, dis, sal) order; each
    enabled branch gets architecturally identical but independently sampled
    parameters.
    """
    unknown = set(branches) - set(BRANCHES)
    if unknown:
        raise InvalidConfig(f"unknown branches: {sorted(unknown)}; valid: {BRANCHES}")
    branches = tuple(b for b in BRANCHES if b in branches)
    if not branches:
        raise InvalidConfig("at least one branch must be enabled")
    tokens = spec.tokens(view_size)
    in_dim = spec.patch_size * spec.patch_size * 3
    d = spec.embed_dim
    rng = rng_for(seed, STREAM_MODEL_INIT)

    params: dict[str, np.ndarray] = {}

    def w(name, shape):
        params[name] = _trunc_normal(rng, shape)

    def zeros(name, shape):
        params[name] = np.zeros(shape, dtype=np.float64)

    def ones(name, shape):
        params[name] = np.ones(shape, dtype=np.float64)

    for br in branches:
        w(f"{br}.embed.w", (in_dim, d))
        zeros(f"{br}.embed.b", (d,))
        if spec.pos_embed:
            w(f"{br}.pos", (tokens, d))
        for i in range(spec.blocks):
            p = f"{br}.b{i}"
            ones(f"{p}.ln1.g", (d,))
            zeros(f"{p}.ln1.b", (d,))
            for proj in ("q", "k", "v", "o"):
                w(f"{p}.attn.w{proj}", (d, d))
                zeros(f"{p}.attn.b{proj}", (d,))
            ones(f"{p}.ln2.g", (d,))
            zeros(f"{p}.ln2.b", (d,))
            w(f"{p}.mlp.w1", (d, spec.mlp_hidden))
            zeros(f"{p}.mlp.b1", (spec.mlp_hidden,))
            w(f"{p}.mlp.w2", (spec.mlp_hidden, d))
            zeros(f"{p}.mlp.b2", (d,))

    w("head.w1", (len(branches) * d, head_hidden))
    zeros("head.b1", (head_hidden,))
    w("head.w2", (head_hidden, 1))
    zeros("head.b2", (1,))

    return QualityModel(
        spec=spec,
        view_size=view_size,
        branches=branches,
        params=params,
        norm_mean=np.asarray(norm_mean, dtype=np.float64),
        norm_std=np.asarray(norm_std, dtype=np.float64),
        head_hidden=head_hidden,
    )


def normalize_view(view: np.ndarray, norm_mean, norm_std) -> np.ndarray:
    """Channelwise (x - mean) / std on a (S, S, 3) view in [0, 1]."""
    mean = np.asarray(norm_mean, dtype=np.float64)
    std = np.asarray(norm_std, dtype=np.float64)
    return (np.asarray(view, dtype=np.float64) - mean) / std


def patchify(views: np.ndarray, patch_size: int) -> np.ndarray:
    """(B, S, S, 3) -> (B, T, patch_size²·3), patches row-major, pixels row-major."""
    b, s, s2, c = views.shape
    if s != s2 or s % patch_size != 0:
        raise ShapeMismatch(f"cannot patchify views of shape {views.shape} with patch {patch_size}")
    n = s // patch_size
    x = views.reshape(b, n, patch_size, n, patch_size, c)
    x = x.transpose(0, 1, 3, 2, 4, 5)  # (B, n, n, P, P, C)
    return np.ascontiguousarray(x.reshape(b, n * n, patch_size * patch_size * c))


def _extractor_forward(
    t: dict[str, ad.Tensor], prefix: str, tokens_in: np.ndarray, spec: FeatureExtractorSpec
) -> ad.Tensor:
    """Run one branch on pre-patchified tokens (B, T, in_dim) -> (B, D)."""
    b, n_tok, _ = tokens_in.shape
    d = spec.embed_dim
    heads = spec.heads
    dh = d // heads

    x = ad.add(ad.matmul(ad.constant(tokens_in), t[f"{prefix}.embed.w"]), t[f"{prefix}.embed.b"])
    if spec.pos_embed:
        x = ad.add(x, t[f"{prefix}.pos"])

    for i in range(spec.blocks):
        p = f"{prefix}.b{i}"
        h = ad.layer_norm(x, t[f"{p}.ln1.g"], t[f"{p}.ln1.b"])
        q = ad.add(ad.matmul(h, t[f"{p}.attn.wq"]), t[f"{p}.attn.bq"])
        k = ad.add(ad.matmul(h, t[f"{p}.attn.wk"]), t[f"{p}.attn.bk"])
        v = ad.add(ad.matmul(h, t[f"{p}.attn.wv"]), t[f"{p}.attn.bv"])
        q = ad.transpose(ad.reshape(q, (b, n_tok, heads, dh)), (0, 2, 1, 3))
        k = ad.transpose(ad.reshape(k, (b, n_tok, heads, dh)), (0, 2, 1, 3))
        v = ad.transpose(ad.reshape(v, (b, n_tok, heads, dh)), (0, 2, 1, 3))
        scores = ad.scale(ad.matmul(q, ad.transpose(k, (0, 1, 3, 2))), 1.0 / math.sqrt(dh))
        attn = ad.softmax(scores)
        ctx = ad.reshape(ad.transpose(ad.matmul(attn, v), (0, 2, 1, 3)), (b, n_tok, d))
        ctx = ad.add(ad.matmul(ctx, t[f"{p}.attn.wo"]), t[f"{p}.attn.bo"])
        x = ad.add(x, ctx)

        h = ad.layer_norm(x, t[f"{p}.ln2.g"], t[f"{p}.ln2.b"])
        h = ad.gelu(ad.add(ad.matmul(h, t[f"{p}.mlp.w1"]), t[f"{p}.mlp.b1"]))
        h = ad.add(ad.matmul(h, t[f"{p}.mlp.w2"]), t[f"{p}.mlp.b2"])
        x = ad.add(x, h)

    return ad.mean_axis(x, axis=1)  # (B, D)


def _check_view(view: np.ndarray, view_size: int) -> np.ndarray:
    view = np.asarray(view, dtype=np.float64)
    if view.shape != (view_size, view_size, 3):
        raise ShapeMismatch(
            f"expected view of shape ({view_size}, {view_size}, 3), got {view.shape}"
        )
    return view


def _tensors(model: QualityModel, needs_grad: bool) -> dict[str, ad.Tensor]:
    return {
        k: (ad.parameter(v) if needs_grad else ad.Tensor(v))
        for k, v in model.params.items()
    }


def _forward_scores(
    model: QualityModel, stacked_views: dict[str, np.ndarray], needs_grad: bool
) -> tuple[ad.Tensor, dict[str, ad.Tensor]]:
    """Forward a stacked batch of normalized views to scores (B,)."""
    t = _tensors(model, needs_grad)
    feats = [
        _extractor_forward(t, br, patchify(stacked_views[br], model.spec.patch_size), model.spec)
        for br in model.branches
    ]
    fused = feats[0] if len(feats) == 1 else ad.concat_last(feats)
    hidden = ad.relu(ad.add(ad.matmul(fused, t["head.w1"]), t["head.b1"]))
    out = ad.add(ad.matmul(hidden, t["head.w2"]), t["head.b2"])  # (B, 1)
    return ad.reshape(out, (out.shape[0],)), t


def _stack_batch(model: QualityModel, inputs: list[BranchInputs]) -> dict[str, np.ndarray]:
    stacked = {}
    for br in model.branches:
        views = [
            normalize_view(
                _check_view(inp.view(_BRANCH_VIEW[br]), model.view_size),
                model.norm_mean,
                model.norm_std,
            )
            for inp in inputs
        ]
        stacked[br] = np.stack(views, axis=0)
    return stacked


def extract_features(
    extractor_params: dict[str, np.ndarray],
    view: np.ndarray,
    spec: FeatureExtractorSpec,
) -> np.ndarray:
    """Feature vector of length embed_dim for one already-normalized view.

    ``extractor_params`` maps unprefixed names (``embed.w``, ``b0.attn.wq``,
    ...) to arrays, as returned by :func:`branch_params`; ``view`` must be
    (S, S, 3) with S divisible by the patch size.
    """
    view = np.asarray(view, dtype=np.float64)
    if view.ndim != 3 or view.shape[0] != view.shape[1] or view.shape[2] != 3:
        raise ShapeMismatch(f"expected square (S, S, 3) view, got {view.shape}")
    spec.tokens(view.shape[0])
    if "embed.w" not in extractor_params:
        raise ShapeMismatch("extractor parameters missing 'embed.w'")
    t = {f"x.{k}": ad.Tensor(v) for k, v in extractor_params.items()}
    tokens = patchify(view[None, ...], spec.patch_size)
    return _extractor_forward(t, "x", tokens, spec).data[0].copy()


def branch_params(model: QualityModel, branch: str) -> dict[str, np.ndarray]:
    """The parameter sub-dict of one branch, keys stripped of the branch prefix."""
    pre = branch + "."
    return {k[len(pre):]: v for k, v in model.params.items() if k.startswith(pre)}


def fuse(f_aes: np.ndarray, f_dis: np.ndarray, f_sal: np.ndarray) -> np.ndarray:
    """Concatenate the three branch features in fixed (aes, dis, sal) order."""
    vecs = [np.asarray(v, dtype=np.float64).ravel() for v in (f_aes, f_dis, f_sal)]
    lengths = {v.shape[0] for v in vecs}
    if len(lengths) != 1:
        raise LengthMismatch(f"branch feature lengths differ: {[v.shape[0] for v in vecs]}")
    return np.concatenate(vecs)


def predict_batch(model: QualityModel, inputs: list[BranchInputs]) -> np.ndarray:
    """Quality scores for a batch of preprocessed inputs (inference, no grads)."""
    if not inputs:
        return np.empty(0)
    scores, _ = _forward_scores(model, _stack_batch(model, inputs), needs_grad=False)
    return scores.data.copy()


def predict_quality(model: QualityModel, inputs: BranchInputs) -> float:
    """Raw (unclamped) quality score of one image."""
    return float(predict_batch(model, [inputs])[0])


def adjacent_pairs(n: int) -> list[tuple[int, int]]:
    """Deterministic fallback pairing (0,1), (2,3), ...; odd leftover dropped."""
    return [(i, i + 1) for i in range(0, n - 1, 2)]


def _validate_pairs(
    batch_size: int, pairs: list[tuple[int, int]] | None
) -> list[tuple[int, int]]:
    if batch_size < 2:
        raise DegenerateBatch(f"need at least 2 samples to form a pair, got {batch_size}")
    if pairs is None:
        pairs = adjacent_pairs(batch_size)
    if not pairs:
        raise DegenerateBatch("empty pair list")
    for a, b in pairs:
        if a == b:
            raise DegenerateBatch(f"self-pair ({a}, {b}) is not allowed")
    return pairs


def batch_pair_loss(
    model: QualityModel,
    batch: list[tuple[BranchInputs, float]],
    weights: LossWeights = LossWeights(),
    pairs: list[tuple[int, int]] | None = None,
    tie_eps: float = 0.0,
) -> float:
    """Mean pair loss of a batch without gradient computation."""
    pairs = _validate_pairs(len(batch), pairs)
    inputs = [inp for inp, _ in batch]
    mos = [m for _, m in batch]
    qhat = predict_batch(model, inputs)
    total = sum(
        combined_loss(mos[a], mos[b], qhat[a], qhat[b], weights, tie_eps) for a, b in pairs
    )
    return total / len(pairs)


def forward_backward(
    model: QualityModel,
    batch: list[tuple[BranchInputs, float]],
    weights: LossWeights = LossWeights(),
    pairs: list[tuple[int, int]] | None = None,
    tie_eps: float = 0.0,
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean pair loss over the batch and its exact parameter gradient.

    ``pairs`` lists index pairs into ``batch`` (no self-pairs); defaults to
    adjacent disjoint pairing. The per-pair loss gradient with respect to
    the two scores is computed analytically and seeded into the tape, so the
    returned gradients are exact reverse-mode derivatives of the scalar loss.
    """
    pairs = _validate_pairs(len(batch), pairs)
    inputs = [inp for inp, _ in batch]
    mos = np.asarray([m for _, m in batch], dtype=np.float64)
    scores, tensors = _forward_scores(model, _stack_batch(model, inputs), needs_grad=True)
    qhat = scores.data

    total = 0.0
    seed_grad = np.zeros_like(qhat)
    inv_n = 1.0 / len(pairs)
    for a, b in pairs:
        total += combined_loss(mos[a], mos[b], qhat[a], qhat[b], weights, tie_eps)
        gx, gy = combined_loss_grad(mos[a], mos[b], qhat[a], qhat[b], weights, tie_eps)
        seed_grad[a] += gx * inv_n
        seed_grad[b] += gy * inv_n
    total *= inv_n

    ad.backward(scores, seed_grad)
    grads = {
        k: (t.grad if t.grad is not None else np.zeros_like(t.data))
        for k, t in tensors.items()
    }
    return total, grads
