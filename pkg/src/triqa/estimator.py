"""scikit-learn style estimator wrapping the full pipeline.

``QualityRegressor`` follows the estimator protocol (``get_params`` /
``set_params`` / ``fit`` / ``predict``) so it composes with scikit-learn
tooling: cloning, parameter search, pipelines. ``X`` is a sequence of
images — file paths or decoded ``(H, W, 3)`` arrays — and ``y`` the
ground-truth quality scores in [0, 1].

``fit`` carves a validation subset out of the given data (``val_fraction``)
for checkpoint selection, trains with the pairwise fidelity+MSE objective,
and keeps the epoch snapshot with the best validation rank correlation.
``score`` returns SRCC (the headline metric in quality assessment) rather
than the R² default of regressors.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .data import LabeledSample, SplitSpec, split
from .errors import RangeError, ShapeMismatch
from .imaging import decode_image, validate_image
from .loss import LossWeights
from .metrics import MetricsReport, compute_report, srcc
from .model import BRANCHES, DEFAULT_HEAD_HIDDEN, FeatureExtractorSpec, init_model, predict_batch
from .preprocess import PreprocessConfig, SampleMode, preprocess_triplet
from .train import TrainConfig, train


class _MemoryLoader:
    """Image loader over an in-memory list; keys are 'mem/<index>' paths."""

    def __init__(self, images):
        self._images = images

    def get(self, path) -> np.ndarray:
        return self._images[int(Path(path).name)]


def _as_loader_samples(X, y) -> tuple[list[LabeledSample], _MemoryLoader]:
    images = []
    samples = []
    for i, (item, target) in enumerate(zip(X, y)):
        if isinstance(item, (str, Path)):
            images.append(decode_image(item, normalized=False))
        else:
            images.append(validate_image(np.asarray(item)))
        samples.append(LabeledSample(image_path=Path("mem") / str(i), mos=float(target)))
    return samples, _MemoryLoader(images)


class QualityRegressor(RegressorMixin, BaseEstimator):
    """No-reference image quality regressor over three downsampled views.

    Parameters mirror the underlying preprocessing geometry, extractor
    architecture, and optimization settings; see the package documentation
    for their meaning. ``branches`` selects any subset of
    ``("aes", "dis", "sal")`` for ablation studies.
    """

    def __init__(
        self,
        view_size: int = 480,
        min_side_resize: int = 512,
        grid_n: int = 15,
        mini_patch: int = 32,
        patch_size: int = 16,
        embed_dim: int = 64,
        blocks: int = 2,
        heads: int = 2,
        mlp_ratio: float = 2.0,
        pos_embed: bool = True,
        branches: tuple[str, ...] = BRANCHES,
        head_hidden: int = DEFAULT_HEAD_HIDDEN,
        lr: float = 1e-5,
        batch_size: int = 12,
        epochs: int = 100,
        decay_factor: float = 0.1,
        decay_every: int = 10,
        decay_once: bool = False,
        alpha: float = 1.0,
        beta: float = 0.1,
        tie_eps: float = 0.0,
        pairing: str = "disjoint",
        grad_clip: float | None = None,
        val_fraction: float = 0.2,
        random_state: int = 0,
    ):
        self.view_size = view_size
        self.min_side_resize = min_side_resize
        self.grid_n = grid_n
        self.mini_patch = mini_patch
        self.patch_size = patch_size
        self.embed_dim = embed_dim
        self.blocks = blocks
        self.heads = heads
        self.mlp_ratio = mlp_ratio
        self.pos_embed = pos_embed
        self.branches = branches
        self.head_hidden = head_hidden
        self.lr = lr
        self.batch_size = batch_size
        self.epochs = epochs
        self.decay_factor = decay_factor
        self.decay_every = decay_every
        self.decay_once = decay_once
        self.alpha = alpha
        self.beta = beta
        self.tie_eps = tie_eps
        self.pairing = pairing
        self.grad_clip = grad_clip
        self.val_fraction = val_fraction
        self.random_state = random_state

    def _preprocess_config(self) -> PreprocessConfig:
        return PreprocessConfig(
            min_side_resize=self.min_side_resize,
            view_size=self.view_size,
            grid_n=self.grid_n,
            mini_patch=self.mini_patch,
            salient_size=self.view_size,
        )

    def _extractor_spec(self) -> FeatureExtractorSpec:
        return FeatureExtractorSpec(
            patch_size=self.patch_size,
            embed_dim=self.embed_dim,
            blocks=self.blocks,
            heads=self.heads,
            mlp_ratio=self.mlp_ratio,
            pos_embed=self.pos_embed,
        )

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            lr=self.lr,
            batch_size=self.batch_size,
            epochs=self.epochs,
            decay_factor=self.decay_factor,
            decay_every=self.decay_every,
            decay_once=self.decay_once,
            weights=LossWeights(alpha=self.alpha, beta=self.beta),
            seed=self.random_state,
            tie_eps=self.tie_eps,
            pairing=self.pairing,
            grad_clip=self.grad_clip,
        )

    @staticmethod
    def _validate_targets(X, y) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64).ravel()
        if len(X) != y.shape[0]:
            raise ShapeMismatch(f"X has {len(X)} items but y has {y.shape[0]}")
        if not np.isfinite(y).all():
            raise RangeError("target scores must be finite")
        if y.size and (y.min() < 0.0 or y.max() > 1.0):
            raise RangeError(f"target scores must lie in [0, 1], got [{y.min()}, {y.max()}]")
        return y

    def fit(self, X, y):
        """Train on images ``X`` with quality targets ``y``; returns self."""
        y = self._validate_targets(X, y)
        samples, loader = _as_loader_samples(X, y)
        train_set, val_set = split(
            samples, SplitSpec(train_fraction=1.0 - self.val_fraction, seed=self.random_state)
        )
        model = init_model(
            self._extractor_spec(),
            view_size=self.view_size,
            branches=self.branches,
            head_hidden=self.head_hidden,
            seed=self.random_state,
        )
        result = train(
            model,
            train_set,
            val_set,
            self._train_config(),
            self._preprocess_config(),
            loader=loader,
        )
        self.checkpoint_ = result.checkpoint
        self.model_ = result.checkpoint.model
        self.trace_ = result.trace
        self.best_epoch_ = result.checkpoint.epoch
        self.val_metrics_ = result.checkpoint.val_metrics
        return self

    def predict(self, X) -> np.ndarray:
        """Quality scores with deterministic (eval-mode) preprocessing."""
        check_is_fitted(self, "model_")
        pre = self.checkpoint_.preprocess
        scores = np.empty(len(X))
        chunk = 16
        for start in range(0, len(X), chunk):
            inputs = []
            for item in X[start : start + chunk]:
                if isinstance(item, (str, Path)):
                    img = decode_image(item, normalized=False)
                else:
                    img = np.asarray(item)
                inputs.append(preprocess_triplet(img, pre, SampleMode.EVAL))
            scores[start : start + len(inputs)] = predict_batch(self.model_, inputs)
        return scores

    def score(self, X, y) -> float:
        """Spearman rank correlation between predictions and ``y``.

        Overrides the regressor default (R²): rank consistency is the
        headline criterion for perceptual quality models.
        """
        return srcc(self.predict(X), np.asarray(y, dtype=np.float64))

    def evaluate(self, X, y) -> MetricsReport:
        """All five criteria (SRCC, PLCC, KRCC, RMSE, MAE) on ``X, y``."""
        return compute_report(self.predict(X), np.asarray(y, dtype=np.float64))


__all__ = ["QualityRegressor"]
