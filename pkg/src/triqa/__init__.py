"""Efficient no-reference quality assessment for ultra-high-definition images.

Instead of feeding full-resolution pixels to a network, three fixed-size
low-resolution views are extracted — an aesthetic resize+crop, a fragment
image spliced from grid-sampled mini-patches, and a center-bias salient
crop — so compute cost is independent of the source resolution. Each view
feeds its own small transformer encoder; features are concatenated and
regressed to a quality score, trained with a pairwise probit fidelity loss
plus MSE.

Primary entry points: :class:`QualityRegressor` (scikit-learn style
estimator), the :mod:`triqa.cli` command line, and the module-level
functions re-exported here.
"""

from .checkpoint import Checkpoint, config_fingerprint, load_checkpoint, save_checkpoint
from .complexity import MacsBreakdown, fullres_macs, macs_estimate, macs_vs_resolution
from .data import (
    DistortionKind,
    DistortionRecipe,
    ImageCache,
    LabeledSample,
    SplitSpec,
    all_pairs,
    generate_synthetic_dataset,
    load_labels,
    sample_pairs,
    save_labels,
    split,
    synth_distort,
)
from .errors import TriqaError
from .estimator import QualityRegressor
from .imaging import Rect, crop, decode_image, encode_png, resize_bilinear
from .loss import (
    LossWeights,
    binary_label,
    combined_loss,
    combined_loss_grad,
    fidelity_loss,
    mse_pair_loss,
    pair_label,
    pairwise_prob,
    std_normal_cdf,
)
from .metrics import MetricsReport, average_ranks, compute_report, krcc, mae, plcc, rmse, srcc
from .model import (
    BRANCHES,
    FeatureExtractorSpec,
    QualityModel,
    batch_pair_loss,
    branch_params,
    extract_features,
    forward_backward,
    fuse,
    init_model,
    predict_batch,
    predict_quality,
)
from .preprocess import (
    BranchInputs,
    PreprocessConfig,
    SampleMode,
    aesthetic_view,
    fragment_view,
    grid_split,
    preprocess_triplet,
    salient_view,
)
from .train import (
    TrainConfig,
    TrainResult,
    evaluate,
    lr_at,
    optimizer_step,
    predict_dataset,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "BRANCHES",
    "BranchInputs",
    "Checkpoint",
    "DistortionKind",
    "DistortionRecipe",
    "FeatureExtractorSpec",
    "ImageCache",
    "LabeledSample",
    "LossWeights",
    "MacsBreakdown",
    "MetricsReport",
    "PreprocessConfig",
    "QualityModel",
    "QualityRegressor",
    "Rect",
    "SampleMode",
    "SplitSpec",
    "TrainConfig",
    "TrainResult",
    "TriqaError",
    "aesthetic_view",
    "all_pairs",
    "average_ranks",
    "batch_pair_loss",
    "binary_label",
    "branch_params",
    "combined_loss",
    "combined_loss_grad",
    "compute_report",
    "config_fingerprint",
    "crop",
    "decode_image",
    "encode_png",
    "evaluate",
    "extract_features",
    "fidelity_loss",
    "forward_backward",
    "fragment_view",
    "fullres_macs",
    "fuse",
    "generate_synthetic_dataset",
    "grid_split",
    "init_model",
    "krcc",
    "load_checkpoint",
    "load_labels",
    "lr_at",
    "macs_estimate",
    "macs_vs_resolution",
    "mae",
    "mse_pair_loss",
    "optimizer_step",
    "pair_label",
    "pairwise_prob",
    "plcc",
    "predict_batch",
    "predict_dataset",
    "predict_quality",
    "preprocess_triplet",
    "resize_bilinear",
    "rmse",
    "salient_view",
    "sample_pairs",
    "save_checkpoint",
    "save_labels",
    "split",
    "srcc",
    "std_normal_cdf",
    "synth_distort",
    "train",
    "evaluate",
]
