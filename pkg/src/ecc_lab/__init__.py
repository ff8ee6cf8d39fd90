"""Class-center loss laboratory.

A running-mean center bank, a cosine pull/push constraint against the most
similar rival class, soft labels distilled from per-class logit means, and
a small fully-inspectable training harness to study their geometry on
synthetic fine-grained data.
"""

from .bank import CenterBank, CenterSnapshot, center_drift
from .data import Dataset, SyntheticSpec, class_affinity_oracle, generate
from .linalg import cosine_similarity, kl_divergence, softmax
from .loss import (
    Batch,
    LossResult,
    SimilarityMatrix,
    build_similarity,
    ce_loss,
    clg_loss,
    final_loss,
    mcc_loss,
)
from .metrics import geometry_report, pca_project, soft_label_report
from .mlp import MlpModel
from .train import TrainConfig, TrainLog, evaluate, train

__version__ = "0.1.0"

__all__ = [
    "Batch",
    "CenterBank",
    "CenterSnapshot",
    "Dataset",
    "LossResult",
    "MlpModel",
    "SimilarityMatrix",
    "SyntheticSpec",
    "TrainConfig",
    "TrainLog",
    "build_similarity",
    "ce_loss",
    "center_drift",
    "class_affinity_oracle",
    "clg_loss",
    "cosine_similarity",
    "evaluate",
    "final_loss",
    "generate",
    "geometry_report",
    "kl_divergence",
    "mcc_loss",
    "pca_project",
    "soft_label_report",
    "softmax",
    "train",
    "__version__",
]
