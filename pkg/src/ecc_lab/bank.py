"""Running-mean class-center bank.

Each class keeps a running mean of the sample features and raw logit
vectors routed to it, plus a counter of how many samples contributed.
A fresh bank is randomly initialized, but the first update for a class
fully replaces that initialization: the stored row enters the mean with
weight equal to the counter, and the counter starts at zero. The random
rows therefore only matter for classes that have never been updated (they
still feed the similarity matrix untrained).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidShapeError, NonMonotonicEpochError, ShapeMismatchError
from .linalg import as_vector

# Initialization range for center rows; small enough that initial cosines
# carry no signal while keeping norms comfortably away from zero.
INIT_RANGE = 0.1


@dataclass(frozen=True)
class CenterSnapshot:
    """Immutable copy of the center features at the end of one epoch."""

    epoch: int
    center_features: np.ndarray  # (N, D), never mutated after capture


class CenterBank:
    """Per-class running means of features and logits with update counters.

    Single-writer: update/snapshot need exclusive access; reads may be
    concurrent between writes.
    """

    def __init__(self, num_classes: int, feature_dim: int, seed: int):
        if num_classes < 2:
            raise InvalidShapeError(
                f"need at least 2 classes for a similar-nontarget class, got {num_classes}"
            )
        if feature_dim < 1:
            raise InvalidShapeError(f"feature_dim must be positive, got {feature_dim}")
        self.num_classes = int(num_classes)
        self.feature_dim = int(feature_dim)
        self.rng_seed = int(seed)
        rng = np.random.default_rng(self.rng_seed)
        self.center_features = rng.uniform(
            -INIT_RANGE, INIT_RANGE, size=(self.num_classes, self.feature_dim)
        )
        self.center_logits = rng.uniform(
            -INIT_RANGE, INIT_RANGE, size=(self.num_classes, self.num_classes)
        )
        self.counters = np.zeros(self.num_classes, dtype=np.int64)
        self.snapshots: list[CenterSnapshot] = []

    def update(self, y: int, feature, logits) -> None:
        """Fold one sample's feature and logit vector into class y's means."""
        if not 0 <= y < self.num_classes:
            raise IndexError(f"class index {y} out of range [0, {self.num_classes})")
        feature = as_vector(feature, "feature")
        logits = as_vector(logits, "logits")
        if feature.shape[0] != self.feature_dim:
            raise ShapeMismatchError(
                f"feature length {feature.shape[0]} != bank feature_dim {self.feature_dim}"
            )
        if logits.shape[0] != self.num_classes:
            raise ShapeMismatchError(
                f"logits length {logits.shape[0]} != bank num_classes {self.num_classes}"
            )
        c = self.counters[y]
        self.center_features[y] = (feature + c * self.center_features[y]) / (c + 1)
        self.center_logits[y] = (logits + c * self.center_logits[y]) / (c + 1)
        self.counters[y] = c + 1

    def snapshot(self, epoch: int) -> CenterSnapshot:
        """Deep-copy the current center features under a new epoch number."""
        epoch = int(epoch)
        if self.snapshots and epoch <= self.snapshots[-1].epoch:
            raise NonMonotonicEpochError(
                f"epoch {epoch} is not greater than stored epoch {self.snapshots[-1].epoch}"
            )
        snap = CenterSnapshot(epoch=epoch, center_features=self.center_features.copy())
        self.snapshots.append(snap)
        return snap

    def reset_counters(self) -> None:
        """Zero the counters so the next update per class restarts its mean."""
        self.counters[:] = 0


def center_drift(a: CenterSnapshot, b: CenterSnapshot) -> tuple[np.ndarray, float]:
    """Per-class Euclidean distance between two snapshots, and its mean."""
    if a.center_features.shape != b.center_features.shape:
        raise ShapeMismatchError(
            f"snapshot shapes differ: {a.center_features.shape} vs {b.center_features.shape}"
        )
    per_class = np.linalg.norm(a.center_features - b.center_features, axis=1)
    return per_class, float(per_class.mean())
