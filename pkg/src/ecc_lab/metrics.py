"""Geometric and soft-label diagnostics over trained feature spaces."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bank import CenterBank
from .errors import ConvergenceError, EmptyClassError, InvalidShapeError, UnseenClassError
from .linalg import as_matrix, softmax_rows
from .loss import SimilarityMatrix

PCA_TOL = 1e-9
PCA_MAX_ITER = 1000


@dataclass(frozen=True)
class GeometryReport:
    """Cluster compactness and separation of a labeled feature set.

    intra_class_variance: mean over classes of the mean squared Euclidean
    distance from samples to their empirical class centroid.
    nearest_nontarget_margin: mean over classes of the distance from each
    class centroid to its nearest other centroid.
    """

    intra_class_variance: float
    nearest_nontarget_margin: float
    per_class_variance: np.ndarray  # (N,)
    per_class_margin: np.ndarray  # (N,)

    def to_dict(self) -> dict:
        return {
            "intra_class_variance": self.intra_class_variance,
            "nearest_nontarget_margin": self.nearest_nontarget_margin,
            "per_class_variance": self.per_class_variance.tolist(),
            "per_class_margin": self.per_class_margin.tolist(),
        }


@dataclass(frozen=True)
class SoftLabelReport:
    """Per-class soft labels with confidence split by nontarget category."""

    soft_labels: np.ndarray  # (N, N), rows on the simplex
    similar_confidence: np.ndarray  # (N,), confidence at the most similar class
    other_nontarget_mean: np.ndarray  # (N,), mean over the remaining nontargets

    def to_dict(self) -> dict:
        return {
            "soft_labels": self.soft_labels.tolist(),
            "similar_confidence": self.similar_confidence.tolist(),
            "other_nontarget_mean": self.other_nontarget_mean.tolist(),
        }


def geometry_report(features, labels) -> GeometryReport:
    """Compactness/separation statistics; every class needs >= 2 samples."""
    features = as_matrix(features, "features")
    labels = np.asarray(labels, dtype=np.int64)
    if labels.ndim != 1 or labels.shape[0] != features.shape[0]:
        raise InvalidShapeError("labels must be 1-d and match the feature rows")
    n = int(labels.max()) + 1 if labels.size else 0
    if n < 2:
        raise InvalidShapeError("need at least 2 classes")
    centroids = np.empty((n, features.shape[1]))
    variances = np.empty(n)
    for y in range(n):
        rows = features[labels == y]
        if rows.shape[0] < 2:
            raise EmptyClassError(f"class {y} has fewer than 2 samples")
        centroids[y] = rows.mean(axis=0)
        variances[y] = float(np.mean(np.sum((rows - centroids[y]) ** 2, axis=1)))
    diff = centroids[:, None, :] - centroids[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=2))
    np.fill_diagonal(dist, np.inf)
    margins = dist.min(axis=1)
    return GeometryReport(
        intra_class_variance=float(variances.mean()),
        nearest_nontarget_margin=float(margins.mean()),
        per_class_variance=variances,
        per_class_margin=margins,
    )


def soft_label_report(bank: CenterBank, sim: SimilarityMatrix) -> SoftLabelReport:
    """Softmax of every center logit row, split by the similarity argmax.

    Raises UnseenClassError if any class has never been updated; its logit
    row would still be random initialization noise.
    """
    unseen = np.flatnonzero(bank.counters == 0)
    if unseen.size:
        raise UnseenClassError(f"classes never updated: {unseen.tolist()}")
    n = bank.num_classes
    q = softmax_rows(bank.center_logits)
    rows = np.arange(n)
    similar = sim.most_similar
    similar_confidence = q[rows, similar]
    own = q[rows, rows]
    if n > 2:
        other_mean = (1.0 - own - similar_confidence) / (n - 2)
    else:
        other_mean = np.full(n, np.nan)
    return SoftLabelReport(
        soft_labels=q,
        similar_confidence=similar_confidence,
        other_nontarget_mean=other_mean,
    )


def _power_iteration(cov: np.ndarray, start: np.ndarray) -> tuple[float, np.ndarray]:
    v = start / np.linalg.norm(start)
    eigval = float(v @ cov @ v)
    for _ in range(PCA_MAX_ITER):
        w = cov @ v
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            # start vector is in the null space; the eigenvalue is zero
            return 0.0, v
        v = w / norm
        eigval = float(v @ cov @ v)
        residual = float(np.linalg.norm(cov @ v - eigval * v))
        if residual <= PCA_TOL * max(1.0, abs(eigval)):
            return eigval, v
    raise ConvergenceError(
        f"power iteration did not converge within {PCA_MAX_ITER} iterations"
    )


def pca_project(features, k: int = 2) -> np.ndarray:
    """Project onto the top-k principal components via power iteration.

    Components are extracted by deflation; each component's sign is fixed
    by making its largest-magnitude loading positive, so the projection is
    fully deterministic.
    """
    x = as_matrix(features, "features")
    m, d = x.shape
    if m < 2 or d < 2:
        raise InvalidShapeError(f"need at least 2 samples and 2 dims, got {x.shape}")
    if not 1 <= k <= d:
        raise InvalidShapeError(f"k must lie in [1, {d}], got {k}")
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / (m - 1)
    rng = np.random.default_rng(0)
    components = np.empty((k, d))
    for comp in range(k):
        eigval, v = _power_iteration(cov, rng.normal(size=d))
        idx = int(np.argmax(np.abs(v)))
        if v[idx] < 0:
            v = -v
        components[comp] = v
        cov = cov - eigval * np.outer(v, v)
    return centered @ components.T
