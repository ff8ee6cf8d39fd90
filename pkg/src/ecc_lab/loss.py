"""Batch loss terms and their analytic gradients.

Three components: a cosine pull/push against class centers (target center
attracts, the most similar nontarget center repels, weighted by how similar
that class is), a KL term against per-class soft labels derived from the
center logit means, and plain cross entropy. Center quantities and the
similarity weights are constants for gradient purposes: gradients flow into
the sample features and logits only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bank import CenterBank
from .errors import DegenerateNormError, InvalidShapeError, ShapeMismatchError
from .linalg import KL_FLOOR, NORM_EPS, as_matrix, softmax_rows


@dataclass(frozen=True)
class SimilarityMatrix:
    """Cosine similarities between class centers and each row's runner-up.

    most_similar[y] is the index of the class whose center is most similar
    to class y's center, y itself excluded, ties broken by lowest index.
    """

    s: np.ndarray  # (N, N)
    most_similar: np.ndarray  # (N,) int


@dataclass
class Batch:
    """One mini-batch of sample features, raw logits, and integer labels."""

    features: np.ndarray  # (M, D)
    logits: np.ndarray  # (M, N)
    labels: np.ndarray  # (M,)

    def __post_init__(self):
        self.features = as_matrix(self.features, "features")
        self.logits = as_matrix(self.logits, "logits")
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.ndim != 1:
            raise InvalidShapeError(f"labels must be 1-d, got shape {self.labels.shape}")
        m = self.features.shape[0]
        if self.logits.shape[0] != m or self.labels.shape[0] != m:
            raise ShapeMismatchError(
                f"batch sizes disagree: features {m}, logits {self.logits.shape[0]}, "
                f"labels {self.labels.shape[0]}"
            )
        n = self.logits.shape[1]
        if self.labels.min() < 0 or self.labels.max() >= n:
            raise IndexError(f"labels must lie in [0, {n})")

    @property
    def size(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True)
class LossResult:
    """Scalar loss terms plus gradients w.r.t. batch features and logits."""

    ce: float
    mcc: float
    clg: float
    total: float
    grad_features: np.ndarray  # (M, D)
    grad_logits: np.ndarray  # (M, N)


def build_similarity(bank: CenterBank) -> SimilarityMatrix:
    """Pairwise cosine similarity of center features plus per-row argmax.

    Raises DegenerateNormError naming the first class whose center norm is
    unusably small.
    """
    f = bank.center_features
    norms = np.linalg.norm(f, axis=1)
    bad = np.flatnonzero(norms <= NORM_EPS)
    if bad.size:
        raise DegenerateNormError(
            f"class {int(bad[0])} center feature has norm {norms[bad[0]]:.3e}"
        )
    unit = f / norms[:, None]
    s = np.clip(unit @ unit.T, -1.0, 1.0)
    masked = s.copy()
    np.fill_diagonal(masked, -np.inf)
    most_similar = np.argmax(masked, axis=1)
    return SimilarityMatrix(s=s, most_similar=most_similar)


def _cosine_rows(x, f, xn, fn):
    return np.clip(np.sum(x * f, axis=1) / (xn * fn), -1.0, 1.0)


def _dcos_rows(x, f, xn, fn, cos):
    # d cos(x, f) / dx = f / (|x||f|) - cos(x, f) * x / |x|^2
    return f / (xn * fn)[:, None] - (cos / xn**2)[:, None] * x


def mcc_loss(
    batch: Batch, bank: CenterBank, sim: SimilarityMatrix
) -> tuple[float, np.ndarray]:
    """Sum over the batch of 1 - cos(x, target center) + s * cos(x, rival center).

    s is the center-to-center similarity between the target class and its
    most similar nontarget class; higher s pushes harder. Returns the loss
    and its gradient w.r.t. the batch features; centers and s are constants.
    """
    x = batch.features
    y = batch.labels
    rival = sim.most_similar[y]
    s = sim.s[y, rival]
    ft = bank.center_features[y]
    fs = bank.center_features[rival]

    xn = np.linalg.norm(x, axis=1)
    if np.any(xn <= NORM_EPS):
        k = int(np.argmin(xn))
        raise DegenerateNormError(f"sample {k} feature has norm {xn[k]:.3e}")
    ftn = np.linalg.norm(ft, axis=1)
    fsn = np.linalg.norm(fs, axis=1)
    if np.any(ftn <= NORM_EPS) or np.any(fsn <= NORM_EPS):
        raise DegenerateNormError("a gathered center row has near-zero norm")

    cos_t = _cosine_rows(x, ft, xn, ftn)
    cos_s = _cosine_rows(x, fs, xn, fsn)
    loss = float(np.sum(1.0 - cos_t + s * cos_s))
    grad = -_dcos_rows(x, ft, xn, ftn, cos_t) + s[:, None] * _dcos_rows(
        x, fs, xn, fsn, cos_s
    )
    return loss, grad


def clg_loss(batch: Batch, bank: CenterBank) -> tuple[float, np.ndarray]:
    """Sum over the batch of KL(softmax(logits) || class soft label).

    The soft label for class y is the softmax of that class's running-mean
    logit row, treated as a constant. Returns the loss and its gradient
    w.r.t. the batch logits: p_j * (log(p_j / q_j) - KL) per element.
    """
    if batch.logits.shape[1] != bank.num_classes:
        raise ShapeMismatchError(
            f"logit width {batch.logits.shape[1]} != bank num_classes {bank.num_classes}"
        )
    p = softmax_rows(batch.logits)
    q = softmax_rows(bank.center_logits)[batch.labels]
    qf = np.maximum(q, KL_FLOOR)
    log_ratio = np.log(np.where(p > 0.0, p, 1.0)) - np.log(qf)
    terms = np.where(p > 0.0, p * log_ratio, 0.0)
    per_sample = terms.sum(axis=1)
    loss = float(per_sample.sum())
    grad = np.where(p > 0.0, p * (log_ratio - per_sample[:, None]), 0.0)
    return loss, grad


def ce_loss(batch: Batch) -> tuple[float, np.ndarray]:
    """Mean cross entropy over the batch with the standard softmax gradient."""
    z = batch.logits
    m = batch.size
    shifted = z - z.max(axis=1, keepdims=True)
    log_p = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    rows = np.arange(m)
    loss = float(-log_p[rows, batch.labels].sum() / m)
    grad = np.exp(log_p)
    grad[rows, batch.labels] -= 1.0
    grad /= m
    return loss, grad


def final_loss(
    batch: Batch,
    bank: CenterBank,
    sim: SimilarityMatrix,
    lambda1: float,
    lambda2: float,
) -> LossResult:
    """Cross entropy plus the weighted center terms.

    A component whose weight is zero is skipped entirely and reported as
    0.0, so a lambda1 = lambda2 = 0 run is exactly the plain-CE baseline
    (zero columns, zero feature gradients, no center-norm requirements).
    """
    if lambda1 < 0.0 or lambda2 < 0.0:
        raise ValueError("loss weights must be nonnegative")
    ce, grad_logits = ce_loss(batch)
    mcc = 0.0
    grad_features = np.zeros_like(batch.features)
    if lambda1 > 0.0:
        mcc, g = mcc_loss(batch, bank, sim)
        grad_features = lambda1 * g
    clg = 0.0
    if lambda2 > 0.0:
        clg, g = clg_loss(batch, bank)
        grad_logits = grad_logits + lambda2 * g
    total = ce + lambda1 * mcc + lambda2 * clg
    return LossResult(
        ce=ce,
        mcc=mcc,
        clg=clg,
        total=total,
        grad_features=grad_features,
        grad_logits=grad_logits,
    )
