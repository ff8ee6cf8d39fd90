"""Dense numeric kernels shared by the rest of the package.

Everything operates on float64 numpy arrays. Array inputs are validated
once at the public boundary (rank, nonemptiness, finiteness); code further
down the stack may assume validated data.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    DegenerateNormError,
    InvalidShapeError,
    NonFiniteError,
    ShapeMismatchError,
    SimplexViolationError,
)

# Norms at or below this are treated as unusable (zero) vectors; failing
# loudly beats silently producing NaN cosines.
NORM_EPS = 1e-12

# Floor applied to the reference distribution inside kl_divergence: softmax
# outputs can underflow to exact zero in extreme logit regimes.
KL_FLOOR = 1e-12

# Tolerance for probability-simplex membership.
SIMPLEX_TOL = 1e-9


def as_vector(values, name: str = "vector") -> np.ndarray:
    """Coerce to a finite float64 1-d array with at least one entry."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] < 1:
        raise InvalidShapeError(
            f"{name} must be 1-d with at least one entry, got shape {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{name} contains NaN or Inf")
    return arr


def as_matrix(values, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite float64 2-d array with positive dimensions."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidShapeError(
            f"{name} must be 2-d with positive dimensions, got shape {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{name} contains NaN or Inf")
    return arr


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between two vectors, clamped to [-1, 1].

    Raises DegenerateNormError when either vector's norm is at or below
    NORM_EPS.
    """
    a = as_vector(a, "a")
    b = as_vector(b, "b")
    if a.shape != b.shape:
        raise ShapeMismatchError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na <= NORM_EPS or nb <= NORM_EPS:
        raise DegenerateNormError(
            f"vector norm {min(na, nb):.3e} is at or below {NORM_EPS:.0e}"
        )
    return float(np.clip(float(a @ b) / (na * nb), -1.0, 1.0))


def softmax(z) -> np.ndarray:
    """Numerically safe softmax of a vector (max-subtraction)."""
    z = as_vector(z, "z")
    e = np.exp(z - z.max())
    return e / e.sum()


def softmax_rows(z: np.ndarray) -> np.ndarray:
    """Row-wise softmax of a matrix."""
    z = as_matrix(z, "z")
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def _require_simplex(p: np.ndarray, name: str) -> None:
    total = float(p.sum())
    if abs(total - 1.0) > SIMPLEX_TOL:
        raise SimplexViolationError(f"{name} sums to {total!r}, not 1")
    if float(p.min()) < -SIMPLEX_TOL:
        raise SimplexViolationError(f"{name} has a negative entry {float(p.min())!r}")


def kl_divergence(p, q) -> float:
    """KL divergence sum(p * log(p / q)) with the 0*log(0) = 0 convention.

    q entries are floored at KL_FLOOR before the log so that underflowed
    softmax outputs do not blow up. Both inputs must lie on the probability
    simplex within SIMPLEX_TOL.
    """
    p = as_vector(p, "p")
    q = as_vector(q, "q")
    if p.shape != q.shape:
        raise ShapeMismatchError(f"length mismatch: {p.shape[0]} vs {q.shape[0]}")
    _require_simplex(p, "p")
    _require_simplex(q, "q")
    qf = np.maximum(q, KL_FLOOR)
    mask = p > 0.0
    pm = p[mask]
    return float(np.sum(pm * (np.log(pm) - np.log(qf[mask]))))
