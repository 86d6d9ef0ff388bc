"""Loss and classification metrics."""

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.stats import rankdata

from .errors import EmptyBatchError, LengthMismatchError, SingleClassBatchError

DEFAULT_CLAMP_EPS = 1e-7
DEFAULT_THRESHOLD = 0.5


def _pair(p: ArrayLike, y: ArrayLike) -> tuple[NDArray[np.floating], NDArray[np.floating]]:
    probs = np.asarray(p)
    targets = np.asarray(y, dtype=np.float64)
    if probs.dtype.kind != "f":
        probs = probs.astype(np.float64)
    if probs.shape != targets.shape or probs.ndim != 1:
        raise LengthMismatchError(f"Predictions {probs.shape} and targets {targets.shape} must be equal-length vectors")
    if probs.size == 0:
        raise EmptyBatchError("Metric requested for an empty batch")
    return probs, targets


def bce_loss(p: ArrayLike, y: ArrayLike, eps: float = DEFAULT_CLAMP_EPS) -> tuple[float, NDArray[np.floating]]:
    """Mean binary cross-entropy and its gradient w.r.t. ``p``.

    Probabilities are clamped to ``[eps, 1 - eps]``; the gradient is taken at
    the clamped value.

    Args:
        p: Predicted probabilities
        y: Binary targets
        eps: Clamp width

    Returns:
        (loss, dL/dp) with the gradient in the dtype of ``p``

    Raises:
        LengthMismatchError: If the lengths differ
        EmptyBatchError: If both are empty
    """
    probs, targets = _pair(p, y)
    clamped = np.clip(probs.astype(np.float64), eps, 1.0 - eps)
    loss = -np.mean(targets * np.log(clamped) + (1.0 - targets) * np.log1p(-clamped))
    grad = (-targets / clamped + (1.0 - targets) / (1.0 - clamped)) / probs.size
    return float(loss), grad.astype(probs.dtype)


def accuracy(p: ArrayLike, y: ArrayLike, threshold: float = DEFAULT_THRESHOLD) -> float:
    """Fraction of windows where ``p > threshold`` matches the target."""
    probs, targets = _pair(p, y)
    return float(np.mean((probs > threshold) == (targets == 1.0)))


def roc_auc(p: ArrayLike, y: ArrayLike) -> float:
    """Area under the ROC curve as the Mann-Whitney statistic.

    Tied positive/negative pairs count one half. Computed from average ranks:
    ``U = R_pos - P(P+1)/2`` and ``AUC = U / (P * N)``.

    Raises:
        SingleClassBatchError: If only one class is present
    """
    probs, targets = _pair(p, y)
    positive = targets == 1.0
    n_pos = int(positive.sum())
    n_neg = probs.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassBatchError(f"AUC needs both classes, got {n_pos} positive and {n_neg} negative")
    ranks = rankdata(probs, method="average")
    u_statistic = float(ranks[positive].sum()) - n_pos * (n_pos + 1) / 2.0
    return u_statistic / (n_pos * n_neg)
