"""Dropout and the linear-sigmoid head shared by all kinds."""

import numpy as np

from ..numeric import Array, matmul
from .params import HeadParameters


def dropout_mask(shape: tuple[int, ...], p: float, rng: np.random.Generator, dtype: np.dtype[np.floating]) -> Array:
    """Inverted-dropout multiplier: 0 with probability ``p``, else ``1/(1-p)``."""
    keep = rng.random(shape) >= p
    return (keep / (1.0 - p)).astype(dtype)


def dropout_apply(h: Array, p: float, training: bool, rng: np.random.Generator | None = None) -> Array:
    """Inverted dropout in training mode, identity otherwise.

    Args:
        h: Activations
        p: Drop probability in [0, 1)
        training: Whether dropout is active
        rng: Seeded generator; required when ``training`` and ``p > 0``

    Returns:
        Masked and rescaled activations, or ``h`` itself
    """
    if not 0.0 <= p < 1.0:
        raise ValueError(f"Dropout probability must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return h
    if rng is None:
        raise ValueError("Training-mode dropout needs a seeded generator")
    return h * dropout_mask(h.shape, p, rng, h.dtype)


def head_forward(features: Array, head: HeadParameters) -> Array:
    """Logit per row: ``features @ w + b`` flattened to [batch]."""
    return matmul(features, head.w)[:, 0] + head.b[0]


def head_backward(d_logits: Array, features: Array, head: HeadParameters) -> tuple[Array, Array, Array]:
    """Returns (d_features, d_w, d_b) for the head given dL/dlogit [batch]."""
    d_column = d_logits[:, None]
    d_w = matmul(features.T, d_column)
    d_b = np.array([d_logits.sum()], dtype=head.b.dtype)
    return matmul(d_column, head.w.T), d_w, d_b
