"""Single-layer 1D CNN: valid cross-correlation, ReLU, global average pooling."""

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import InvalidKindError, SequenceTooShortError, ShapeMismatchError
from ..models.intent import ModelConfig, ModelKind
from ..numeric import Array, matmul, mean_over_time, relu, relu_grad, sigmoid
from .head import head_forward
from .params import Conv1dParameters, ModelParameters


@dataclass(frozen=True)
class ConvCache:
    columns: Array
    pre: Array
    pooled: Array


def _im2col(features: Array, kernel: int) -> Array:
    """[batch, time, channels] -> rows of [channels * kernel], one per (window, output step)."""
    batch, steps, channels = features.shape
    if steps < kernel:
        raise SequenceTooShortError(f"Window of {steps} frames is shorter than the kernel width {kernel}")
    # [batch, channels, out_steps, kernel]
    patches = sliding_window_view(features.transpose(0, 2, 1), kernel, axis=2)
    out_steps = steps - kernel + 1
    return patches.transpose(0, 2, 1, 3).reshape(batch * out_steps, channels * kernel)


def conv1d_feature_map(features: Array, conv: Conv1dParameters) -> tuple[Array, Array]:
    """Valid correlation ``y[o, t] = sum_{d, i} w[o, d, i] * x[d, t + i] + b[o]``.

    Returns:
        (im2col rows, pre-activation [batch, out_channels, seq_len - k + 1])
    """
    out_channels, in_channels, kernel = conv.w.shape
    if features.ndim != 3 or features.shape[2] != in_channels:
        raise ShapeMismatchError(f"Windows must be [batch, time, {in_channels}], got {features.shape}")
    batch, steps, _ = features.shape
    columns = _im2col(features, kernel)
    flat = matmul(columns, conv.w.reshape(out_channels, in_channels * kernel).T) + conv.b
    pre = flat.reshape(batch, steps - kernel + 1, out_channels).transpose(0, 2, 1)
    return columns, pre


def conv_features(features: Array, params: ModelParameters) -> tuple[Array, ConvCache]:
    """Pooled [batch, out_channels] features and the cache for the backward pass."""
    columns, pre = conv1d_feature_map(features.astype(params.dtype, copy=False), params.conv)
    pooled = mean_over_time(relu(pre))
    return pooled, ConvCache(columns, pre, pooled)


def conv1d_forward(
    features: Array, config: ModelConfig, params: ModelParameters, training: bool = False
) -> Array:
    """Crossing probability per window for the 1D CNN.

    ``training`` is accepted for a uniform call signature; the CNN carries no
    dropout.

    Raises:
        InvalidKindError: If ``config`` is not cnn1d
        SequenceTooShortError: If ``seq_len < kernel``
    """
    if config.kind is not ModelKind.CNN1D:
        raise InvalidKindError(f"conv1d_forward cannot run {config.kind.value}")
    if params.config != config:
        raise ShapeMismatchError(f"Parameters were built for {params.config.summary}, not {config.summary}")
    pooled, _ = conv_features(features, params)
    return sigmoid(head_forward(pooled, params.head))


def conv_backward(d_pooled: Array, cache: ConvCache, conv: Conv1dParameters) -> tuple[Array, Array]:
    """Gradients (d_w [out, in, k], d_b [out]) given dL/d(pooled features)."""
    batch, out_channels, out_steps = cache.pre.shape
    d_relu = np.broadcast_to((d_pooled / out_steps)[:, :, None], cache.pre.shape)
    d_pre = relu_grad(d_relu, cache.pre)
    d_flat = np.ascontiguousarray(d_pre.transpose(0, 2, 1)).reshape(batch * out_steps, out_channels)
    d_w = matmul(cache.columns.T, d_flat).T.reshape(conv.w.shape)
    return np.ascontiguousarray(d_w), d_flat.sum(axis=0)
