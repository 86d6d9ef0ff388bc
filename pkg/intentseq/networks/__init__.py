"""Sequence classifiers for crossing intent: stacked LSTM, stacked GRU and 1D CNN.

Every kind ends in a linear map to one logit followed by a sigmoid. The
functions here dispatch on ``ModelConfig.kind``.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import EmptyBatchError, InvalidKindError
from ..metrics import DEFAULT_CLAMP_EPS, bce_loss
from ..models.intent import LayerSummary, ModelConfig, ModelKind, ModelSummary
from ..numeric import Array, sigmoid, sigmoid_grad
from .conv import conv1d_forward, conv_backward, conv_features
from .head import dropout_apply, dropout_mask, head_backward, head_forward
from .params import (
    GATE_ORDER,
    ModelParameters,
    count_params,
    init_params,
    parse_kind,
    tensor_shapes,
    zero_params,
)
from .recurrent import gru_cell, lstm_cell, recurrent_forward, stack_backward, stack_forward

DEFAULT_PREDICT_BATCH = 256

_DISPLAY_NAMES = {ModelKind.LSTM: "LSTM", ModelKind.GRU: "GRU", ModelKind.CNN1D: "CNN1D"}


@dataclass(frozen=True)
class LossAndGrads:
    """Mean BCE of one batch, its gradient per tensor, and the batch predictions."""

    loss: float
    grads: dict[str, Array]
    probabilities: Array


def forward(
    params: ModelParameters,
    features: Array,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> Array:
    """Probabilities [batch] for windows [batch, seq_len, input_size]."""
    config = params.config
    match config.kind:
        case ModelKind.LSTM | ModelKind.GRU:
            return recurrent_forward(features, config, params, training, rng)
        case ModelKind.CNN1D:
            return conv1d_forward(features, config, params, training)
        case _:
            raise InvalidKindError(f"Unsupported model kind {config.kind!r}")


def predict(params: ModelParameters, features: Array, batch_size: int = DEFAULT_PREDICT_BATCH) -> Array:
    """Eval-mode probabilities, computed ``batch_size`` windows at a time."""
    if len(features) == 0:
        raise EmptyBatchError("No windows to predict")
    chunks = [forward(params, features[start : start + batch_size]) for start in range(0, len(features), batch_size)]
    return np.concatenate(chunks)


def loss_and_grads(
    params: ModelParameters,
    features: Array,
    targets: Array,
    training: bool = False,
    rng: np.random.Generator | None = None,
    clamp_eps: float = DEFAULT_CLAMP_EPS,
) -> LossAndGrads:
    """Forward pass, mean BCE, and the analytic gradient of every tensor.

    Recurrent kinds backpropagate through time across the whole stack. In
    training mode the final hidden state is dropped out with a mask drawn from
    ``rng``.

    Args:
        params: Model parameters (float32 for training, float64 for checks)
        features: Windows [batch, seq_len, input_size]
        targets: Binary targets [batch]
        training: Apply dropout
        rng: Seeded generator used for the dropout mask
        clamp_eps: Probability clamp inside the log

    Returns:
        LossAndGrads with gradients keyed like ``params.tensors``
    """
    config = params.config
    head = params.head
    mask: Array | None = None

    if config.kind.is_recurrent:
        sequence, caches = stack_forward(features, params)
        pooled = sequence[:, -1, :]
        if training and config.dropout_p > 0.0:
            if rng is None:
                raise ValueError("Training-mode dropout needs a seeded generator")
            mask = dropout_mask(pooled.shape, config.dropout_p, rng, params.dtype)
            pooled = pooled * mask
    elif config.kind is ModelKind.CNN1D:
        pooled, conv_cache = conv_features(features, params)
    else:
        raise InvalidKindError(f"Unsupported model kind {config.kind!r}")

    probabilities = sigmoid(head_forward(pooled, head))
    loss, d_probs = bce_loss(probabilities, targets, clamp_eps)
    d_logits = d_probs * sigmoid_grad(probabilities)
    d_pooled, d_head_w, d_head_b = head_backward(d_logits, pooled, head)

    if config.kind.is_recurrent:
        if mask is not None:
            d_pooled = d_pooled * mask
        grads = stack_backward(d_pooled, caches, params)
    else:
        d_conv_w, d_conv_b = conv_backward(d_pooled, conv_cache, params.conv)
        grads = {"conv.w": d_conv_w, "conv.b": d_conv_b}
    grads["head.w"] = d_head_w
    grads["head.b"] = d_head_b
    ordered = {name: grads[name].astype(params.dtype, copy=False) for name in params.tensors}
    return LossAndGrads(loss, ordered, probabilities)


def model_summary(config: ModelConfig, batch_size: int = 32) -> ModelSummary:
    """Layer table with output shapes, parameter counts and multiply-adds."""
    shapes = tensor_shapes(config)
    name = _DISPLAY_NAMES[config.kind]
    head_params = sum(int(np.prod(shape)) for tensor, shape in shapes.items() if tensor.startswith("head."))
    body_params = count_params(config) - head_params
    hidden, steps = config.hidden, config.seq_len

    if config.kind.is_recurrent:
        gates = len(GATE_ORDER[config.kind])
        mult_adds = sum(
            steps * batch_size * (hidden + (config.input_size if layer == 0 else hidden)) * gates * hidden
            for layer in range(config.layers)
        )
        rows = [
            LayerSummary(
                name=f"{name}: 1-1",
                output_shape=[batch_size, steps, hidden],
                params=body_params,
                mult_adds=mult_adds,
            )
        ]
    else:
        out_steps = max(0, steps - config.kernel + 1)
        rows = [
            LayerSummary(
                name="Conv1d: 1-1",
                output_shape=[batch_size, hidden, out_steps],
                params=body_params,
                mult_adds=batch_size * out_steps * hidden * config.input_size * config.kernel,
            ),
            LayerSummary(name="ReLU: 1-2", output_shape=[batch_size, hidden, out_steps]),
            LayerSummary(name="AdaptiveAvgPool1d: 1-3", output_shape=[batch_size, hidden, 1]),
        ]
    rows.append(
        LayerSummary(
            name=f"Linear: 1-{len(rows) + 1}",
            output_shape=[batch_size, 1],
            params=head_params,
            mult_adds=batch_size * hidden,
        )
    )
    return ModelSummary(model=f"{name}Model", batch_size=batch_size, layers=rows)


__all__ = [
    "LossAndGrads",
    "ModelParameters",
    "count_params",
    "dropout_apply",
    "forward",
    "gru_cell",
    "init_params",
    "loss_and_grads",
    "lstm_cell",
    "model_summary",
    "parse_kind",
    "predict",
    "tensor_shapes",
    "zero_params",
]
