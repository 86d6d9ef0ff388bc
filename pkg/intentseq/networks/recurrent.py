"""Stacked LSTM and GRU layers with backpropagation through time."""

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from ..errors import InvalidKindError, ShapeMismatchError
from ..models.intent import ModelConfig
from ..numeric import Array, concat_rows, matmul, sigmoid, sigmoid_grad, tanh, tanh_grad, widen, widened_affine
from .head import dropout_apply, head_forward
from .params import (
    GruLayerParameters,
    LstmLayerParameters,
    ModelParameters,
    RecurrentLayerParameters,
    recurrent_names,
)


@dataclass(frozen=True)
class RecurrentState:
    """Hidden state ``h`` and, for LSTM layers, cell state ``c`` ([batch, hidden] each)."""

    h: Array
    c: Array | None = None

    @classmethod
    def zeros(cls, batch: int, layer: RecurrentLayerParameters) -> "RecurrentState":
        h = np.zeros((batch, layer.hidden), dtype=layer.w.dtype)
        c = np.zeros_like(h) if isinstance(layer, LstmLayerParameters) else None
        return cls(h, c)


@dataclass(frozen=True)
class LstmGates:
    """Forget, input, candidate and output activations of one step."""

    f: Array
    i: Array
    g: Array
    o: Array


@dataclass(frozen=True)
class GruGates:
    """Reset, update and candidate activations of one step."""

    r: Array
    z: Array
    h_tilde: Array


GateActivations = LstmGates | GruGates


@dataclass(frozen=True)
class StepCache:
    x: Array
    prev: RecurrentState
    gates: GateActivations
    state: RecurrentState


def _check_step(x_t: Array, state: RecurrentState, p: RecurrentLayerParameters) -> None:
    if x_t.ndim != 2 or x_t.shape[1] != p.input_size:
        raise ShapeMismatchError(f"Step input must be [batch, {p.input_size}], got {x_t.shape}")
    if state.h.shape != (x_t.shape[0], p.hidden):
        raise ShapeMismatchError(f"Hidden state must be [{x_t.shape[0]}, {p.hidden}], got {state.h.shape}")


@dataclass(frozen=True)
class StepWeights:
    """Hidden-state rows of one layer's weights, widened once per pass.

    GRU layers append a negated copy of the update block to ``gates`` so a
    single sigmoid yields r, z and ``1 - z = sigmoid(-a_z)``.
    """

    gates: NDArray[np.float64]
    candidate: NDArray[np.float64] | None = None

    @classmethod
    def of(cls, p: RecurrentLayerParameters) -> "StepWeights":
        hidden = p.hidden
        w_h = p.w[:hidden]
        if isinstance(p, GruLayerParameters):
            gates = w_h[:, : 2 * hidden]
            return cls(widen(np.concatenate([gates, -gates[:, hidden:]], axis=1)), widen(w_h[:, 2 * hidden :]))
        return cls(widen(w_h))


def input_projection(x: Array, p: RecurrentLayerParameters) -> Array:
    """Input half of every pre-activation, ``x @ w_x + b_input + b_hidden``.

    Args:
        x: Inputs [rows, input_size]; a whole window flattens to batch * time rows
        p: Layer parameters

    Returns:
        [rows, 4 * hidden] laid out to match ``StepWeights``: LSTM (f, i, g, o),
        GRU (r, z, -z, h)
    """
    projected = matmul(x.astype(p.w.dtype, copy=False), p.w[p.hidden :]) + p.bias
    if isinstance(p, GruLayerParameters):
        hidden = p.hidden
        update = projected[:, hidden : 2 * hidden]
        projected = np.concatenate([projected[:, : 2 * hidden], -update, projected[:, 2 * hidden :]], axis=1)
    return projected


def _lstm_step(
    projected: Array, state: RecurrentState, weights: StepWeights, hidden: int
) -> tuple[RecurrentState, LstmGates]:
    assert state.c is not None
    pre = widened_affine(state.h, weights.gates, projected)
    gates = sigmoid(pre)
    f = gates[:, :hidden]
    i = gates[:, hidden : 2 * hidden]
    o = gates[:, 3 * hidden :]
    g = tanh(pre[:, 2 * hidden : 3 * hidden])
    c = f * state.c + i * g
    h = o * tanh(c)
    return RecurrentState(h, c), LstmGates(f, i, g, o)


def _gru_step(
    projected: Array, state: RecurrentState, weights: StepWeights, hidden: int
) -> tuple[RecurrentState, GruGates]:
    assert weights.candidate is not None
    coefficients = sigmoid(widened_affine(state.h, weights.gates, projected[:, : 3 * hidden]))
    r = coefficients[:, :hidden]
    z = coefficients[:, hidden : 2 * hidden]
    keep = coefficients[:, 2 * hidden :]
    h_tilde = tanh(widened_affine(r * state.h, weights.candidate, projected[:, 3 * hidden :]))
    h = keep * h_tilde + z * state.h
    return RecurrentState(h), GruGates(r, z, h_tilde)


def lstm_cell(x_t: Array, state: RecurrentState, p: LstmLayerParameters) -> tuple[RecurrentState, LstmGates]:
    """One LSTM step.

    The pre-activation ``[h_prev, x_t] @ w + b_input + b_hidden`` is split into
    forget, input, candidate and output blocks; then
    ``c = f*c_prev + i*g`` and ``h = o*tanh(c)``.
    """
    _check_step(x_t, state, p)
    if state.c is None or state.c.shape != state.h.shape:
        raise ShapeMismatchError("LSTM state needs a cell state shaped like h")
    return _lstm_step(input_projection(x_t, p), state, StepWeights.of(p), p.hidden)


def gru_cell(x_t: Array, state: RecurrentState, p: GruLayerParameters) -> tuple[RecurrentState, GruGates]:
    """One GRU step with the reset gate applied before the candidate matmul.

    ``h_tilde = tanh([r*h_prev, x_t] @ w_h + b_h)`` and
    ``h = (1 - z)*h_tilde + z*h_prev``.
    """
    _check_step(x_t, state, p)
    return _gru_step(input_projection(x_t, p), state, StepWeights.of(p), p.hidden)


def layer_forward(
    inputs: Array, p: RecurrentLayerParameters, keep_cache: bool = True
) -> tuple[Array, list[StepCache]]:
    """Run one layer over [batch, time, features] from a zero state.

    Input projections for every step are computed in one product before the
    time loop, leaving only the hidden-state products inside it.

    Args:
        inputs: Layer inputs [batch, time, input_size]
        p: Layer parameters
        keep_cache: Record per-step caches for ``layer_backward``

    Returns:
        Hidden sequence [batch, time, hidden] and the per-step caches (empty
        when ``keep_cache`` is false)
    """
    step: Callable[[Array, RecurrentState, StepWeights, int], tuple[RecurrentState, GateActivations]]
    if isinstance(p, LstmLayerParameters):
        step = _lstm_step
    elif isinstance(p, GruLayerParameters):
        step = _gru_step
    else:
        raise InvalidKindError(f"Unsupported recurrent layer {type(p).__name__}")
    batch, steps, width = inputs.shape
    projected = input_projection(inputs.reshape(batch * steps, width), p).reshape(batch, steps, -1)
    weights = StepWeights.of(p)
    state = RecurrentState.zeros(batch, p)
    outputs = np.empty((batch, steps, p.hidden), dtype=p.w.dtype)
    caches: list[StepCache] = []
    for t in range(steps):
        new_state, gates = step(projected[:, t, :], state, weights, p.hidden)
        if keep_cache:
            caches.append(StepCache(inputs[:, t, :], state, gates, new_state))
        outputs[:, t, :] = new_state.h
        state = new_state
    return outputs, caches


def _check_features(features: Array, config: ModelConfig) -> None:
    if features.ndim != 3 or features.shape[2] != config.input_size:
        raise ShapeMismatchError(f"Windows must be [batch, time, {config.input_size}], got {features.shape}")
    if features.shape[1] == 0:
        raise ShapeMismatchError("Windows must contain at least one frame")


def stack_forward(
    features: Array, params: ModelParameters, keep_cache: bool = True
) -> tuple[Array, list[list[StepCache]]]:
    """Hidden sequence of the top layer and the caches of every layer."""
    _check_features(features, params.config)
    sequence = features.astype(params.dtype, copy=False)
    caches: list[list[StepCache]] = []
    for layer in params.recurrent_layers:
        sequence, layer_caches = layer_forward(sequence, layer, keep_cache)
        caches.append(layer_caches)
    return sequence, caches


def recurrent_forward(
    features: Array,
    config: ModelConfig,
    params: ModelParameters,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> Array:
    """Crossing probability per window for a stacked LSTM or GRU.

    Args:
        features: Windows [batch, seq_len, input_size]
        config: Architecture; must match ``params``
        params: Model parameters
        training: Apply dropout to the final hidden state
        rng: Seeded generator, required when training with dropout

    Returns:
        Probabilities [batch]

    Raises:
        InvalidKindError: If ``config`` is not a recurrent kind
        ShapeMismatchError: If the windows or parameters do not fit ``config``
    """
    if not config.kind.is_recurrent:
        raise InvalidKindError(f"recurrent_forward cannot run {config.kind.value}")
    if params.config != config:
        raise ShapeMismatchError(f"Parameters were built for {params.config.summary}, not {config.summary}")
    sequence, _ = stack_forward(features, params, keep_cache=False)
    last = dropout_apply(sequence[:, -1, :], config.dropout_p, training, rng)
    return sigmoid(head_forward(last, params.head))


def _lstm_step_backward(
    dh: Array, dc: Array, cache: StepCache, p: RecurrentLayerParameters, dw: Array, db: Array
) -> tuple[Array, Array, Array]:
    gates = cache.gates
    assert isinstance(gates, LstmGates) and cache.state.c is not None and cache.prev.c is not None
    tanh_c = tanh(cache.state.c)
    d_o = dh * tanh_c
    dc_total = dc + dh * gates.o * tanh_grad(tanh_c)
    d_pre = np.concatenate(
        [
            dc_total * cache.prev.c * sigmoid_grad(gates.f),
            dc_total * gates.g * sigmoid_grad(gates.i),
            dc_total * gates.i * tanh_grad(gates.g),
            d_o * sigmoid_grad(gates.o),
        ],
        axis=1,
    )
    dw += matmul(concat_rows(cache.prev.h, cache.x).T, d_pre)
    db += d_pre.sum(axis=0)
    d_hx = matmul(d_pre, p.w.T)
    hidden = p.hidden
    return d_hx[:, hidden:], d_hx[:, :hidden], dc_total * gates.f


def _gru_step_backward(
    dh: Array, cache: StepCache, p: RecurrentLayerParameters, dw: Array, db: Array
) -> tuple[Array, Array]:
    gates = cache.gates
    assert isinstance(gates, GruGates)
    hidden = p.hidden
    h_prev = cache.prev.h
    d_candidate = dh * (1 - gates.z) * tanh_grad(gates.h_tilde)
    dz = dh * (h_prev - gates.h_tilde)
    dh_prev = dh * gates.z

    w_h = p.w[:, 2 * hidden :]
    dw[:, 2 * hidden :] += matmul(concat_rows(gates.r * h_prev, cache.x).T, d_candidate)
    db[2 * hidden :] += d_candidate.sum(axis=0)
    d_reset_input = matmul(d_candidate, w_h.T)
    dh_prev += d_reset_input[:, :hidden] * gates.r

    d_gates = np.concatenate(
        [d_reset_input[:, :hidden] * h_prev * sigmoid_grad(gates.r), dz * sigmoid_grad(gates.z)], axis=1
    )
    dw[:, : 2 * hidden] += matmul(concat_rows(h_prev, cache.x).T, d_gates)
    db[: 2 * hidden] += d_gates.sum(axis=0)
    d_hx = matmul(d_gates, p.w[:, : 2 * hidden].T)
    dh_prev += d_hx[:, :hidden]
    dx = d_reset_input[:, hidden:] + d_hx[:, hidden:]
    return dx, dh_prev


def layer_backward(
    d_outputs: Array, caches: list[StepCache], p: RecurrentLayerParameters
) -> tuple[Array, Array, Array]:
    """Backpropagation through time for one layer.

    Args:
        d_outputs: Loss gradient w.r.t. each step's hidden output [batch, time, hidden]
        caches: Step caches from ``layer_forward``
        p: Layer parameters

    Returns:
        (gradient w.r.t. the layer inputs [batch, time, input], dw, db) where
        ``db`` applies to both bias vectors
    """
    batch, steps, hidden = d_outputs.shape
    dw = np.zeros_like(p.w)
    db = np.zeros(p.w.shape[1], dtype=p.w.dtype)
    d_inputs = np.empty((batch, steps, p.input_size), dtype=p.w.dtype)
    dh_next = np.zeros((batch, hidden), dtype=p.w.dtype)
    dc_next = np.zeros_like(dh_next)
    lstm = isinstance(p, LstmLayerParameters)
    for t in reversed(range(steps)):
        dh = d_outputs[:, t, :] + dh_next
        if lstm:
            dx, dh_next, dc_next = _lstm_step_backward(dh, dc_next, caches[t], p, dw, db)
        else:
            dx, dh_next = _gru_step_backward(dh, caches[t], p, dw, db)
        d_inputs[:, t, :] = dx
    return d_inputs, dw, db


def stack_backward(
    d_last: Array, caches: list[list[StepCache]], params: ModelParameters
) -> dict[str, Array]:
    """Gradients of every recurrent tensor given dL/dh at the top layer's last step."""
    layers = params.recurrent_layers
    batch, hidden = d_last.shape
    steps = len(caches[-1])
    d_outputs = np.zeros((batch, steps, hidden), dtype=params.dtype)
    d_outputs[:, -1, :] = d_last
    grads: dict[str, Array] = {}
    for index in reversed(range(len(layers))):
        d_outputs, dw, db = layer_backward(d_outputs, caches[index], layers[index])
        w_name, b_input_name, b_hidden_name = recurrent_names(params.config.kind, index)
        grads[w_name] = dw
        grads[b_input_name] = db
        grads[b_hidden_name] = db.copy()
    return grads
