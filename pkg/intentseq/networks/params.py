"""Named parameter tensors for every model kind.

Tensor names carry the gate order of the combined recurrent matrices, e.g.
``lstm.0.w[f,i,c,o]`` or ``gru.1.b_hidden[r,z,h]``. Recurrent weights map the
concatenation ``[h_prev, x_t]`` (hidden rows first) to all gate pre-activations.
"""

import logging
from collections.abc import Mapping
from dataclasses import dataclass
from math import prod, sqrt
from typing import ClassVar

import numpy as np

from ..errors import InvalidKindError, ShapeMismatchError
from ..models.intent import ModelConfig, ModelKind
from ..numeric import DEFAULT_DTYPE, Array

logger = logging.getLogger(__name__)

GATE_ORDER: dict[ModelKind, tuple[str, ...]] = {
    ModelKind.LSTM: ("f", "i", "c", "o"),
    ModelKind.GRU: ("r", "z", "h"),
}


def parse_kind(value: str | ModelKind) -> ModelKind:
    """Resolve a model kind name.

    Raises:
        InvalidKindError: If ``value`` names no supported architecture
    """
    try:
        return ModelKind(str(value).strip().lower())
    except ValueError as e:
        choices = ", ".join(kind.value for kind in ModelKind)
        raise InvalidKindError(f"Unknown model kind {value!r}; expected one of {choices}") from e


def recurrent_names(kind: ModelKind, layer: int) -> tuple[str, str, str]:
    """Names of (w, b_input, b_hidden) for one recurrent layer."""
    tag = f"[{','.join(GATE_ORDER[kind])}]"
    prefix = f"{kind.value}.{layer}"
    return f"{prefix}.w{tag}", f"{prefix}.b_input{tag}", f"{prefix}.b_hidden{tag}"


def tensor_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Ordered tensor names and shapes implied by ``config``.

    Raises:
        InvalidKindError: For an unsupported kind
    """
    shapes: dict[str, tuple[int, ...]] = {}
    hidden = config.hidden
    match config.kind:
        case ModelKind.LSTM | ModelKind.GRU:
            width = len(GATE_ORDER[config.kind]) * hidden
            for layer in range(config.layers):
                fan_in = config.input_size if layer == 0 else hidden
                w, b_input, b_hidden = recurrent_names(config.kind, layer)
                shapes[w] = (hidden + fan_in, width)
                shapes[b_input] = (width,)
                shapes[b_hidden] = (width,)
        case ModelKind.CNN1D:
            shapes["conv.w"] = (hidden, config.input_size, config.kernel)
            shapes["conv.b"] = (hidden,)
        case _:
            raise InvalidKindError(f"Unsupported model kind {config.kind!r}")
    shapes["head.w"] = (hidden, 1)
    shapes["head.b"] = (1,)
    return shapes


def count_params(config: ModelConfig) -> int:
    """Exact number of trainable scalars, head included."""
    return sum(prod(shape) for shape in tensor_shapes(config).values())


@dataclass(frozen=True)
class RecurrentLayerParameters:
    """Combined gate weights and the two bias vectors of one recurrent layer."""

    gates: ClassVar[int] = 0

    w: Array
    b_input: Array
    b_hidden: Array

    @property
    def hidden(self) -> int:
        return self.w.shape[1] // self.gates

    @property
    def input_size(self) -> int:
        return self.w.shape[0] - self.hidden

    @property
    def bias(self) -> Array:
        """Biases enter every pre-activation as a sum."""
        return self.b_input + self.b_hidden

    @property
    def count(self) -> int:
        return self.w.size + self.b_input.size + self.b_hidden.size


class LstmLayerParameters(RecurrentLayerParameters):
    gates = 4


class GruLayerParameters(RecurrentLayerParameters):
    gates = 3


@dataclass(frozen=True)
class Conv1dParameters:
    """Kernel [out_channels, in_channels, k] and per-channel bias."""

    w: Array
    b: Array

    @property
    def kernel(self) -> int:
        return self.w.shape[2]

    @property
    def count(self) -> int:
        return self.w.size + self.b.size


@dataclass(frozen=True)
class HeadParameters:
    """Linear map hidden -> 1 ahead of the sigmoid."""

    w: Array
    b: Array

    @property
    def count(self) -> int:
        return self.w.size + self.b.size


_LAYER_TYPES: dict[ModelKind, type[RecurrentLayerParameters]] = {
    ModelKind.LSTM: LstmLayerParameters,
    ModelKind.GRU: GruLayerParameters,
}


@dataclass(frozen=True)
class ModelParameters:
    """All tensors of one model, keyed by name, read-only once built."""

    config: ModelConfig
    tensors: Mapping[str, Array]

    def __post_init__(self) -> None:
        expected = tensor_shapes(self.config)
        if list(self.tensors) != list(expected):
            raise ShapeMismatchError(
                f"Tensor names {list(self.tensors)} do not match {self.config.kind.value} layout {list(expected)}"
            )
        dtypes = {np.asarray(t).dtype for t in self.tensors.values()}
        if len(dtypes) != 1:
            raise ShapeMismatchError(f"Tensors mix dtypes {sorted(str(d) for d in dtypes)}")
        frozen: dict[str, Array] = {}
        for name, shape in expected.items():
            tensor = np.array(self.tensors[name])
            if tensor.shape != shape:
                raise ShapeMismatchError(f"Tensor {name} has shape {tensor.shape}, expected {shape}")
            tensor.setflags(write=False)
            frozen[name] = tensor
        object.__setattr__(self, "tensors", frozen)

    def __getitem__(self, name: str) -> Array:
        return self.tensors[name]

    @property
    def dtype(self) -> np.dtype[np.floating]:
        return next(iter(self.tensors.values())).dtype

    @property
    def count(self) -> int:
        return sum(t.size for t in self.tensors.values())

    def astype(self, dtype: type[np.floating]) -> "ModelParameters":
        return ModelParameters(self.config, {n: t.astype(dtype) for n, t in self.tensors.items()})

    def replace(self, updates: Mapping[str, Array]) -> "ModelParameters":
        """Copy with some tensors swapped out."""
        unknown = set(updates) - set(self.tensors)
        if unknown:
            raise ShapeMismatchError(f"Unknown tensors {sorted(unknown)}")
        merged = {name: updates.get(name, tensor) for name, tensor in self.tensors.items()}
        return ModelParameters(self.config, merged)

    @property
    def recurrent_layers(self) -> list[RecurrentLayerParameters]:
        if not self.config.kind.is_recurrent:
            raise InvalidKindError(f"{self.config.kind.value} has no recurrent layers")
        layer_type = _LAYER_TYPES[self.config.kind]
        return [
            layer_type(*(self.tensors[name] for name in recurrent_names(self.config.kind, layer)))
            for layer in range(self.config.layers)
        ]

    @property
    def conv(self) -> Conv1dParameters:
        if self.config.kind is not ModelKind.CNN1D:
            raise InvalidKindError(f"{self.config.kind.value} has no convolution")
        return Conv1dParameters(self.tensors["conv.w"], self.tensors["conv.b"])

    @property
    def head(self) -> HeadParameters:
        return HeadParameters(self.tensors["head.w"], self.tensors["head.b"])


def init_bound(config: ModelConfig, name: str) -> float:
    """Half-width of the uniform initialisation range for tensor ``name``."""
    if name.startswith("conv."):
        return 1.0 / sqrt(config.input_size * config.kernel)
    return 1.0 / sqrt(config.hidden)


def init_params(config: ModelConfig, seed: int, dtype: type[np.floating] = DEFAULT_DTYPE) -> ModelParameters:
    """Draw every tensor uniformly from its bound, in canonical order.

    Recurrent and head tensors use ``1/sqrt(hidden)``; the convolution uses
    ``1/sqrt(in_channels * kernel)``.
    """
    rng = np.random.default_rng(seed)
    tensors: dict[str, Array] = {}
    for name, shape in tensor_shapes(config).items():
        bound = init_bound(config, name)
        tensors[name] = rng.uniform(-bound, bound, size=shape).astype(dtype)
    logger.debug(f"Initialised {config.kind.value} parameters with seed {seed}")
    return ModelParameters(config, tensors)


def zero_params(config: ModelConfig, dtype: type[np.floating] = DEFAULT_DTYPE) -> ModelParameters:
    """All-zero parameters; every kind then predicts exactly 0.5."""
    zeros = {name: np.zeros(shape, dtype=dtype) for name, shape in tensor_shapes(config).items()}
    return ModelParameters(config, zeros)
