"""Binary checkpoint format.

Layout (little-endian)::

    b"PSEQ" | version u8 | kind u8 (1=lstm, 2=gru, 3=cnn1d)
    input, hidden, layers, kernel, seq_len: u32 | dropout_p: f32
    tensor count: u32
    per tensor: name length u32 | UTF-8 name | rank u32 | dims u32 * rank | f32 data
    best_val_auc: f64 | seed: u64 | epoch: u32
"""

import logging
import struct
from dataclasses import dataclass
from io import BytesIO
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from .errors import (
    BadMagicError,
    CheckpointError,
    InvalidKindError,
    ShapeMismatchError,
    TruncatedFileError,
    VersionMismatchError,
)
from .models.intent import ModelConfig, ModelKind
from .networks import ModelParameters, tensor_shapes
from .utils import atomic_write_bytes

logger = logging.getLogger(__name__)

MAGIC = b"PSEQ"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<4sBB5If")
_TRAILER = struct.Struct("<dQI")
_U32 = struct.Struct("<I")
_TENSOR_DTYPE = np.dtype("<f4")


@dataclass(frozen=True)
class Checkpoint:
    """Model parameters captured at the best validation epoch."""

    params: ModelParameters
    best_val_auc: float = 0.0
    seed: int = 0
    epoch: int = 0

    @property
    def config(self) -> ModelConfig:
        return self.params.config

    @property
    def kind(self) -> ModelKind:
        return self.params.config.kind


def encode_checkpoint(checkpoint: Checkpoint) -> bytes:
    """Serialise ``checkpoint``; tensors are stored as 32-bit floats."""
    config = checkpoint.config
    out = BytesIO()
    out.write(
        _HEADER.pack(
            MAGIC,
            FORMAT_VERSION,
            config.kind.code,
            config.input_size,
            config.hidden,
            config.layers,
            config.kernel,
            config.seq_len,
            config.dropout_p,
        )
    )
    out.write(_U32.pack(len(checkpoint.params.tensors)))
    for name, tensor in checkpoint.params.tensors.items():
        encoded = name.encode("utf-8")
        out.write(_U32.pack(len(encoded)))
        out.write(encoded)
        out.write(_U32.pack(tensor.ndim))
        out.write(struct.pack(f"<{tensor.ndim}I", *tensor.shape))
        out.write(np.ascontiguousarray(tensor, dtype=_TENSOR_DTYPE).tobytes())
    out.write(_TRAILER.pack(checkpoint.best_val_auc, checkpoint.seed, checkpoint.epoch))
    return out.getvalue()


class _Reader:
    def __init__(self, payload: bytes):
        self.payload = payload
        self.offset = 0

    def take(self, size: int, what: str) -> bytes:
        end = self.offset + size
        if end > len(self.payload):
            raise TruncatedFileError(f"Checkpoint ends inside {what} (offset {self.offset}, need {size} bytes)")
        chunk = self.payload[self.offset : end]
        self.offset = end
        return chunk

    def unpack(self, layout: struct.Struct, what: str) -> tuple[object, ...]:
        return layout.unpack(self.take(layout.size, what))

    def u32(self, what: str) -> int:
        return int(_U32.unpack(self.take(_U32.size, what))[0])


def decode_checkpoint(payload: bytes) -> Checkpoint:
    """Parse checkpoint bytes.

    Raises:
        BadMagicError: If the magic is wrong
        VersionMismatchError: If the format version is unsupported
        InvalidKindError: If the kind byte is unknown
        ShapeMismatchError: If tensor names or shapes disagree with the stored config
        TruncatedFileError: If the payload ends early
    """
    reader = _Reader(payload)
    if payload[: len(MAGIC)] != MAGIC:
        raise BadMagicError(f"Expected magic {MAGIC!r}, found {payload[: len(MAGIC)]!r}")
    _, version, kind_code, input_size, hidden, layers, kernel, seq_len, dropout_p = reader.unpack(_HEADER, "header")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"Checkpoint version {version} is not supported (expected {FORMAT_VERSION})")
    try:
        kind = ModelKind.from_code(int(kind_code))  # type: ignore[arg-type]
    except ValueError as e:
        raise InvalidKindError(f"Unknown model kind byte {kind_code}") from e
    try:
        config = ModelConfig(
            kind=kind,
            input_size=input_size,
            hidden=hidden,
            layers=layers,
            kernel=kernel,
            seq_len=seq_len,
            # shortest decimal that round-trips the stored 32-bit value
            dropout_p=float(str(np.float32(dropout_p))),
        )
    except ValidationError as e:
        raise ShapeMismatchError(f"Checkpoint header holds an invalid configuration: {e}") from e

    expected = tensor_shapes(config)
    count = reader.u32("tensor count")
    if count != len(expected):
        raise ShapeMismatchError(f"Checkpoint holds {count} tensors, {config.kind.value} config needs {len(expected)}")

    tensors: dict[str, np.ndarray] = {}
    for index in range(count):
        name_bytes = reader.take(reader.u32(f"tensor {index} name length"), f"tensor {index} name")
        try:
            name = name_bytes.decode("utf-8")
        except UnicodeDecodeError as e:
            raise CheckpointError(f"Tensor {index} name is not valid UTF-8") from e
        rank = reader.u32(f"{name} rank")
        dims = struct.unpack(f"<{rank}I", reader.take(4 * rank, f"{name} dims"))
        if name not in expected or tuple(dims) != expected[name]:
            raise ShapeMismatchError(f"Tensor {name} {tuple(dims)} does not fit the stored {config.kind.value} config")
        size = int(np.prod(dims, dtype=np.int64)) * _TENSOR_DTYPE.itemsize
        data = np.frombuffer(reader.take(size, f"{name} data"), dtype=_TENSOR_DTYPE)
        tensors[name] = data.reshape(dims).astype(np.float32)

    best_val_auc, seed, epoch = reader.unpack(_TRAILER, "trailer")
    if reader.offset != len(payload):
        raise CheckpointError(f"{len(payload) - reader.offset} unexpected bytes after the trailer")
    return Checkpoint(
        params=ModelParameters(config, tensors),
        best_val_auc=float(best_val_auc),  # type: ignore[arg-type]
        seed=int(seed),  # type: ignore[arg-type]
        epoch=int(epoch),  # type: ignore[arg-type]
    )


def save_checkpoint(checkpoint: Checkpoint, path: str | Path) -> None:
    """Write ``checkpoint`` atomically."""
    atomic_write_bytes(Path(path), encode_checkpoint(checkpoint))
    logger.info(
        f"Saved {checkpoint.kind.value} checkpoint to {path} (epoch {checkpoint.epoch}, "
        f"val AUC {checkpoint.best_val_auc:.4f})"
    )


def load_checkpoint(path: str | Path) -> Checkpoint:
    """Read a checkpoint written by ``save_checkpoint``."""
    checkpoint = decode_checkpoint(Path(path).read_bytes())
    logger.info(f"Loaded {checkpoint.config.summary} from {path}")
    return checkpoint
