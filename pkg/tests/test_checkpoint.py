"""Test the binary checkpoint format."""

import struct
import tempfile
import unittest
from pathlib import Path

import numpy as np

from intentseq.checkpoint import (
    FORMAT_VERSION,
    MAGIC,
    Checkpoint,
    decode_checkpoint,
    encode_checkpoint,
    load_checkpoint,
    save_checkpoint,
)
from intentseq.errors import (
    BadMagicError,
    CheckpointError,
    InvalidKindError,
    ShapeMismatchError,
    TruncatedFileError,
    VersionMismatchError,
)
from intentseq.models.intent import ModelConfig, ModelKind
from intentseq.networks import forward, init_params


class TestCheckpointRoundTrip(unittest.TestCase):
    """Test cases for saving and loading checkpoints."""

    def setUp(self):
        """Set up one checkpoint per kind."""
        self.checkpoints = [
            Checkpoint(
                params=init_params(ModelConfig(kind=kind, dropout_p=0.3), seed=5), best_val_auc=0.9375, seed=5, epoch=4
            )
            for kind in ModelKind
        ]
        self.windows = np.random.default_rng(0).random((6, 15, 66)).astype(np.float32)

    def test_round_trip_is_bitwise(self):
        """Test tensors, metadata and predictions survive a file round trip."""
        with tempfile.TemporaryDirectory() as tmp:
            for checkpoint in self.checkpoints:
                path = Path(tmp) / f"{checkpoint.kind.value}.ckpt"
                save_checkpoint(checkpoint, path)
                loaded = load_checkpoint(path)

                self.assertEqual(loaded.config, checkpoint.config)
                self.assertEqual(loaded.config.dropout_p, 0.3)
                self.assertEqual((loaded.best_val_auc, loaded.seed, loaded.epoch), (0.9375, 5, 4))
                self.assertEqual(list(loaded.params.tensors), list(checkpoint.params.tensors))
                for name, tensor in checkpoint.params.tensors.items():
                    np.testing.assert_array_equal(loaded.params[name], tensor)
                np.testing.assert_array_equal(
                    forward(loaded.params, self.windows), forward(checkpoint.params, self.windows)
                )

    def test_header_layout(self):
        """Test the file starts with the magic, version and kind byte."""
        payload = encode_checkpoint(self.checkpoints[1])
        self.assertEqual(payload[:4], MAGIC)
        self.assertEqual(payload[4], FORMAT_VERSION)
        self.assertEqual(payload[5], ModelKind.GRU.code)
        self.assertEqual(encode_checkpoint(self.checkpoints[1]), payload)


class TestCheckpointErrors(unittest.TestCase):
    """Test cases for rejecting damaged checkpoints."""

    def setUp(self):
        """Set up a small encoded checkpoint."""
        config = ModelConfig(kind=ModelKind.LSTM, input_size=6, hidden=4, layers=2, seq_len=5)
        self.payload = encode_checkpoint(Checkpoint(params=init_params(config, seed=1), epoch=2))

    def test_bad_magic(self):
        """Test corrupted magic bytes are rejected."""
        with self.assertRaises(BadMagicError):
            decode_checkpoint(b"XXXX" + self.payload[4:])

    def test_version_mismatch(self):
        """Test an unknown format version is rejected."""
        with self.assertRaises(VersionMismatchError):
            decode_checkpoint(self.payload[:4] + bytes([FORMAT_VERSION + 1]) + self.payload[5:])

    def test_unknown_kind(self):
        """Test an unknown kind byte is rejected."""
        with self.assertRaises(InvalidKindError):
            decode_checkpoint(self.payload[:5] + bytes([9]) + self.payload[6:])

    def test_truncated(self):
        """Test every truncation point is detected."""
        for cut in (3, 10, 40, len(self.payload) // 2, len(self.payload) - 1):
            with self.assertRaises(CheckpointError):
                decode_checkpoint(self.payload[:cut])
        with self.assertRaises(TruncatedFileError):
            decode_checkpoint(self.payload[:-1])

    def test_trailing_bytes(self):
        """Test bytes after the trailer are rejected."""
        with self.assertRaises(CheckpointError):
            decode_checkpoint(self.payload + b"\x00")

    def test_tensor_count_mismatch(self):
        """Test a count that disagrees with the stored config raises."""
        header_size = struct.calcsize("<4sBB5If")
        count = struct.unpack_from("<I", self.payload, header_size)[0]
        damaged = self.payload[:header_size] + struct.pack("<I", count + 1) + self.payload[header_size + 4 :]
        with self.assertRaises(ShapeMismatchError):
            decode_checkpoint(damaged)

    def test_config_mismatch(self):
        """Test tensors that do not fit the stored hidden size raise."""
        header = bytearray(self.payload)
        # hidden is the second u32 after magic, version and kind
        struct.pack_into("<I", header, 10, 5)
        with self.assertRaises(ShapeMismatchError):
            decode_checkpoint(bytes(header))

    def test_missing_file(self):
        """Test loading a missing file raises OSError."""
        with self.assertRaises(OSError):
            load_checkpoint(Path(tempfile.gettempdir()) / "does-not-exist.ckpt")


if __name__ == "__main__":
    unittest.main()
