"""Exception hierarchy for intentseq.

Every failure raised by the package derives from ``IntentSeqError``. Errors about
bad argument values also derive from ``ValueError`` so plain ``except ValueError``
handlers keep working.
"""


class IntentSeqError(Exception):
    """Base class for all intentseq errors."""


# Dataset


class MalformedRowError(IntentSeqError, ValueError):
    """A landmark CSV row has the wrong field count or a non-numeric field."""

    def __init__(self, path: str, line: int, reason: str):
        self.path = path
        self.line = line
        super().__init__(f"{path}, line {line}: {reason}")


class NonBinaryLabelError(IntentSeqError, ValueError):
    """A label value is not exactly 0 or 1."""

    def __init__(self, path: str, line: int, value: str):
        self.path = path
        self.line = line
        super().__init__(f"{path}, line {line}: label {value!r} is not 0 or 1")


class EmptyFileError(IntentSeqError, ValueError):
    """A landmark CSV holds no data rows."""


class IndexOutOfRangeError(IntentSeqError, IndexError):
    """A frame index lies outside the video."""


class EmptyDatasetError(IntentSeqError, ValueError):
    """No windows were supplied."""


class DegenerateSplitError(IntentSeqError, ValueError):
    """A train/val/test partition came out empty."""


# Numeric core and networks


class ShapeMismatchError(IntentSeqError, ValueError):
    """Operand or tensor shapes are incompatible."""


class EmptyTimeAxisError(IntentSeqError, ValueError):
    """A time-axis reduction was asked for zero time steps."""


class NonFiniteLossError(IntentSeqError, ArithmeticError):
    """A loss evaluation produced NaN or Inf."""


class InvalidKindError(IntentSeqError, ValueError):
    """Unknown model kind."""


class SequenceTooShortError(IntentSeqError, ValueError):
    """The window is shorter than the convolution kernel."""


# Training


class LengthMismatchError(IntentSeqError, ValueError):
    """Predictions and targets differ in length."""


class EmptyBatchError(IntentSeqError, ValueError):
    """A metric or loss was asked for an empty batch."""


class SingleClassBatchError(IntentSeqError, ValueError):
    """AUC is undefined because only one class is present."""


class NonFiniteGradientError(IntentSeqError, ArithmeticError):
    """A gradient contains NaN or Inf."""


class DivergedLossError(IntentSeqError, ArithmeticError):
    """Training loss became non-finite."""


# Checkpoints


class CheckpointError(IntentSeqError):
    """Base class for checkpoint decoding errors."""


class BadMagicError(CheckpointError):
    """The file does not start with the checkpoint magic."""


class VersionMismatchError(CheckpointError):
    """The checkpoint format version is not supported."""


class TruncatedFileError(CheckpointError):
    """The checkpoint ended before all declared content was read."""


# Inference and synthesis


class WrongDimensionError(IntentSeqError, ValueError):
    """A streamed frame does not carry the configured number of coordinates."""


class InvalidScriptError(IntentSeqError, ValueError):
    """A scenario script violates its invariants."""


class IoFailureError(IntentSeqError, OSError):
    """Writing generated output failed."""
