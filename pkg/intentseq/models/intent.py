"""Configuration and report records for crossing-intent models."""

from datetime import datetime
from enum import StrEnum
from typing import Any

from pydantic import Field, computed_field

from .base import BaseModel, RowModel

LANDMARK_COUNT = 33
COORDS_PER_FRAME = 2 * LANDMARK_COUNT


class ModelKind(StrEnum):
    """Sequence architecture."""

    LSTM = "lstm"
    GRU = "gru"
    CNN1D = "cnn1d"

    @property
    def code(self) -> int:
        """Byte used for this kind in checkpoint files."""
        return _KIND_CODES[self]

    @classmethod
    def from_code(cls, code: int) -> "ModelKind":
        for kind, value in _KIND_CODES.items():
            if value == code:
                return kind
        raise ValueError(f"Unknown model kind code {code}")

    @property
    def is_recurrent(self) -> bool:
        return self is not ModelKind.CNN1D


_KIND_CODES = {ModelKind.LSTM: 1, ModelKind.GRU: 2, ModelKind.CNN1D: 3}


class OptimizerKind(StrEnum):
    SGD = "sgd"
    ADAM = "adam"


class Granularity(StrEnum):
    """Unit assigned to a partition when splitting."""

    WINDOW = "window"
    VIDEO = "video"


class Difficulty(StrEnum):
    EASY = "easy"
    HARD = "hard"


class Regime(StrEnum):
    """Motion regime of a scripted pedestrian."""

    IDLE = "idle"
    APPROACH = "approach"
    CROSS = "cross"
    BACKTRACK = "backtrack"


class ModelConfig(BaseModel):
    """Architecture hyperparameters."""

    kind: ModelKind = Field(description="Architecture (lstm, gru or cnn1d)")
    input_size: int = Field(default=COORDS_PER_FRAME, gt=0, description="Coordinates per frame")
    hidden: int = Field(default=50, gt=0, description="Hidden units / convolution output channels")
    layers: int = Field(default=2, gt=0, description="Stacked recurrent layers (ignored by cnn1d)")
    kernel: int = Field(default=3, gt=0, description="Convolution kernel width (ignored by recurrent kinds)")
    dropout_p: float = Field(default=0.5, ge=0.0, lt=1.0, description="Dropout before the head")
    seq_len: int = Field(default=15, gt=0, description="Frames per window")

    @computed_field
    @property
    def summary(self) -> str:
        """Human-readable configuration summary."""
        if self.kind is ModelKind.CNN1D:
            shape = f"conv {self.input_size}->{self.hidden} k={self.kernel}"
        else:
            shape = f"{self.layers}x{self.kind.value} {self.input_size}->{self.hidden}"
        return f"{shape}, seq_len={self.seq_len}, dropout={self.dropout_p}"


class TrainConfig(BaseModel):
    """Optimisation settings."""

    epochs: int = Field(default=10, ge=1, description="Training epochs")
    batch_size: int = Field(default=32, ge=1, description="Windows per batch")
    learning_rate: float = Field(default=1e-3, gt=0.0, description="Step size")
    optimizer: OptimizerKind = Field(default=OptimizerKind.ADAM, description="Update rule")
    seed: int = Field(default=0, ge=0, lt=2**64, description="Seed for init, shuffling and dropout")
    clamp_eps: float = Field(default=1e-7, gt=0.0, lt=0.5, description="Probability clamp inside the log")
    threshold: float = Field(default=0.5, gt=0.0, lt=1.0, description="Decision threshold for accuracy")


class SplitSpec(BaseModel):
    """How windows are partitioned into train, validation and test."""

    test_fraction: float = Field(default=0.10, gt=0.0, lt=1.0, description="Share held out for test")
    val_fraction: float = Field(default=0.20, gt=0.0, lt=1.0, description="Share of the remaining pool for validation")
    seed: int = Field(default=0, ge=0, lt=2**64, description="Shuffle seed")
    granularity: Granularity = Field(default=Granularity.WINDOW, description="Split unit")


class EpochRecord(RowModel):
    """Per-epoch training curve point."""

    csv_columns = ("epoch", "train_loss", "val_loss", "train_acc", "val_acc", "train_auc", "val_auc")

    epoch: int = Field(ge=1, description="1-based epoch number")
    train_loss: float = Field(ge=0.0, description="Mean BCE over training batches")
    val_loss: float = Field(ge=0.0, description="Mean BCE on validation")
    train_acc: float = Field(ge=0.0, le=1.0, description="Training accuracy")
    val_acc: float = Field(ge=0.0, le=1.0, description="Validation accuracy")
    train_auc: float = Field(ge=0.0, le=1.0, description="Training AUC")
    val_auc: float = Field(ge=0.0, le=1.0, description="Validation AUC")

    @computed_field
    @property
    def summary(self) -> str:
        return (
            f"epoch {self.epoch}: loss {self.train_loss:.4f}/{self.val_loss:.4f} "
            f"acc {self.train_acc:.4f}/{self.val_acc:.4f} auc {self.train_auc:.4f}/{self.val_auc:.4f}"
        )


class EvaluationReport(BaseModel):
    """Test-set performance of one checkpoint."""

    kind: ModelKind = Field(description="Architecture evaluated")
    windows: int = Field(ge=0, description="Number of test windows")
    accuracy: float = Field(ge=0.0, le=1.0, description="Test accuracy")
    auc: float | None = Field(None, description="Test AUC; None when only one class is present")
    mean_inference_ms: float = Field(ge=0.0, description="Mean single-window forward time in milliseconds")

    @computed_field
    @property
    def summary(self) -> str:
        auc = f"{self.auc * 100:.2f}%" if self.auc is not None else "n/a"
        return f"{self.kind.value}: accuracy {self.accuracy * 100:.2f}%, AUC {auc}, {self.mean_inference_ms:.3f} ms"


class LatencyReport(BaseModel):
    """Forward-pass timing statistics."""

    kind: ModelKind = Field(description="Architecture benchmarked")
    reps: int = Field(ge=1, description="Timed repetitions")
    batch_size: int = Field(ge=1, description="Windows per timed forward pass")
    mean_ms: float = Field(ge=0.0, description="Mean time per forward pass")
    p50_ms: float = Field(ge=0.0, description="Median time per forward pass")
    p99_ms: float = Field(ge=0.0, description="99th percentile time per forward pass")
    frame_budget_ms: float = Field(default=1000.0 / 30.0, gt=0.0, description="Real-time budget per frame")

    @computed_field
    @property
    def frames_per_second(self) -> float:
        """Windows classified per second at the mean latency."""
        if self.mean_ms == 0:
            return float("inf")
        return 1000.0 * self.batch_size / self.mean_ms

    @computed_field
    @property
    def fits_budget(self) -> bool:
        """Whether one forward pass finishes within the per-frame budget."""
        return self.p99_ms <= self.frame_budget_ms

    @computed_field
    @property
    def summary(self) -> str:
        return (
            f"{self.kind.value}: mean {self.mean_ms:.3f} ms, p50 {self.p50_ms:.3f} ms, "
            f"p99 {self.p99_ms:.3f} ms (batch {self.batch_size}, {self.frames_per_second:.0f} windows/s)"
        )


class StreamPrediction(RowModel):
    """Probability emitted by a stream once a full window is buffered."""

    csv_columns = ("frame_index", "probability", "label_predicted")

    frame_index: int = Field(ge=0, description="Index of the frame being forecast")
    probability: float = Field(ge=0.0, le=1.0, description="Crossing probability")
    label_predicted: int = Field(ge=0, le=1, description="1 when probability exceeds the threshold")


class ScenarioSegment(BaseModel):
    """One regime of a scripted pedestrian."""

    regime: Regime = Field(description="Motion regime")
    duration: int = Field(ge=1, description="Frames in this segment")
    velocity: float = Field(description="Lateral root velocity in normalised units per frame")


class ScenarioScript(BaseModel):
    """Motion script for one synthetic video."""

    segments: list[ScenarioSegment] = Field(min_length=1, description="Ordered regimes")
    jitter_sigma: float = Field(default=0.001, ge=0.0, description="Per-coordinate Gaussian jitter")
    gait_amplitude: float = Field(default=0.01, ge=0.0, description="Limb swing amplitude")
    gait_frequency: float = Field(default=1.0, ge=0.0, description="Limb swing cycles per second")
    start_x: float = Field(default=0.5, ge=0.0, le=1.0, description="Initial root x position")
    seed: int = Field(default=0, ge=0, description="Jitter seed")

    @computed_field
    @property
    def total_frames(self) -> int:
        return sum(segment.duration for segment in self.segments)

    @computed_field
    @property
    def summary(self) -> str:
        return "->".join(f"{s.regime.value}({s.duration})" for s in self.segments)


class CorpusEntry(RowModel):
    """Manifest row describing one generated video."""

    csv_columns = ("video_id", "script", "positive_fraction")

    video_id: str = Field(description="Video identifier (file stem)")
    script: str = Field(description="Regime summary of the scenario")
    positive_fraction: float = Field(ge=0.0, le=1.0, description="Share of frames labelled 1")


class LayerSummary(BaseModel):
    """One row of an architecture table."""

    name: str = Field(description="Layer type and depth index")
    output_shape: list[int] = Field(description="Output shape for the summary batch")
    params: int | None = Field(None, description="Trainable parameters, None for parameter-free layers")
    mult_adds: int = Field(default=0, ge=0, description="Multiply-adds for one forward pass")


class ModelSummary(BaseModel):
    """Architecture table in the style of a layer summary printout."""

    model: str = Field(description="Model name")
    batch_size: int = Field(ge=1, description="Batch used for shapes")
    layers: list[LayerSummary] = Field(description="Layer rows")

    @computed_field
    @property
    def total_params(self) -> int:
        return sum(layer.params or 0 for layer in self.layers)

    @computed_field
    @property
    def total_mult_adds(self) -> int:
        return sum(layer.mult_adds for layer in self.layers)

    def render(self) -> str:
        """Format the table for a terminal."""
        rule = "=" * 62
        lines = [rule, f"{'Layer (type:depth-idx)':<28}{'Output Shape':<20}{'Param #':>12}", rule]
        lines.append(f"{self.model:<28}{str([self.batch_size, 1]):<20}{'--':>12}")
        for index, layer in enumerate(self.layers):
            branch = "└─" if index == len(self.layers) - 1 else "├─"
            params = f"{layer.params:,}" if layer.params is not None else "--"
            lines.append(f"{branch + layer.name:<28}{str(layer.output_shape):<20}{params:>12}")
        lines += [
            rule,
            f"Total params: {self.total_params:,}",
            f"Total mult-adds (M): {self.total_mult_adds / 1e6:.2f}",
            rule,
        ]
        return "\n".join(lines)


class RunManifest(BaseModel):
    """Provenance written next to every CLI artifact."""

    subcommand: str = Field(description="CLI subcommand that produced the artifact")
    config: dict[str, Any] = Field(default_factory=dict, description="Fully resolved configuration")
    seeds: dict[str, int] = Field(default_factory=dict, description="Seeds used")
    inputs: list[str] = Field(default_factory=list, description="Input paths")
    outputs: list[str] = Field(default_factory=list, description="Output paths")
    tool_version: str = Field(description="intentseq version")
    started_at: datetime = Field(description="Start time")
    duration_s: float = Field(ge=0.0, description="Wall-clock duration in seconds")


__all__ = [
    "COORDS_PER_FRAME",
    "LANDMARK_COUNT",
    "CorpusEntry",
    "Difficulty",
    "EpochRecord",
    "EvaluationReport",
    "Granularity",
    "LatencyReport",
    "LayerSummary",
    "ModelConfig",
    "ModelKind",
    "ModelSummary",
    "OptimizerKind",
    "Regime",
    "RunManifest",
    "ScenarioScript",
    "ScenarioSegment",
    "SplitSpec",
    "StreamPrediction",
    "TrainConfig",
]
