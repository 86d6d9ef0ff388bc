"""intentseq record models."""

from .base import BaseModel, ListResponseModel, RowModel
from .intent import (
    COORDS_PER_FRAME,
    LANDMARK_COUNT,
    CorpusEntry,
    Difficulty,
    EpochRecord,
    EvaluationReport,
    Granularity,
    LatencyReport,
    LayerSummary,
    ModelConfig,
    ModelKind,
    ModelSummary,
    OptimizerKind,
    Regime,
    RunManifest,
    ScenarioScript,
    ScenarioSegment,
    SplitSpec,
    StreamPrediction,
    TrainConfig,
)

__all__ = [
    "BaseModel",
    "ListResponseModel",
    "RowModel",
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
