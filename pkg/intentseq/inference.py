"""Real-time streaming prediction and latency benchmarking."""

import logging
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .checkpoint import Checkpoint
from .dataset import load_video_csv, standardize_window
from .errors import WrongDimensionError
from .models.base import ListResponseModel
from .models.intent import LatencyReport, StreamPrediction
from .networks import ModelParameters, forward
from .utils import atomic_write_bytes

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.5
DEFAULT_REPS = 1000
MIN_REPS = 100
WARMUP_REPS = 20
_BENCH_POOL = 16


@dataclass
class StreamState:
    """Ring buffer of the latest ``seq_len`` frames for one pedestrian."""

    checkpoint: Checkpoint
    standardize: bool = False
    frames_seen: int = 0
    buffer: deque[NDArray[np.float32]] = field(init=False)

    def __post_init__(self) -> None:
        self.buffer = deque(maxlen=self.checkpoint.config.seq_len)

    @property
    def ready(self) -> bool:
        return len(self.buffer) == self.buffer.maxlen


def stream_push(state: StreamState, frame: ArrayLike) -> float | None:
    """Buffer one frame and, once ``seq_len`` frames are held, predict the next one.

    Returns:
        Crossing probability of the upcoming frame, or None during warmup

    Raises:
        WrongDimensionError: If ``frame`` does not carry ``input_size`` coordinates
    """
    config = state.checkpoint.config
    vector = np.asarray(frame, dtype=np.float32)
    if vector.shape != (config.input_size,):
        raise WrongDimensionError(f"Frame must carry {config.input_size} coordinates, got shape {vector.shape}")
    state.buffer.append(vector)
    state.frames_seen += 1
    if not state.ready:
        return None
    window = np.stack(state.buffer)
    if state.standardize:
        window = standardize_window(window)
    return float(forward(state.checkpoint.params, window[None])[0])


class StreamManager:
    """Owns one StreamState per stream id; every stream shares the same model."""

    def __init__(self, checkpoint: Checkpoint, threshold: float = DEFAULT_THRESHOLD, standardize: bool = False):
        self.checkpoint = checkpoint
        self.threshold = threshold
        self.standardize = standardize
        self._streams: dict[str, StreamState] = {}
        self._lock = threading.Lock()

    def open(self, stream_id: str) -> StreamState:
        """Return the stream, creating it on first use."""
        with self._lock:
            if stream_id not in self._streams:
                self._streams[stream_id] = StreamState(self.checkpoint, standardize=self.standardize)
                logger.debug(f"Opened stream {stream_id}")
            return self._streams[stream_id]

    def get(self, stream_id: str) -> StreamState:
        """Get an open stream.

        Raises:
            ValueError: If the stream is not open
        """
        with self._lock:
            if stream_id not in self._streams:
                raise ValueError(f"Stream '{stream_id}' not found. Open streams: {list(self._streams)}")
            return self._streams[stream_id]

    def close(self, stream_id: str) -> None:
        with self._lock:
            self._streams.pop(stream_id, None)

    def list_streams(self) -> list[str]:
        with self._lock:
            return list(self._streams)

    def push(self, stream_id: str, frame: ArrayLike) -> StreamPrediction | None:
        """Feed a frame to ``stream_id``; returns a prediction once the window is full."""
        state = self.open(stream_id)
        probability = stream_push(state, frame)
        if probability is None:
            return None
        return StreamPrediction(
            frame_index=state.frames_seen,
            probability=probability,
            label_predicted=int(probability > self.threshold),
        )


def replay_video(
    checkpoint: Checkpoint, path: str | Path, threshold: float = DEFAULT_THRESHOLD, standardize: bool = False
) -> ListResponseModel[StreamPrediction]:
    """Stream a landmark CSV frame by frame (label column optional, ignored)."""
    video = load_video_csv(path, require_labels=False)
    manager = StreamManager(checkpoint, threshold, standardize)
    predictions: list[StreamPrediction] = []
    for coords in video.coords:
        prediction = manager.push(video.video_id, coords)
        if prediction is not None:
            predictions.append(prediction)
    logger.info(f"Replayed {len(video)} frames of {path}: {len(predictions)} predictions")
    return ListResponseModel[StreamPrediction](response=predictions, total_count=len(video))


def write_predictions_csv(predictions: ListResponseModel[StreamPrediction], path: str | Path) -> None:
    """Write ``frame_index,probability,label_predicted`` rows."""
    frame = predictions.to_frame().reindex(columns=list(StreamPrediction.csv_columns))
    atomic_write_bytes(Path(path), frame.to_csv(index=False, lineterminator="\n").encode("utf-8"))


def bench_latency(
    model: Checkpoint | ModelParameters,
    reps: int = DEFAULT_REPS,
    seed: int = 0,
    batch_size: int = 1,
    warmup: int = WARMUP_REPS,
) -> LatencyReport:
    """Time eval-mode forward passes over seeded random windows.

    Args:
        model: Checkpoint or bare parameters
        reps: Timed repetitions (at least 100)
        seed: Seed for the random windows
        batch_size: Windows per forward pass
        warmup: Untimed passes run first

    Returns:
        LatencyReport with mean, median and 99th percentile per forward pass
    """
    if reps < MIN_REPS:
        raise ValueError(f"reps must be at least {MIN_REPS}, got {reps}")
    if batch_size < 1:
        raise ValueError(f"batch_size must be positive, got {batch_size}")
    params = model.params if isinstance(model, Checkpoint) else model
    config = params.config
    rng = np.random.default_rng(seed)
    pool = rng.random((_BENCH_POOL, batch_size, config.seq_len, config.input_size)).astype(np.float32)

    for k in range(warmup):
        forward(params, pool[k % _BENCH_POOL])
    timings = np.empty(reps, dtype=np.float64)
    for k in range(reps):
        window = pool[k % _BENCH_POOL]
        started = time.perf_counter()
        forward(params, window)
        timings[k] = time.perf_counter() - started
    timings *= 1000.0

    report = LatencyReport(
        kind=config.kind,
        reps=reps,
        batch_size=batch_size,
        mean_ms=float(timings.mean()),
        p50_ms=float(np.percentile(timings, 50)),
        p99_ms=float(np.percentile(timings, 99)),
    )
    logger.info(report.summary)
    return report
