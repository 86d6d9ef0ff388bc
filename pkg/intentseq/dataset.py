"""Landmark CSV ingestion, backtrack relabelling, windowing and splitting."""

import io
import logging
import math
import re
from collections.abc import Iterator, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from .errors import (
    DegenerateSplitError,
    EmptyDatasetError,
    EmptyFileError,
    IndexOutOfRangeError,
    MalformedRowError,
    NonBinaryLabelError,
)
from .models.intent import COORDS_PER_FRAME, LANDMARK_COUNT, Granularity, SplitSpec
from .utils import atomic_write_bytes, resolve_thread_count

logger = logging.getLogger(__name__)

COORD_COLUMNS = [f"{axis}{k}" for k in range(LANDMARK_COUNT) for axis in ("x", "y")]
LABEL_COLUMN = "label"
CSV_COLUMNS = [*COORD_COLUMNS, LABEL_COLUMN]
DEFAULT_FPS = 30
DEFAULT_SEQ_LEN = 15
# Corpus manifests and split files share a directory with the videos.
SKIPPED_SUFFIXES = ("manifest.csv", "split.csv", "splits.csv")

# Mid-hip is the average of the two hip landmarks.
LEFT_HIP, RIGHT_HIP = 23, 24


@dataclass(frozen=True)
class LandmarkFrame:
    """One frame: 33 (x, y) keypoints flattened to 66 values, plus its label."""

    frame_index: int
    coords: NDArray[np.float32]
    label: int


@dataclass(frozen=True)
class LabeledVideo:
    """Frames of one recording, stored column-wise.

    ``coords`` is [frames, 66] float32 and ``labels`` is [frames] int8.
    """

    video_id: str
    coords: NDArray[np.float32]
    labels: NDArray[np.int8]
    fps: int = DEFAULT_FPS

    def __post_init__(self) -> None:
        if self.coords.ndim != 2 or self.coords.shape[1] != COORDS_PER_FRAME:
            raise ValueError(f"coords must be [frames, {COORDS_PER_FRAME}], got {self.coords.shape}")
        if self.labels.shape != (self.coords.shape[0],):
            raise ValueError(f"labels must be [{self.coords.shape[0]}], got {self.labels.shape}")
        if not np.isin(self.labels, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")
        self.coords.setflags(write=False)
        self.labels.setflags(write=False)

    def __len__(self) -> int:
        return int(self.coords.shape[0])

    @property
    def frames(self) -> list[LandmarkFrame]:
        return [LandmarkFrame(k, self.coords[k], int(self.labels[k])) for k in range(len(self))]

    def with_labels(self, labels: NDArray[np.integer]) -> "LabeledVideo":
        return LabeledVideo(self.video_id, self.coords, np.asarray(labels, dtype=np.int8).copy(), self.fps)


@dataclass(frozen=True)
class Window:
    """``seq_len`` consecutive frames and the label of the frame after them."""

    features: NDArray[np.float32]
    target: int
    video_id: str
    start_index: int

    @property
    def source(self) -> tuple[str, int]:
        return (self.video_id, self.start_index)


@dataclass(frozen=True)
class DatasetSplit:
    """Train, validation and test partitions."""

    train: list[Window] = field(default_factory=list)
    val: list[Window] = field(default_factory=list)
    test: list[Window] = field(default_factory=list)

    def __iter__(self) -> Iterator[list[Window]]:
        return iter((self.train, self.val, self.test))

    @property
    def sizes(self) -> tuple[int, int, int]:
        return (len(self.train), len(self.val), len(self.test))


def load_video_csv(path: str | Path, video_id: str | None = None, require_labels: bool = True) -> LabeledVideo:
    """Load one landmark CSV (header ``x0,y0,...,x32,y32,label``).

    Args:
        path: CSV file path
        video_id: Identifier; defaults to the file stem
        require_labels: When False the label column may be absent (replay input);
            missing labels are read as 0

    Returns:
        LabeledVideo with frames in file order

    Raises:
        MalformedRowError: Wrong field count or non-numeric value (reports the line)
        NonBinaryLabelError: A label that is not exactly 0 or 1
        EmptyFileError: No data rows
    """
    path = Path(path)
    video_id = video_id or path.stem
    lines = [(number, line) for number, line in enumerate(_read_text(path).splitlines(), 1) if line.strip()]
    if not lines:
        raise EmptyFileError(f"{path} is empty")

    header_line, header = lines[0]
    columns = [c.strip() for c in header.split(",")]
    has_labels = LABEL_COLUMN in columns
    expected = CSV_COLUMNS if (has_labels or require_labels) else COORD_COLUMNS
    if columns != expected:
        raise MalformedRowError(
            str(path), header_line, f"header must list {len(expected)} columns {expected[0]}..{expected[-1]}"
        )
    rows = lines[1:]
    if not rows:
        raise EmptyFileError(f"{path} has a header but no data rows")
    for number, line in rows:
        fields = line.count(",") + 1
        if fields != len(expected):
            raise MalformedRowError(str(path), number, f"expected {len(expected)} fields, got {fields}")

    row_lines = [number for number, _ in rows]
    frame = pd.read_csv(
        io.StringIO("\n".join(line for _, line in rows)),
        header=None,
        names=expected,
        index_col=False,
        dtype=str,
        keep_default_na=False,
    )

    blank = (frame == "").to_numpy()
    if blank.any():
        row = int(np.argmax(blank.any(axis=1)))
        raise MalformedRowError(str(path), row_lines[row], "missing or empty field")

    numeric = frame.apply(pd.to_numeric, errors="coerce")
    bad = numeric.isna().to_numpy() | ~np.isfinite(numeric.to_numpy(dtype=np.float64))
    if bad.any():
        row = int(np.argmax(bad.any(axis=1)))
        col = int(np.argmax(bad[row]))
        raise MalformedRowError(
            str(path), row_lines[row], f"non-numeric value {frame.iat[row, col]!r} in {expected[col]}"
        )

    coords = numeric[COORD_COLUMNS].to_numpy(dtype=np.float64).astype(np.float32)
    if has_labels:
        raw_labels = numeric[LABEL_COLUMN].to_numpy(dtype=np.float64)
        not_binary = (raw_labels != 0.0) & (raw_labels != 1.0)
        if not_binary.any():
            row = int(np.argmax(not_binary))
            raise NonBinaryLabelError(str(path), row_lines[row], frame[LABEL_COLUMN].iat[row])
        labels = raw_labels.astype(np.int8)
    else:
        labels = np.zeros(len(coords), dtype=np.int8)

    logger.debug(f"Loaded {len(coords)} frames from {path}")
    return LabeledVideo(video_id=video_id, coords=coords, labels=labels)


def _read_text(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except UnicodeDecodeError as e:
        raise MalformedRowError(str(path), 0, f"not UTF-8 text ({e.reason})") from e


def write_video_csv(video: LabeledVideo, path: str | Path) -> None:
    """Write ``video`` in the landmark CSV format.

    Coordinates are printed with 9 significant digits, enough for float32 values
    to load back bit-exactly.
    """
    frame = pd.DataFrame(video.coords.astype(np.float64), columns=COORD_COLUMNS)
    frame[LABEL_COLUMN] = video.labels.astype(np.int64)
    text = frame.to_csv(index=False, float_format="%.9g", lineterminator="\n")
    atomic_write_bytes(Path(path), text.encode("utf-8"))


def load_corpus(directory: str | Path, threads: int | None = None) -> list[LabeledVideo]:
    """Load every landmark CSV in ``directory``, in parallel, sorted by video id.

    Files whose name ends in ``manifest.csv``, ``split.csv`` or ``splits.csv`` are skipped.
    """
    directory = Path(directory)
    paths = sorted(
        p for p in directory.glob("*.csv") if not p.name.endswith(SKIPPED_SUFFIXES)
    )
    if not paths:
        raise EmptyDatasetError(f"No landmark CSV files found in {directory}")
    workers = max(1, min(threads or resolve_thread_count(), len(paths)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        videos = list(pool.map(load_video_csv, paths))
    videos.sort(key=lambda v: _natural_key(v.video_id))
    logger.info(f"Loaded {len(videos)} videos ({sum(len(v) for v in videos)} frames) from {directory}")
    return videos


def _natural_key(name: str) -> list[int | str]:
    return [int(part) if part.isdigit() else part for part in re.split(r"(\d+)", name)]


def apply_backtrack_relabel(video: LabeledVideo, reversal_index: int) -> LabeledVideo:
    """Reclassify crossing frames from the moment the pedestrian turns back.

    Every frame at or after ``reversal_index`` labelled 1 becomes 0; earlier
    frames are untouched.

    Raises:
        IndexOutOfRangeError: If ``reversal_index`` is outside the video
    """
    if not 0 <= reversal_index < len(video):
        raise IndexOutOfRangeError(
            f"reversal_index {reversal_index} outside video {video.video_id} with {len(video)} frames"
        )
    labels = video.labels.copy()
    labels[reversal_index:] = 0
    return video.with_labels(labels)


def standardize_window(features: NDArray[np.float32]) -> NDArray[np.float32]:
    """Z-score each coordinate over the frames of one window (constant columns map to 0)."""
    mean = features.mean(axis=0, dtype=np.float64)
    std = features.std(axis=0, dtype=np.float64)
    safe = np.where(std > 0, std, 1.0)
    return ((features - mean) / safe).astype(np.float32)


def build_windows(video: LabeledVideo, seq_len: int = DEFAULT_SEQ_LEN, standardize: bool = False) -> list[Window]:
    """Slide a ``seq_len`` window over ``video``; each window predicts the next frame.

    Returns ``max(0, N - seq_len)`` windows; window k covers frames
    k..k+seq_len-1 and takes the label of frame k+seq_len.
    """
    if seq_len < 1:
        raise ValueError(f"seq_len must be >= 1, got {seq_len}")
    windows: list[Window] = []
    for start in range(max(0, len(video) - seq_len)):
        features = video.coords[start : start + seq_len]
        if standardize:
            features = standardize_window(features)
        windows.append(Window(features, int(video.labels[start + seq_len]), video.video_id, start))
    return windows


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split_dataset(windows: Sequence[Window], spec: SplitSpec) -> DatasetSplit:
    """Partition windows into train, validation and test.

    Window granularity shuffles windows; ``|test| = round(test_fraction * N)``
    and ``|val| = round(val_fraction * (N - |test|))`` with halves rounded up.
    Video granularity applies the same formulas to the list of videos and keeps
    every window of a video in one partition.

    Raises:
        EmptyDatasetError: If ``windows`` is empty
        DegenerateSplitError: If any partition would be empty
    """
    if not windows:
        raise EmptyDatasetError("Cannot split an empty window list")
    rng = np.random.default_rng(spec.seed)

    if spec.granularity is Granularity.VIDEO:
        video_ids = sorted({w.video_id for w in windows}, key=_natural_key)
        order = rng.permutation(len(video_ids))
        n_test, n_val = _partition_sizes(len(video_ids), spec)
        test_ids = {video_ids[i] for i in order[:n_test]}
        val_ids = {video_ids[i] for i in order[n_test : n_test + n_val]}
        split = DatasetSplit(
            train=[w for w in windows if w.video_id not in test_ids and w.video_id not in val_ids],
            val=[w for w in windows if w.video_id in val_ids],
            test=[w for w in windows if w.video_id in test_ids],
        )
    else:
        order = rng.permutation(len(windows))
        n_test, n_val = _partition_sizes(len(windows), spec)
        split = DatasetSplit(
            train=[windows[i] for i in order[n_test + n_val :]],
            val=[windows[i] for i in order[n_test : n_test + n_val]],
            test=[windows[i] for i in order[:n_test]],
        )

    if min(split.sizes) == 0:
        raise DegenerateSplitError(f"Split produced an empty partition (train, val, test) = {split.sizes}")
    logger.info(f"Split {len(windows)} windows by {spec.granularity.value}: (train, val, test) = {split.sizes}")
    return split


def _partition_sizes(n: int, spec: SplitSpec) -> tuple[int, int]:
    n_test = _round_half_up(spec.test_fraction * n)
    n_val = _round_half_up(spec.val_fraction * (n - n_test))
    return n_test, n_val


def class_balance_stats(windows: Sequence[Window]) -> tuple[int, int, float]:
    """Return (positive_count, negative_count, positive_fraction); 0.0 for an empty list."""
    positives = sum(w.target for w in windows)
    negatives = len(windows) - positives
    fraction = positives / len(windows) if windows else 0.0
    return positives, negatives, fraction


def stack_windows(windows: Sequence[Window]) -> tuple[NDArray[np.float32], NDArray[np.float32]]:
    """Stack windows into ([B, L, 66] features, [B] targets) float32 arrays."""
    if not windows:
        raise EmptyDatasetError("No windows to stack")
    features = np.stack([w.features for w in windows]).astype(np.float32, copy=False)
    targets = np.array([w.target for w in windows], dtype=np.float32)
    return features, targets


def root_x_velocity(features: NDArray[np.floating]) -> NDArray[np.float64]:
    """Mean lateral speed of the mid-hip per window.

    Accepts one window [L, 66] (treated as a batch of one) or a batch [B, L, 66];
    returns per window the absolute mean frame-to-frame change of the mid-hip x.
    """
    batch = features if features.ndim == 3 else features[None]
    root_x = 0.5 * (batch[:, :, 2 * LEFT_HIP].astype(np.float64) + batch[:, :, 2 * RIGHT_HIP])
    if root_x.shape[1] < 2:
        speed = np.zeros(len(batch))
    else:
        speed = np.abs(np.mean(np.diff(root_x, axis=1), axis=1))
    return speed


def write_split_csv(split: DatasetSplit, path: str | Path) -> None:
    """Persist partition membership as ``video_id,start_index,target,partition``."""
    rows = [
        {"video_id": w.video_id, "start_index": w.start_index, "target": w.target, "partition": name}
        for name, part in zip(("train", "val", "test"), split, strict=True)
        for w in part
    ]
    frame = pd.DataFrame(rows, columns=["video_id", "start_index", "target", "partition"])
    atomic_write_bytes(Path(path), frame.to_csv(index=False, lineterminator="\n").encode("utf-8"))


def read_split_csv(path: str | Path, windows: Sequence[Window]) -> DatasetSplit:
    """Rebuild a DatasetSplit from a membership file and the windows it refers to.

    Raises:
        DegenerateSplitError: If the file refers to windows that do not exist
            or a partition is empty
    """
    frame = pd.read_csv(path, dtype={"video_id": str, "start_index": np.int64, "target": np.int64, "partition": str})
    by_source = {w.source: w for w in windows}
    parts: dict[str, list[Window]] = {"train": [], "val": [], "test": []}
    for video_id, start, partition in zip(frame["video_id"], frame["start_index"], frame["partition"], strict=True):
        window = by_source.get((video_id, int(start)))
        if window is None or partition not in parts:
            raise DegenerateSplitError(f"{path} refers to unknown window ({video_id}, {start}, {partition})")
        parts[partition].append(window)
    split = DatasetSplit(**parts)
    if min(split.sizes) == 0:
        raise DegenerateSplitError(f"{path} leaves a partition empty: {split.sizes}")
    return split
