"""Scripted pedestrians rendered as 33-landmark CSV videos.

A script is a sequence of regimes (idle, approach, cross, backtrack), each with
a duration and a lateral root velocity. The root integrates that velocity, the
limbs swing sinusoidally and every coordinate gets seeded Gaussian jitter.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from .dataset import DEFAULT_FPS, LabeledVideo, apply_backtrack_relabel, write_video_csv
from .errors import InvalidScriptError, IoFailureError
from .models.base import ListResponseModel
from .models.intent import (
    LANDMARK_COUNT,
    CorpusEntry,
    Difficulty,
    Regime,
    ScenarioScript,
    ScenarioSegment,
)
from .utils import atomic_write_bytes, resolve_thread_count

logger = logging.getLogger(__name__)

DEFAULT_VIDEOS = 60
DEFAULT_FRAMES = 300
MANIFEST_NAME = "manifest.csv"
ROOT_Y = 0.6
# Share of the image width a crossing covers in easy mode.
CROSS_SPAN = 0.8

# Standing pose relative to the mid-hip, image y pointing down.
_STANDING_POSE = (
    (0.000, -0.300),  # nose
    (0.008, -0.315), (0.015, -0.316), (0.022, -0.315),  # left eye
    (-0.008, -0.315), (-0.015, -0.316), (-0.022, -0.315),  # right eye
    (0.035, -0.305), (-0.035, -0.305),  # ears
    (0.010, -0.285), (-0.010, -0.285),  # mouth
    (0.060, -0.220), (-0.060, -0.220),  # shoulders
    (0.075, -0.120), (-0.075, -0.120),  # elbows
    (0.080, -0.030), (-0.080, -0.030),  # wrists
    (0.085, -0.010), (-0.085, -0.010),  # pinkies
    (0.080, -0.005), (-0.080, -0.005),  # index fingers
    (0.075, -0.015), (-0.075, -0.015),  # thumbs
    (0.040, 0.000), (-0.040, 0.000),  # hips
    (0.045, 0.130), (-0.045, 0.130),  # knees
    (0.045, 0.260), (-0.045, 0.260),  # ankles
    (0.040, 0.275), (-0.040, 0.275),  # heels
    (0.060, 0.280), (-0.060, 0.280),  # foot tips
)

# Swing weight per landmark; arms swing against the leg on the same side.
_SWING = {13: 0.5, 14: -0.5, 25: -0.5, 26: 0.5}
_SWING.update({k: 1.0 if k % 2 else -1.0 for k in range(15, 23)})
_SWING.update({k: -1.0 if k % 2 else 1.0 for k in range(27, 33)})


@dataclass(frozen=True)
class SkeletonTemplate:
    """Standing pose offsets from the mid-hip and per-landmark gait swing weights."""

    offsets: NDArray[np.float64] = field(default_factory=lambda: np.array(_STANDING_POSE, dtype=np.float64))
    swing: NDArray[np.float64] = field(
        default_factory=lambda: np.array([_SWING.get(k, 0.0) for k in range(LANDMARK_COUNT)], dtype=np.float64)
    )
    root_y: float = ROOT_Y

    def __post_init__(self) -> None:
        if self.offsets.shape != (LANDMARK_COUNT, 2) or self.swing.shape != (LANDMARK_COUNT,):
            raise InvalidScriptError(f"Skeleton template needs {LANDMARK_COUNT} landmarks")
        base_y = self.root_y + self.offsets[:, 1]
        if np.any(base_y < 0.0) or np.any(base_y > 1.0):
            raise InvalidScriptError("Skeleton template places landmarks outside the image")

    @property
    def limb_indices(self) -> list[int]:
        return [int(k) for k in np.flatnonzero(self.swing)]


def validate_script(script: ScenarioScript, frames: int) -> None:
    """Check the script covers ``frames`` and crosses at least as fast as it approaches.

    Raises:
        InvalidScriptError: On any violation
    """
    if frames < 1:
        raise InvalidScriptError(f"frames must be >= 1, got {frames}")
    if script.total_frames < frames:
        raise InvalidScriptError(f"Script covers {script.total_frames} frames, {frames} requested")
    cross = [abs(s.velocity) for s in script.segments if s.regime is Regime.CROSS]
    approach = [abs(s.velocity) for s in script.segments if s.regime is Regime.APPROACH]
    if cross and approach and min(cross) < max(approach):
        raise InvalidScriptError(
            f"Cross speed {min(cross)} is slower than approach speed {max(approach)} in {script.summary}"
        )


def generate_video(
    script: ScenarioScript,
    template: SkeletonTemplate | None = None,
    frames: int = DEFAULT_FRAMES,
    video_id: str = "video",
    fps: int = DEFAULT_FPS,
) -> LabeledVideo:
    """Render ``script`` into a labelled landmark video.

    Labels are 1 on cross frames. When a backtrack follows a cross, the video is
    relabelled from the backtrack start with ``apply_backtrack_relabel``.

    Raises:
        InvalidScriptError: If the script is too short or inconsistent
    """
    validate_script(script, frames)
    template = template or SkeletonTemplate()

    velocity = np.concatenate([np.full(s.duration, s.velocity) for s in script.segments])[:frames]
    regimes = [s.regime for s in script.segments for _ in range(s.duration)][:frames]
    root_x = script.start_x + np.concatenate([[0.0], np.cumsum(velocity[1:])])

    t = np.arange(frames)
    phase = np.sin(2.0 * np.pi * script.gait_frequency * t / fps)
    xs = root_x[:, None] + template.offsets[None, :, 0] + script.gait_amplitude * phase[:, None] * template.swing
    ys = np.broadcast_to(template.root_y + template.offsets[None, :, 1], xs.shape)
    coords = np.stack([xs, ys], axis=2).reshape(frames, 2 * LANDMARK_COUNT)
    rng = np.random.default_rng(script.seed)
    coords = coords + rng.normal(0.0, script.jitter_sigma, size=coords.shape)
    coords = np.clip(coords, 0.0, 1.0).astype(np.float32)

    labels = np.array([regime is Regime.CROSS for regime in regimes], dtype=np.int8)
    video = LabeledVideo(video_id=video_id, coords=coords, labels=labels, fps=fps)
    reversal = _backtrack_start(regimes)
    if reversal is not None:
        video = apply_backtrack_relabel(video, reversal)
    return video


def _backtrack_start(regimes: list[Regime]) -> int | None:
    crossed = False
    for index, regime in enumerate(regimes):
        crossed = crossed or regime is Regime.CROSS
        if crossed and regime is Regime.BACKTRACK:
            return index
    return None


def random_script(
    rng: np.random.Generator, frames: int, difficulty: Difficulty, backtrack: bool, seed: int
) -> ScenarioScript:
    """Draw a script for one video.

    Easy: idle, a slow approach, then a crossing that lasts to the end of the
    video at a speed well above the approach. Hard: overlapping speeds, noisier
    joints, some pedestrians that never cross, and an aborted crossing when
    ``backtrack`` is set.
    """
    direction = 1.0 if rng.random() < 0.5 else -1.0
    idle = int(rng.integers(max(1, frames // 15), max(2, frames // 5) + 1))
    approach = int(rng.integers(max(1, frames // 15), max(2, frames // 6) + 1))
    remaining = max(1, frames - idle - approach)

    if difficulty is Difficulty.EASY:
        approach_speed = rng.uniform(0.0, 0.0002)
        cross_speed = rng.uniform(0.7, 0.8) * CROSS_SPAN / remaining
        segments = [
            ScenarioSegment(regime=Regime.IDLE, duration=idle, velocity=0.0),
            ScenarioSegment(regime=Regime.APPROACH, duration=approach, velocity=direction * approach_speed),
            ScenarioSegment(regime=Regime.CROSS, duration=remaining, velocity=direction * cross_speed),
        ]
        jitter = 0.0005
    else:
        approach_speed = rng.uniform(0.0005, 0.002)
        cross_speed = max(approach_speed, rng.uniform(0.0015, 0.6 * CROSS_SPAN / remaining))
        segments = [
            ScenarioSegment(regime=Regime.IDLE, duration=idle, velocity=0.0),
            ScenarioSegment(regime=Regime.APPROACH, duration=approach, velocity=direction * approach_speed),
        ]
        if backtrack and remaining >= 2:
            forward = int(rng.integers(1, remaining // 2 + 1))
            retreat = remaining - forward
            segments += [
                ScenarioSegment(regime=Regime.CROSS, duration=forward, velocity=direction * cross_speed),
                ScenarioSegment(regime=Regime.BACKTRACK, duration=retreat, velocity=-direction * cross_speed),
            ]
        elif rng.random() < 0.15:
            segments.append(ScenarioSegment(regime=Regime.IDLE, duration=remaining, velocity=0.0))
        else:
            segments.append(ScenarioSegment(regime=Regime.CROSS, duration=remaining, velocity=direction * cross_speed))
        jitter = 0.002

    start_x = 0.1 if direction > 0 else 0.9
    return ScenarioScript(segments=segments, jitter_sigma=jitter, start_x=start_x, seed=seed)


def video_seed(seed: int, index: int) -> int:
    """Independent sub-seed for video ``index`` of a corpus."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1, dtype=np.uint64)[0])


def generate_corpus(
    out_dir: str | Path,
    n_videos: int = DEFAULT_VIDEOS,
    frames: int = DEFAULT_FRAMES,
    seed: int = 0,
    difficulty: Difficulty = Difficulty.EASY,
    threads: int | None = None,
) -> ListResponseModel[CorpusEntry]:
    """Write ``n_videos`` landmark CSVs plus ``manifest.csv`` into ``out_dir``.

    Every video derives its script and jitter from ``(seed, index)``, so the
    corpus is byte-identical for a fixed seed. Hard mode backtracks in every
    fourth video.

    Raises:
        IoFailureError: If the directory or a file cannot be written
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise IoFailureError(f"Cannot create {out}: {e.strerror or e}") from e

    def build(index: int) -> CorpusEntry:
        sub_seed = video_seed(seed, index)
        rng = np.random.default_rng(sub_seed)
        backtrack = difficulty is Difficulty.HARD and index % 4 == 0
        script = random_script(rng, frames, difficulty, backtrack, seed=sub_seed)
        video = generate_video(script, frames=frames, video_id=f"video_{index}")
        write_video_csv(video, out / f"{video.video_id}.csv")
        return CorpusEntry(
            video_id=video.video_id, script=script.summary, positive_fraction=float(video.labels.mean())
        )

    workers = max(1, min(threads or resolve_thread_count(), n_videos))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        entries = list(pool.map(build, range(n_videos)))

    manifest = ListResponseModel[CorpusEntry](response=entries, total_count=n_videos)
    text = manifest.to_frame().to_csv(index=False, lineterminator="\n")
    atomic_write_bytes(out / MANIFEST_NAME, text.encode("utf-8"))
    logger.info(f"Generated {n_videos} {difficulty.value} videos of {frames} frames in {out}")
    return manifest
