"""Test landmark loading, relabelling, windowing and splitting."""

import tempfile
import unittest
from pathlib import Path

import numpy as np

from intentseq.dataset import (
    CSV_COLUMNS,
    DatasetSplit,
    LabeledVideo,
    Window,
    apply_backtrack_relabel,
    build_windows,
    class_balance_stats,
    load_corpus,
    load_video_csv,
    read_split_csv,
    root_x_velocity,
    split_dataset,
    stack_windows,
    standardize_window,
    write_split_csv,
    write_video_csv,
)
from intentseq.errors import (
    DegenerateSplitError,
    EmptyDatasetError,
    EmptyFileError,
    IndexOutOfRangeError,
    MalformedRowError,
    NonBinaryLabelError,
)
from intentseq.models.intent import Granularity, SplitSpec


def make_video(frames: int, labels: list[int] | None = None, video_id: str = "video_0", seed: int = 0) -> LabeledVideo:
    rng = np.random.default_rng(seed)
    coords = rng.random((frames, 66)).astype(np.float32)
    label_array = np.array(labels if labels is not None else [k % 2 for k in range(frames)], dtype=np.int8)
    return LabeledVideo(video_id, coords, label_array)


def csv_text(rows: list[list[str]]) -> str:
    lines = [",".join(CSV_COLUMNS)] + [",".join(row) for row in rows]
    return "\n".join(lines) + "\n"


def valid_row(label: str = "0") -> list[str]:
    return [f"{0.01 * k:.2f}" for k in range(66)] + [label]


class TestLoadVideoCsv(unittest.TestCase):
    """Test cases for landmark CSV ingestion."""

    def setUp(self):
        """Set up a scratch directory."""
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        """Remove the scratch directory."""
        self.tmp.cleanup()

    def write(self, name: str, text: str) -> Path:
        path = self.dir / name
        path.write_text(text, encoding="utf-8")
        return path

    def test_load_300_rows(self):
        """Test a 300-frame file loads every frame in order."""
        video = make_video(300)
        path = self.dir / "clip.csv"
        write_video_csv(video, path)

        loaded = load_video_csv(path)
        self.assertEqual(len(loaded), 300)
        self.assertEqual(loaded.video_id, "clip")
        np.testing.assert_array_equal(loaded.coords, video.coords)
        np.testing.assert_array_equal(loaded.labels, video.labels)

    def test_load_single_row(self):
        """Test a one-frame file is a valid video."""
        loaded = load_video_csv(self.write("one.csv", csv_text([valid_row("1")])))
        self.assertEqual(len(loaded), 1)
        self.assertEqual(int(loaded.labels[0]), 1)
        self.assertAlmostEqual(float(loaded.coords[0, 10]), 0.1, places=6)

    def test_non_binary_label(self):
        """Test a label of 2 is reported with its line."""
        path = self.write("bad.csv", csv_text([valid_row(), valid_row("2")]))
        with self.assertRaises(NonBinaryLabelError) as ctx:
            load_video_csv(path)
        self.assertEqual(ctx.exception.line, 3)

    def test_fractional_label(self):
        """Test a label of 0.5 is not binary."""
        with self.assertRaises(NonBinaryLabelError):
            load_video_csv(self.write("half.csv", csv_text([valid_row("0.5")])))

    def test_too_many_fields(self):
        """Test a row with an extra field is malformed at its line."""
        path = self.write("wide.csv", csv_text([valid_row(), valid_row(), valid_row() + ["9"]]))
        with self.assertRaises(MalformedRowError) as ctx:
            load_video_csv(path)
        self.assertEqual(ctx.exception.line, 4)

    def test_every_row_has_a_leading_extra_field(self):
        """Test rows one field wider than a valid header are malformed, not shifted."""
        rows = ["7," + ",".join(valid_row("1")) for _ in range(3)]
        text = ",".join(CSV_COLUMNS) + "\n" + "\n".join(rows) + "\n"
        with self.assertRaises(MalformedRowError) as ctx:
            load_video_csv(self.write("shifted.csv", text))
        self.assertEqual(ctx.exception.line, 2)
        self.assertIn("68", str(ctx.exception))

    def test_line_numbers_count_blank_lines(self):
        """Test reported lines are physical file lines."""
        row = valid_row()
        row[3] = "abc"
        text = ",".join(CSV_COLUMNS) + "\n" + ",".join(valid_row()) + "\n\n" + ",".join(row) + "\n"
        with self.assertRaises(MalformedRowError) as ctx:
            load_video_csv(self.write("gap.csv", text))
        self.assertEqual(ctx.exception.line, 4)

    def test_missing_field(self):
        """Test a short row is malformed."""
        path = self.write("short.csv", csv_text([valid_row(), valid_row()[:-2] + ["0"]]))
        with self.assertRaises(MalformedRowError) as ctx:
            load_video_csv(path)
        self.assertEqual(ctx.exception.line, 3)

    def test_non_numeric_field(self):
        """Test text in a coordinate column is malformed."""
        row = valid_row()
        row[5] = "abc"
        with self.assertRaises(MalformedRowError) as ctx:
            load_video_csv(self.write("text.csv", csv_text([valid_row(), row])))
        self.assertEqual(ctx.exception.line, 3)
        self.assertIn("abc", str(ctx.exception))

    def test_wrong_header(self):
        """Test a header that is not x0,y0,...,label is rejected at line 1."""
        text = ",".join(f"c{k}" for k in range(67)) + "\n" + ",".join(valid_row()) + "\n"
        with self.assertRaises(MalformedRowError) as ctx:
            load_video_csv(self.write("header.csv", text))
        self.assertEqual(ctx.exception.line, 1)

    def test_empty_files(self):
        """Test empty files and header-only files raise EmptyFileError."""
        with self.assertRaises(EmptyFileError):
            load_video_csv(self.write("empty.csv", ""))
        with self.assertRaises(EmptyFileError):
            load_video_csv(self.write("header_only.csv", csv_text([])))

    def test_unlabelled_replay_input(self):
        """Test the label column may be omitted when labels are not required."""
        text = ",".join(CSV_COLUMNS[:-1]) + "\n" + ",".join(valid_row()[:-1]) + "\n"
        path = self.write("nolabel.csv", text)
        video = load_video_csv(path, require_labels=False)
        np.testing.assert_array_equal(video.labels, [0])
        with self.assertRaises(MalformedRowError):
            load_video_csv(path)

    def test_load_corpus_natural_order(self):
        """Test corpora load sorted by video number and skip manifests."""
        for index in (10, 2, 1):
            write_video_csv(make_video(20, video_id=f"video_{index}", seed=index), self.dir / f"video_{index}.csv")
        (self.dir / "manifest.csv").write_text("video_id,script,positive_fraction\n", encoding="utf-8")

        videos = load_corpus(self.dir, threads=2)
        self.assertEqual([v.video_id for v in videos], ["video_1", "video_2", "video_10"])

    def test_load_corpus_skips_split_files(self):
        """Test a split file written next to the videos is not read as a video."""
        videos = [make_video(20, video_id=f"video_{index}", seed=index) for index in (0, 1)]
        for video in videos:
            write_video_csv(video, self.dir / f"{video.video_id}.csv")
        windows = [w for video in videos for w in build_windows(video)]
        split = split_dataset(windows, SplitSpec(test_fraction=0.2, val_fraction=0.2))
        write_split_csv(split, self.dir / "split.csv")
        write_split_csv(split, self.dir / "splits.csv")

        self.assertEqual([v.video_id for v in load_corpus(self.dir)], ["video_0", "video_1"])

    def test_load_corpus_empty_directory(self):
        """Test a directory without CSVs raises."""
        with self.assertRaises(EmptyDatasetError):
            load_corpus(self.dir)


class TestBacktrackRelabel(unittest.TestCase):
    """Test cases for the backtrack relabel rule."""

    def test_examples(self):
        """Test the documented relabel examples."""
        video = make_video(5, [0, 0, 1, 1, 1])
        np.testing.assert_array_equal(apply_backtrack_relabel(video, 3).labels, [0, 0, 1, 0, 0])
        quiet = make_video(3, [0, 0, 0])
        np.testing.assert_array_equal(apply_backtrack_relabel(quiet, 1).labels, [0, 0, 0])
        crossing = make_video(4, [1, 1, 1, 1])
        np.testing.assert_array_equal(apply_backtrack_relabel(crossing, 0).labels, [0, 0, 0, 0])

    def test_matches_rule_on_random_labels(self):
        """Test the relabel equals the rule by hand, is idempotent and keeps coordinates."""
        rng = np.random.default_rng(11)
        for _ in range(50):
            n = int(rng.integers(1, 40))
            labels = rng.integers(0, 2, size=n).tolist()
            index = int(rng.integers(0, n))
            video = make_video(n, labels)
            expected = [label if k < index else 0 for k, label in enumerate(labels)]

            once = apply_backtrack_relabel(video, index)
            self.assertEqual(once.labels.tolist(), expected)
            self.assertEqual(apply_backtrack_relabel(once, index).labels.tolist(), expected)
            np.testing.assert_array_equal(once.coords, video.coords)

    def test_original_is_untouched(self):
        """Test the input video keeps its labels."""
        video = make_video(4, [1, 1, 1, 1])
        apply_backtrack_relabel(video, 2)
        np.testing.assert_array_equal(video.labels, [1, 1, 1, 1])

    def test_index_out_of_range(self):
        """Test negative and past-the-end indices raise."""
        video = make_video(4)
        with self.assertRaises(IndexOutOfRangeError):
            apply_backtrack_relabel(video, 4)
        with self.assertRaises(IndexOutOfRangeError):
            apply_backtrack_relabel(video, -1)


class TestBuildWindows(unittest.TestCase):
    """Test cases for sliding windows."""

    def test_counts(self):
        """Test N - L windows for 300, 15 and 16 frames."""
        self.assertEqual(len(build_windows(make_video(300))), 285)
        self.assertEqual(build_windows(make_video(15)), [])

        video = make_video(16)
        windows = build_windows(video)
        self.assertEqual(len(windows), 1)
        self.assertEqual(windows[0].target, int(video.labels[15]))

    def test_count_law_on_random_lengths(self):
        """Test the count law and the window contents on random videos."""
        rng = np.random.default_rng(5)
        for _ in range(20):
            n = int(rng.integers(1, 60))
            seq_len = int(rng.integers(1, 20))
            video = make_video(n, rng.integers(0, 2, size=n).tolist())
            windows = build_windows(video, seq_len)
            self.assertEqual(len(windows), max(0, n - seq_len))
            for window in windows:
                start = window.start_index
                np.testing.assert_array_equal(window.features, video.coords[start : start + seq_len])
                self.assertEqual(window.target, int(video.labels[start + seq_len]))

    def test_standardized_windows(self):
        """Test standardized windows have zero mean and unit spread per coordinate."""
        windows = build_windows(make_video(40), standardize=True)
        features = windows[0].features.astype(np.float64)
        np.testing.assert_allclose(features.mean(axis=0), 0.0, atol=1e-5)
        np.testing.assert_allclose(features.std(axis=0), 1.0, atol=1e-4)

    def test_standardize_constant_column(self):
        """Test a constant coordinate maps to zero."""
        window = np.ones((15, 66), dtype=np.float32)
        np.testing.assert_array_equal(standardize_window(window), np.zeros((15, 66)))

    def test_invalid_seq_len(self):
        """Test a non-positive window length raises."""
        with self.assertRaises(ValueError):
            build_windows(make_video(20), 0)


class TestSplitDataset(unittest.TestCase):
    """Test cases for train/val/test partitioning."""

    def setUp(self):
        """Set up windows from three videos."""
        self.windows = [w for k in range(3) for w in build_windows(make_video(25, video_id=f"video_{k}", seed=k))]

    def test_sizes_of_ten(self):
        """Test 10 windows split into (7, 2, 1)."""
        split = split_dataset(self.windows[:10], SplitSpec(test_fraction=0.1, val_fraction=0.2))
        self.assertEqual(split.sizes, (7, 2, 1))

    def test_sizes_of_recorded_corpus(self):
        """Test the rounding formulas at corpus scale."""
        windows = [Window(np.zeros((1, 66), dtype=np.float32), k % 2, "v", k) for k in range(17408)]
        split = split_dataset(windows, SplitSpec(test_fraction=0.1047, val_fraction=0.2))
        self.assertEqual(len(split.test), 1823)
        self.assertEqual(len(split.val), round(0.2 * (17408 - 1823)))

    def test_deterministic_partition(self):
        """Test the same seed yields the same partition and every window lands once."""
        spec = SplitSpec(seed=4)
        first = split_dataset(self.windows, spec)
        second = split_dataset(self.windows, spec)
        for a, b in zip(first, second, strict=True):
            self.assertEqual([w.source for w in a], [w.source for w in b])

        sources = [w.source for part in first for w in part]
        self.assertEqual(len(sources), len(self.windows))
        self.assertEqual(set(sources), {w.source for w in self.windows})

    def test_different_seed_differs(self):
        """Test another seed shuffles differently."""
        a = split_dataset(self.windows, SplitSpec(seed=1))
        b = split_dataset(self.windows, SplitSpec(seed=2))
        self.assertNotEqual([w.source for w in a.train], [w.source for w in b.train])

    def test_video_granularity(self):
        """Test video granularity keeps each video in one partition."""
        spec = SplitSpec(test_fraction=0.3, val_fraction=0.5, granularity=Granularity.VIDEO)
        split = split_dataset(self.windows, spec)
        owners = [{w.video_id for w in part} for part in split]
        self.assertEqual(sum(len(ids) for ids in owners), 3)
        self.assertFalse(owners[0] & owners[1] or owners[0] & owners[2] or owners[1] & owners[2])

    def test_degenerate_split(self):
        """Test a split that leaves a partition empty raises."""
        with self.assertRaises(DegenerateSplitError):
            split_dataset(self.windows[:2], SplitSpec(test_fraction=0.1, val_fraction=0.2))
        with self.assertRaises(EmptyDatasetError):
            split_dataset([], SplitSpec())

    def test_split_csv_round_trip(self):
        """Test a persisted split reloads to the same membership."""
        split = split_dataset(self.windows, SplitSpec(seed=9))
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "split.csv"
            write_split_csv(split, path)
            reloaded = read_split_csv(path, self.windows)
            self.assertIsInstance(reloaded, DatasetSplit)
            for a, b in zip(split, reloaded, strict=True):
                self.assertEqual([w.source for w in a], [w.source for w in b])

            with self.assertRaises(DegenerateSplitError):
                read_split_csv(path, self.windows[:5])


class TestWindowStatistics(unittest.TestCase):
    """Test cases for class balance, stacking and the velocity feature."""

    @staticmethod
    def windows_with(targets: list[int]) -> list[Window]:
        return [Window(np.zeros((15, 66), dtype=np.float32), t, "v", k) for k, t in enumerate(targets)]

    def test_class_balance(self):
        """Test counting positives and negatives."""
        self.assertEqual(class_balance_stats(self.windows_with([1, 1, 0, 0, 0])), (2, 3, 0.4))
        self.assertEqual(class_balance_stats([]), (0, 0, 0.0))
        self.assertEqual(class_balance_stats(self.windows_with([1] * 5)), (5, 0, 1.0))

    def test_stack_windows(self):
        """Test stacking gives float32 batches."""
        features, targets = stack_windows(self.windows_with([1, 0, 1]))
        self.assertEqual(features.shape, (3, 15, 66))
        self.assertEqual(features.dtype, np.float32)
        np.testing.assert_array_equal(targets, [1.0, 0.0, 1.0])
        with self.assertRaises(EmptyDatasetError):
            stack_windows([])

    def test_root_x_velocity(self):
        """Test the mid-hip speed of a window moving 0.01 per frame."""
        window = np.zeros((15, 66), dtype=np.float32)
        ramp = 0.3 + 0.01 * np.arange(15)
        window[:, 46] = ramp
        window[:, 48] = ramp
        np.testing.assert_allclose(root_x_velocity(window), [0.01], rtol=1e-5)
        np.testing.assert_allclose(root_x_velocity(window[None, ::-1]), [0.01], rtol=1e-5)


if __name__ == "__main__":
    unittest.main()
