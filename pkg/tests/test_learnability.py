"""Test every architecture learns the easy synthetic task with default settings."""

import unittest

import numpy as np
import pytest

from intentseq.checkpoint import Checkpoint
from intentseq.dataset import Window, build_windows, class_balance_stats, split_dataset
from intentseq.models.intent import Difficulty, ModelConfig, ModelKind, SplitSpec, TrainConfig
from intentseq.networks import zero_params
from intentseq.synthgen import DEFAULT_FRAMES, DEFAULT_VIDEOS, generate_video, random_script, video_seed
from intentseq.training import evaluate, train


def easy_windows(seed: int = 0) -> list[Window]:
    windows: list[Window] = []
    for index in range(DEFAULT_VIDEOS):
        sub_seed = video_seed(seed, index)
        script = random_script(np.random.default_rng(sub_seed), DEFAULT_FRAMES, Difficulty.EASY, False, sub_seed)
        video = generate_video(script, frames=DEFAULT_FRAMES, video_id=f"video_{index}")
        windows.extend(build_windows(video))
    return windows


@pytest.mark.slow
class TestLearnability(unittest.TestCase):
    """Train each kind for ten epochs on 60 easy videos."""

    @classmethod
    def setUpClass(cls):
        """Build and split the easy corpus once."""
        cls.split = split_dataset(easy_windows(), SplitSpec(seed=0))

    def test_split_is_balanced_enough(self):
        """Test both classes are well represented in every partition."""
        self.assertEqual(self.split.sizes, (12312, 3078, 1710))
        for part in self.split:
            _, _, fraction = class_balance_stats(part)
            self.assertGreater(fraction, 0.2)
            self.assertLess(fraction, 0.9)

    def test_zero_model_is_chance(self):
        """Test an untrained all-zero model scores AUC 0.5."""
        report = evaluate(Checkpoint(params=zero_params(ModelConfig(kind=ModelKind.GRU))), self.split.test)
        self.assertEqual(report.auc, 0.5)

    def check_kind(self, kind: ModelKind):
        result = train(self.split, ModelConfig(kind=kind), TrainConfig(seed=0))
        self.assertEqual(len(result.history), 10)
        self.assertGreaterEqual(result.checkpoint.best_val_auc, 0.95)
        report = evaluate(result.checkpoint, self.split.test)
        assert report.auc is not None
        self.assertGreaterEqual(report.auc, 0.90)

    def test_lstm(self):
        """Test the stacked LSTM reaches val AUC 0.95 and test AUC 0.90."""
        self.check_kind(ModelKind.LSTM)

    def test_gru(self):
        """Test the stacked GRU reaches val AUC 0.95 and test AUC 0.90."""
        self.check_kind(ModelKind.GRU)

    def test_cnn1d(self):
        """Test the convolution reaches val AUC 0.95 and test AUC 0.90."""
        self.check_kind(ModelKind.CNN1D)


if __name__ == "__main__":
    unittest.main()
