"""Tests for fold assignment and fold score vectors."""

import numpy as np
import pytest

from affectkit.ensemble import (
    FoldScoreSequence,
    average_folds,
    build_fold_scores,
    kfold_split,
)
from affectkit.errors import AlignmentError, ContractError, ShapeError
from affectkit.metrics import ccc_va

VIDEOS = [f"vid{i:02d}" for i in range(17)]


class TestKfoldSplit:
    def test_every_video_in_exactly_one_fold(self):
        assignment = kfold_split(VIDEOS, k=5, seed=3)
        assert set(assignment.folds) == set(VIDEOS)
        assert sorted(v for k in range(5) for v in assignment.videos_in(k)) == sorted(VIDEOS)

    def test_balanced_sizes(self):
        sizes = kfold_split(VIDEOS, k=5, seed=3).sizes()
        assert sum(sizes) == 17
        assert max(sizes) - min(sizes) <= 1

    def test_deterministic_per_seed(self):
        assert kfold_split(VIDEOS, 4, seed=1).folds == kfold_split(VIDEOS, 4, seed=1).folds
        assert kfold_split(VIDEOS, 4, seed=1).folds != kfold_split(VIDEOS, 4, seed=2).folds

    @pytest.mark.parametrize("videos,k", [(VIDEOS, 1), (VIDEOS[:3], 4), (["a", "a", "b"], 2)])
    def test_invalid_requests(self, videos, k):
        with pytest.raises(ContractError):
            kfold_split(videos, k)


class TestFoldScores:
    def test_interleaving_layout(self):
        streams = [np.full((3, 2), [0.1 * k, -0.1 * k]) for k in range(3)]
        scores = build_fold_scores("v", streams)
        assert scores.vectors.shape == (3, 6)
        np.testing.assert_allclose(scores.vectors[0], [0.0, 0.1, 0.2, 0.0, -0.1, -0.2])
        np.testing.assert_allclose(scores.fold_stream(2), streams[2])
        assert scores.k == 3 and scores.n_frames == 3

    def test_misaligned_fold(self):
        with pytest.raises(AlignmentError) as info:
            build_fold_scores("v", [np.zeros((4, 2)), np.zeros((3, 2))])
        assert "fold=1" in str(info.value)

    def test_rejects_bad_shapes_and_ranges(self):
        with pytest.raises(ShapeError):
            FoldScoreSequence("v", np.zeros((4, 3)))
        with pytest.raises(ContractError):
            FoldScoreSequence("v", np.full((4, 2), 1.5))
        with pytest.raises(ContractError):
            build_fold_scores("v", [])
        with pytest.raises(ContractError):
            build_fold_scores("v", [np.zeros((2, 2))]).fold_stream(1)

    def test_average_of_noisy_folds_beats_each_fold(self):
        rng = np.random.default_rng(7)
        label = rng.uniform(-0.6, 0.6, (2000, 2))
        streams = [np.clip(label + rng.normal(0, 0.3, label.shape), -1, 1) for _ in range(5)]
        scores = build_fold_scores("v", streams)
        averaged = ccc_va(average_folds(scores), label).combined
        assert all(averaged > ccc_va(s, label).combined for s in streams)
