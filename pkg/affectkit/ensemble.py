"""
K-Fold Ensemble

Video-level fold assignment, the per-frame fold score vectors that feed the
stage-2 stacker, and the prediction-averaging baseline.
"""

from collections import Counter
from dataclasses import dataclass
from typing import Dict, List, Mapping, Sequence

import numpy as np
import structlog
from sklearn.model_selection import KFold

from .errors import AlignmentError, ContractError, ShapeError

logger = structlog.get_logger(__name__)


@dataclass(frozen=True)
class FoldAssignment:
    """Which fold each video belongs to."""

    k: int
    folds: Mapping[str, int]

    def fold_of(self, video_id: str) -> int:
        return self.folds[video_id]

    def videos_in(self, fold: int) -> List[str]:
        return [vid for vid, k in self.folds.items() if k == fold]

    def sizes(self) -> List[int]:
        counts = Counter(self.folds.values())
        return [counts.get(k, 0) for k in range(self.k)]


def kfold_split(videos: Sequence[str], k: int = 5, seed: int = 0) -> FoldAssignment:
    """
    Split whole videos into ``k`` folds.

    Fold sizes differ by at most one video and the assignment depends only on
    the video order and the seed.

    Raises:
        ContractError: If k < 2, there are fewer videos than folds, or ids repeat
    """
    videos = list(videos)
    if k < 2:
        raise ContractError("K-fold split needs at least two folds", {'k': k})
    if len(videos) < k:
        raise ContractError(f"Cannot split {len(videos)} videos into {k} folds",
                            {'videos': len(videos), 'k': k})
    if len(set(videos)) != len(videos):
        raise ContractError("Video ids must be unique for fold assignment")

    splitter = KFold(n_splits=k, shuffle=True, random_state=seed)
    folds: Dict[str, int] = {}
    for fold, (_, held_out) in enumerate(splitter.split(np.arange(len(videos)))):
        for index in held_out:
            folds[videos[index]] = fold
    assignment = FoldAssignment(k, {vid: folds[vid] for vid in videos})
    logger.info("Videos assigned to folds", k=k, seed=seed, sizes=assignment.sizes())
    return assignment


@dataclass
class FoldScoreSequence:
    """
    Per-frame fold score vectors of one video.

    ``vectors`` is [N, 2K] ordered [V1..VK, A1..AK].
    """

    video_id: str
    vectors: np.ndarray

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2 or self.vectors.shape[1] % 2 or self.vectors.shape[1] < 2:
            raise ShapeError("Fold score vectors must be [frames, 2K]",
                             shapes=[self.vectors.shape], video_id=self.video_id)
        if np.any(np.abs(self.vectors) > 1.0) or not np.all(np.isfinite(self.vectors)):
            raise ContractError("Fold scores must lie in [-1, 1]", {'video_id': self.video_id})

    @property
    def k(self) -> int:
        return self.vectors.shape[1] // 2

    @property
    def n_frames(self) -> int:
        return self.vectors.shape[0]

    @property
    def valence(self) -> np.ndarray:
        return self.vectors[:, :self.k]

    @property
    def arousal(self) -> np.ndarray:
        return self.vectors[:, self.k:]

    def fold_stream(self, fold: int) -> np.ndarray:
        """Fold ``fold``'s [N, 2] (valence, arousal) predictions."""
        if not 0 <= fold < self.k:
            raise ContractError(f"Fold {fold} out of range", {'k': self.k})
        return np.stack([self.vectors[:, fold], self.vectors[:, self.k + fold]], axis=1)


def build_fold_scores(video_id: str,
                      per_fold_predictions: Sequence[np.ndarray]) -> FoldScoreSequence:
    """
    Interleave K per-fold [N, 2] prediction streams into [N, 2K] vectors.

    Raises:
        AlignmentError: If a fold's frame count differs from fold 0's
    """
    if not per_fold_predictions:
        raise ContractError("Need at least one fold prediction stream", {'video_id': video_id})
    streams = [np.asarray(p, dtype=np.float64) for p in per_fold_predictions]
    n_frames = streams[0].shape[0]
    for fold, stream in enumerate(streams):
        if stream.ndim != 2 or stream.shape[1] != 2:
            raise ShapeError("Fold predictions must be [frames, 2]", shapes=[stream.shape],
                             video_id=video_id, fold=fold)
        if stream.shape[0] != n_frames:
            raise AlignmentError(
                f"Fold {fold} has {stream.shape[0]} frames, fold 0 has {n_frames}",
                video_id=video_id, fold=fold)
    valence = np.stack([s[:, 0] for s in streams], axis=1)
    arousal = np.stack([s[:, 1] for s in streams], axis=1)
    return FoldScoreSequence(video_id, np.concatenate([valence, arousal], axis=1))


def average_folds(scores: FoldScoreSequence) -> np.ndarray:
    """Per-frame mean over folds of valence and arousal, shape [N, 2]."""
    return np.stack([scores.valence.mean(axis=1), scores.arousal.mean(axis=1)], axis=1)
