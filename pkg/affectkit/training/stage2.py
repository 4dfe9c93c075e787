"""
Stage-2 Trainer

Trains the stacker on fold score vectors. Each video's [N, 2K] vectors stand
in for its features, so windowing and evaluation are shared with stage 1.
"""

from typing import Mapping, Sequence

import numpy as np

from ..autodiff import Tensor, no_grad
from ..data.afb1 import VideoRecord
from ..data.windows import SequenceBatch
from ..ensemble import FoldScoreSequence
from ..errors import AlignmentError, ConfigurationError
from ..metrics import va_loss
from .trainer import Trainer


def score_records(scores: Sequence[FoldScoreSequence],
                  labels: Mapping[str, np.ndarray]) -> list:
    """
    Pair fold score sequences with VA labels as trainable records.

    Args:
        scores: One FoldScoreSequence per video
        labels: [N, 2] VA labels by video id; videos without labels get none

    Raises:
        AlignmentError: If a video's labels and score vectors differ in length
    """
    records = []
    for sequence in scores:
        label = labels.get(sequence.video_id)
        if label is not None and len(label) != sequence.n_frames:
            raise AlignmentError(
                f"{sequence.n_frames} score frames against {len(label)} label frames",
                video_id=sequence.video_id)
        records.append(VideoRecord(sequence.video_id, sequence.vectors, label))
    return records


class Stage2Trainer(Trainer):
    """GRU stacker, optionally followed by local attention layers."""

    task = "stage2"
    description = "Stacked GRU with local attention over fold score vectors"
    label_kind = "va"

    def _check_input_dim(self, input_dim: int) -> None:
        expected = 2 * self.config.k_folds
        if input_dim != expected:
            raise ConfigurationError(
                f"Fold score vectors have {input_dim} components, expected 2K = {expected}",
                key="k_folds", expected=str(input_dim // 2))

    def batch_loss(self, batch: SequenceBatch) -> Tensor:
        return va_loss(self.model(Tensor(batch.features)), batch.labels, batch.mask)

    def predict_batch(self, features: np.ndarray) -> np.ndarray:
        with no_grad():
            return self.model(Tensor(features)).data
