"""
Stage-1 Trainer

Trains the GRU + Transformer fusion model on windowed features with the
weighted CCC loss of its fused, GRU and Transformer heads.
"""

import numpy as np

from ..autodiff import Tensor, no_grad
from ..data.windows import SequenceBatch
from ..metrics import stage1_combined_loss
from .trainer import Trainer


class Stage1Trainer(Trainer):
    """One cross-validation fold of the stage-1 VA model."""

    task = "stage1"
    description = "GRU + Transformer fusion model with combined CCC loss"
    label_kind = "va"

    def batch_loss(self, batch: SequenceBatch) -> Tensor:
        out = self.model(Tensor(batch.features))
        return stage1_combined_loss(out.fused, out.gru, out.transformer, batch.labels,
                                    weights=self.config.loss_weights, mask=batch.mask)

    def predict_batch(self, features: np.ndarray) -> np.ndarray:
        with no_grad():
            return self.model(Tensor(features)).fused.data
