"""
AU Trainer

Trains the dual-Transformer AU model with focal loss. Every head (T1, T2 and
fused) and the averaged final output are supervised; the batch loss is the
mean of their focal losses over unpadded frames.
"""

from typing import Sequence

import numpy as np

from ..autodiff import Tensor, scale
from ..data.afb1 import VideoRecord
from ..data.windows import SequenceBatch
from ..metrics import focal_loss
from ..models.au import HEADS, au_predict_numpy
from .evaluate import predict_video
from .trainer import Trainer


class AuTrainer(Trainer):
    """Twelve-way multi-label AU detector."""

    task = "au"
    description = "Dual-Transformer AU detector with focal loss"
    label_kind = "au"

    def batch_loss(self, batch: SequenceBatch) -> Tensor:
        out = self.model(Tensor(batch.features))
        targets = batch.labels[batch.mask]
        terms = [out.head_probs[name] for name in HEADS] + [out.probs]
        total = None
        for probs in terms:
            term = focal_loss(probs[batch.mask], targets, gamma=self.config.focal_gamma,
                              alpha=self.config.focal_alpha)
            total = term if total is None else total + term
        return scale(total, 1.0 / len(terms))

    def predict_batch(self, features: np.ndarray, heads: Sequence[str] = HEADS) -> np.ndarray:
        return au_predict_numpy(self.model, features, heads=heads)

    def predict_t1(self, record: VideoRecord) -> np.ndarray:
        """Probabilities of the T1 head alone, with T2 and fusion disabled."""
        return predict_video(lambda f: self.predict_batch(f, heads=("t1",)),
                             record.features, self.config.infer_max_len)
