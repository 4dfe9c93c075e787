"""
Stage-2 Stacker

Stacked GRU over the per-frame fold score vectors, followed by local
attention layers and a tanh VA head.
"""

from typing import TYPE_CHECKING, List, Optional, Union

import numpy as np

from ..autodiff import Tensor, as_tensor, no_grad
from ..errors import CheckpointError, ShapeError
from ..layers import Gru, Linear, LocalAttention, Module

if TYPE_CHECKING:
    from ..ensemble import FoldScoreSequence


class StackerModel(Module):
    """
    GRU (``gru_layers`` deep) + ``local_layers`` independent local attention
    layers + linear VA head.

    With ``local_layers=0`` this is the plain GRU stacker.
    """

    def __init__(self, input_dim: int, hidden_dim: int = 256, gru_layers: int = 4,
                 local_layers: int = 2, local_window: int = 5,
                 attention_dim: Optional[int] = None,
                 rng: Optional[np.random.Generator] = None, head_init: str = "zeros"):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        self.input_dim = input_dim
        self.gru = self.add_child("gru", Gru(input_dim, hidden_dim, gru_layers, rng))
        self.attention: List[LocalAttention] = [
            self.add_child(f"attention{i}",
                           LocalAttention(hidden_dim, window=local_window, rng=rng,
                                          d_attn=attention_dim))
            for i in range(local_layers)
        ]
        self.head = self.add_child(
            "head", Linear(hidden_dim, 2, rng=rng, activation="tanh", init=head_init))

    def forward(self, x: Tensor) -> Tensor:
        x = as_tensor(x)
        if x.ndim != 3 or x.shape[-1] != self.input_dim:
            raise ShapeError(f"Stacker expects [B, T, {self.input_dim}]", shapes=[x.shape])
        h, _ = self.gru(x)
        for layer in self.attention:
            h = layer(h)
        return self.head(h)


def stage2_forward(model: StackerModel, scores: Union[np.ndarray, "FoldScoreSequence"]) -> np.ndarray:
    """
    Per-frame (valence, arousal) for one window of fold score vectors.

    Args:
        model: Trained stacker
        scores: [T, 2K] array or a FoldScoreSequence

    Returns:
        Array of shape [T, 2] with values in [-1, 1]

    Raises:
        CheckpointError: If the vector width differs from the model's input
    """
    vectors = np.asarray(getattr(scores, "vectors", scores), dtype=np.float64)
    if vectors.ndim != 2:
        raise ShapeError("Fold score window must be [T, 2K]", shapes=[vectors.shape])
    if vectors.shape[1] != model.input_dim:
        raise CheckpointError(
            f"Fold score vectors have {vectors.shape[1]} components, "
            f"model was trained on {model.input_dim}")
    with no_grad():
        return model(Tensor(vectors[None])).data[0]
