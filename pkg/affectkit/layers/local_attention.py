"""
Local Attention

Self-attention restricted to a window of radius ``w`` frames around each
position, added back onto its input.
"""

from typing import Optional

import numpy as np

from ..autodiff import Tensor, as_tensor, matmul, scale, softmax_lastaxis
from ..errors import ContractError, ShapeError
from .base import Module, uniform_init


def window_mask(steps: int, window: int) -> np.ndarray:
    """Boolean [T, T] mask allowing |t - s| <= window."""
    positions = np.arange(steps)
    return np.abs(positions[:, None] - positions[None, :]) <= window


class LocalAttention(Module):
    """Windowed scaled dot-product attention with W_Q, W_K (d x d_a) and W_V (d x d)."""

    def __init__(self, d: int, window: int = 5, rng: Optional[np.random.Generator] = None,
                 d_attn: Optional[int] = None):
        super().__init__()
        if window < 0:
            raise ContractError("Local attention window must be >= 0", {'window': window})
        rng = rng if rng is not None else np.random.default_rng(0)
        self.d = d
        self.window = window
        self.d_attn = d_attn or d
        self.add_param("W_Q", uniform_init(rng, d, (d, self.d_attn)))
        self.add_param("W_K", uniform_init(rng, d, (d, self.d_attn)))
        self.add_param("W_V", uniform_init(rng, d, (d, d)))

    def weights(self, x: Tensor) -> Tensor:
        """Attention weights [B, T, T]; each row sums to one over its window."""
        p = self._params
        q = matmul(x, p["W_Q"])
        k = matmul(x, p["W_K"])
        scores = scale(matmul(q, k.transpose(0, 2, 1)), 1.0 / np.sqrt(self.d_attn))
        return softmax_lastaxis(scores, mask=window_mask(x.shape[1], self.window))

    def forward(self, x: Tensor) -> Tensor:
        return local_attention_forward(self, x)


def local_attention_forward(layer: LocalAttention, x: Tensor) -> Tensor:
    """out = x + sum over |t - s| <= w of alpha[t, s] * (x_s W_V)."""
    x = as_tensor(x)
    if x.ndim != 3 or x.shape[-1] != layer.d:
        raise ShapeError(f"Local attention expects [B, T, {layer.d}]", shapes=[x.shape])
    values = matmul(x, layer.param("W_V"))
    return x + matmul(layer.weights(x), values)
