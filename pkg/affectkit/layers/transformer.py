"""
Transformer Encoder Blocks

Pre-norm residual blocks with bidirectional multi-head scaled dot-product
attention and a ReLU feed-forward network.
"""

from typing import List

import numpy as np

from ..autodiff import (
    Tensor,
    add_bias,
    as_tensor,
    layer_norm,
    matmul,
    relu,
    scale,
    softmax_lastaxis,
)
from ..errors import ConfigurationError, ShapeError
from .base import Module, uniform_init


def sinusoidal_encoding(steps: int, dim: int) -> np.ndarray:
    """Fixed sine/cosine position table of shape [steps, dim]."""
    positions = np.arange(steps)[:, None]
    rates = np.exp(-np.log(10000.0) * (np.arange(0, dim, 2) / dim))
    table = np.zeros((steps, dim))
    table[:, 0::2] = np.sin(positions * rates)
    table[:, 1::2] = np.cos(positions * rates[: dim // 2])
    return table


class TransformerBlock(Module):
    """
    One encoder block: x + MHA(LN(x)), then + FFN(LN(.)).

    W_Q, W_K and W_V hold the H per-head d x d_head projections side by side.
    """

    def __init__(self, d: int, heads: int, d_ff: int, rng: np.random.Generator):
        super().__init__()
        if heads < 1 or d % heads != 0:
            raise ConfigurationError(f"Model dimension {d} is not divisible by {heads} heads",
                                     key="heads")
        if d_ff < d:
            raise ConfigurationError(f"Feed-forward width {d_ff} is below model dimension {d}",
                                     key="ff_mult")
        self.d = d
        self.heads = heads
        self.d_head = d // heads
        for name in ("W_Q", "W_K", "W_V"):
            self.add_param(name, uniform_init(rng, d, (d, d)))
        self.add_param("W_O", uniform_init(rng, d, (d, d)))
        self.add_param("W_1", uniform_init(rng, d, (d, d_ff)))
        self.add_param("b_1", np.zeros(d_ff))
        self.add_param("W_2", uniform_init(rng, d_ff, (d_ff, d)))
        self.add_param("b_2", np.zeros(d))
        for norm in ("ln1", "ln2"):
            self.add_param(f"{norm}_gain", np.ones(d))
            self.add_param(f"{norm}_bias", np.zeros(d))

    def _split_heads(self, t: Tensor, batch: int, steps: int) -> Tensor:
        return t.reshape(batch, steps, self.heads, self.d_head).transpose(0, 2, 1, 3)

    def attention(self, h: Tensor) -> Tensor:
        p = self._params
        batch, steps, _ = h.shape
        q = self._split_heads(matmul(h, p["W_Q"]), batch, steps)
        k = self._split_heads(matmul(h, p["W_K"]), batch, steps)
        v = self._split_heads(matmul(h, p["W_V"]), batch, steps)
        scores = scale(matmul(q, k.transpose(0, 1, 3, 2)), 1.0 / np.sqrt(self.d_head))
        weights = softmax_lastaxis(scores)
        context = matmul(weights, v).transpose(0, 2, 1, 3).reshape(batch, steps, self.d)
        return matmul(context, p["W_O"])

    def feed_forward(self, h: Tensor) -> Tensor:
        p = self._params
        hidden = relu(add_bias(matmul(h, p["W_1"]), p["b_1"]))
        return add_bias(matmul(hidden, p["W_2"]), p["b_2"])

    def forward(self, x: Tensor) -> Tensor:
        return transformer_block_forward(self, x)


def transformer_block_forward(block: TransformerBlock, x: Tensor) -> Tensor:
    """Apply one pre-norm encoder block to x of shape [B, T, d]."""
    x = as_tensor(x)
    if x.ndim != 3 or x.shape[-1] != block.d:
        raise ShapeError(f"Transformer block expects [B, T, {block.d}]", shapes=[x.shape])
    p = block._params
    x = x + block.attention(layer_norm(x, p["ln1_gain"], p["ln1_bias"]))
    return x + block.feed_forward(layer_norm(x, p["ln2_gain"], p["ln2_bias"]))


class TransformerEncoder(Module):
    """Blocks applied in sequence, with positions added before the first one."""

    def __init__(self, d: int, n_blocks: int, heads: int, ff_mult: int,
                 rng: np.random.Generator, positional: bool = True):
        super().__init__()
        self.d = d
        self.positional = positional
        self.blocks: List[TransformerBlock] = [
            self.add_child(f"block{i}", TransformerBlock(d, heads, ff_mult * d, rng))
            for i in range(n_blocks)
        ]

    def forward(self, x: Tensor) -> Tensor:
        x = as_tensor(x)
        if self.positional:
            table = sinusoidal_encoding(x.shape[1], self.d)
            x = x + Tensor(np.broadcast_to(table, x.shape))
        for block in self.blocks:
            x = block(x)
        return x
