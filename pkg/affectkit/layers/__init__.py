"""
Layers Package

GRU, Transformer encoder, local attention and fully connected building blocks.
"""

from .base import Module, uniform_init
from .gru import Gru, GruLayer, gru_forward
from .linear import Linear, linear_forward
from .local_attention import LocalAttention, local_attention_forward, window_mask
from .transformer import (
    TransformerBlock,
    TransformerEncoder,
    sinusoidal_encoding,
    transformer_block_forward,
)

__all__ = [
    "Module", "uniform_init", "Gru", "GruLayer", "gru_forward", "Linear",
    "linear_forward", "LocalAttention", "local_attention_forward", "window_mask",
    "TransformerBlock", "TransformerEncoder", "sinusoidal_encoding",
    "transformer_block_forward",
]
