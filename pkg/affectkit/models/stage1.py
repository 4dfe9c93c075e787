"""
Stage-1 Fusion Model

A GRU branch and a Transformer branch read the same per-frame features.
Their outputs are concatenated and fed to a fully connected VA head, and each
branch also carries its own VA head so the combined loss can supervise all
three.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..autodiff import Tensor, as_tensor, concat_last_axis
from ..errors import ShapeError
from ..layers import Gru, Linear, Module, TransformerEncoder


@dataclass
class Stage1Output:
    """Per-frame VA predictions [B, T, 2] of the three heads."""

    fused: Tensor
    gru: Tensor
    transformer: Tensor


class FusionModel(Module):
    """GRU and Transformer branches with fused and per-branch VA heads."""

    def __init__(self, input_dim: int, hidden_dim: int = 256, gru_layers: int = 2,
                 transformer_blocks: int = 1, heads: int = 4, ff_mult: int = 4,
                 rng: Optional[np.random.Generator] = None, positional: bool = True,
                 head_init: str = "zeros"):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.gru = self.add_child("gru", Gru(input_dim, hidden_dim, gru_layers, rng))
        self.project = self.add_child("project", Linear(input_dim, hidden_dim, rng=rng))
        self.transformer = self.add_child(
            "transformer",
            TransformerEncoder(hidden_dim, transformer_blocks, heads, ff_mult, rng,
                               positional=positional),
        )
        self.gru_head = self.add_child(
            "gru_head", Linear(hidden_dim, 2, rng=rng, activation="tanh", init=head_init))
        self.transformer_head = self.add_child(
            "transformer_head", Linear(hidden_dim, 2, rng=rng, activation="tanh", init=head_init))
        self.fused_head = self.add_child(
            "fused_head", Linear(2 * hidden_dim, 2, rng=rng, activation="tanh", init=head_init))

    def forward(self, x: Tensor) -> Stage1Output:
        x = as_tensor(x)
        if x.ndim != 3 or x.shape[-1] != self.input_dim:
            raise ShapeError(f"Fusion model expects [B, T, {self.input_dim}]", shapes=[x.shape])
        gru_out, _ = self.gru(x)
        trf_out = self.transformer(self.project(x))
        fused = concat_last_axis([gru_out, trf_out])
        return Stage1Output(
            fused=self.fused_head(fused),
            gru=self.gru_head(gru_out),
            transformer=self.transformer_head(trf_out),
        )
