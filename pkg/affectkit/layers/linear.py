"""
Fully Connected Layers

Affine maps over the last axis; VA heads end in tanh so scores stay in [-1, 1].
"""

from typing import Optional

import numpy as np

from ..autodiff import Tensor, add_bias, as_tensor, matmul, tanh
from ..errors import ConfigurationError, ShapeError
from .base import Module, uniform_init

ACTIVATIONS = (None, "tanh")


def linear_forward(W: Tensor, b: Tensor, x: Tensor, activation: Optional[str] = None) -> Tensor:
    """y = x W + b over the last axis, optionally squashed by tanh."""
    x = as_tensor(x)
    if x.shape[-1] != W.shape[0]:
        raise ShapeError(f"Linear layer expects last axis {W.shape[0]}",
                         shapes=[x.shape, W.shape])
    out = add_bias(matmul(x, W), b)
    return tanh(out) if activation == "tanh" else out


class Linear(Module):
    """
    Fully connected layer.

    ``init="zeros"`` starts the layer at the zero map, which output heads use
    so an untrained model scores every frame 0 (or probability 0.5).
    """

    def __init__(self, d_in: int, d_out: int, rng: Optional[np.random.Generator] = None,
                 activation: Optional[str] = None, init: str = "uniform"):
        super().__init__()
        if activation not in ACTIVATIONS:
            raise ConfigurationError(f"Unknown activation: {activation}", key="activation")
        self.d_in = d_in
        self.d_out = d_out
        self.activation = activation
        if init == "zeros":
            weights = np.zeros((d_in, d_out))
        elif init == "uniform":
            rng = rng if rng is not None else np.random.default_rng(0)
            weights = uniform_init(rng, d_in, (d_in, d_out))
        else:
            raise ConfigurationError(f"Unknown init scheme: {init}", key="init")
        self.add_param("W", weights)
        self.add_param("b", np.zeros(d_out))

    def forward(self, x: Tensor) -> Tensor:
        return linear_forward(self.param("W"), self.param("b"), x, self.activation)
