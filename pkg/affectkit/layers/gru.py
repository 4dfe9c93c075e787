"""
Gated Recurrent Units

Stacked GRU over (batch, time, feature) input. Gate convention:

    z  = sigmoid(x W_z + h U_z + b_z)
    r  = sigmoid(x W_r + h U_r + b_r)
    h~ = tanh(x W_h + (r * h) U_h + b_h)
    h' = (1 - z) * h + z * h~
"""

from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from ..autodiff import Tensor, add_bias, as_tensor, matmul, sigmoid, stack, tanh
from ..errors import EmptySequenceError, ShapeError
from .base import Module, uniform_init


class GruLayer(Module):
    """One GRU layer: W_* input maps, U_* recurrent maps, b_* biases."""

    def __init__(self, d_in: int, d_h: int, rng: np.random.Generator):
        super().__init__()
        self.d_in = d_in
        self.d_h = d_h
        for gate in ("z", "r", "h"):
            self.add_param(f"W_{gate}", uniform_init(rng, d_in, (d_in, d_h)))
        for gate in ("z", "r", "h"):
            self.add_param(f"U_{gate}", uniform_init(rng, d_h, (d_h, d_h)))
        for gate in ("z", "r", "h"):
            self.add_param(f"b_{gate}", np.zeros(d_h))

    def cell(self, x_t: Tensor, h: Tensor) -> Tensor:
        p = self._params
        z = sigmoid(add_bias(matmul(x_t, p["W_z"]) + matmul(h, p["U_z"]), p["b_z"]))
        r = sigmoid(add_bias(matmul(x_t, p["W_r"]) + matmul(h, p["U_r"]), p["b_r"]))
        candidate = tanh(add_bias(matmul(x_t, p["W_h"]) + matmul(r * h, p["U_h"]), p["b_h"]))
        return (1.0 - z) * h + z * candidate

    def forward(self, x_t: Tensor, h: Tensor) -> Tensor:
        return self.cell(x_t, h)


def gru_forward(layers: Sequence[GruLayer], x: Union[Tensor, np.ndarray],
                h0: Optional[Union[Tensor, np.ndarray]] = None) -> Tuple[Tensor, Tensor]:
    """
    Run stacked GRU layers over a batch of sequences.

    Args:
        layers: L layers; layer l consumes layer l-1's outputs
        x: Input of shape [B, T, d_in]
        h0: Initial states [L, B, d_h]; zeros when omitted

    Returns:
        Tuple of (top-layer outputs [B, T, d_h], final states [L, B, d_h])
    """
    shape = np.shape(x.data if isinstance(x, Tensor) else x)
    if len(shape) != 3:
        raise ShapeError("GRU input must be [batch, time, feature]", shapes=[shape])
    batch, steps, d_in = shape
    if steps == 0:
        raise EmptySequenceError("GRU received an empty sequence", {'shape': shape})
    if d_in != layers[0].d_in:
        raise ShapeError(f"GRU expects {layers[0].d_in} input features, got {d_in}",
                         shapes=[shape])
    x = as_tensor(x)
    d_h = layers[0].d_h
    if h0 is None:
        initial = [Tensor(np.zeros((batch, d_h))) for _ in layers]
    else:
        h0 = as_tensor(h0)
        if h0.shape != (len(layers), batch, d_h):
            raise ShapeError("h0 must be [layers, batch, hidden]",
                             shapes=[h0.shape, (len(layers), batch, d_h)])
        initial = [h0[i] for i in range(len(layers))]

    inputs: List[Tensor] = [x[:, t, :] for t in range(steps)]
    finals: List[Tensor] = []
    for layer, h in zip(layers, initial):
        outputs = []
        for x_t in inputs:
            h = layer.cell(x_t, h)
            outputs.append(h)
        finals.append(h)
        inputs = outputs
    return stack(inputs, axis=1), stack(finals, axis=0)


class Gru(Module):
    """Stack of ``n_layers`` GRU layers."""

    def __init__(self, d_in: int, d_h: int, n_layers: int, rng: np.random.Generator):
        super().__init__()
        self.layers = [
            self.add_child(f"layer{i}", GruLayer(d_in if i == 0 else d_h, d_h, rng))
            for i in range(n_layers)
        ]

    def forward(self, x, h0=None) -> Tuple[Tensor, Tensor]:
        return gru_forward(self.layers, x, h0)
