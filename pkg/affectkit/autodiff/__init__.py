"""
Autodiff Package

Dense float64 tensors, the op set the models are built from, reverse-mode
differentiation and finite-difference gradient checking.
"""

from .tensor import (
    Node,
    Tape,
    Tensor,
    add,
    add_bias,
    as_tensor,
    backward,
    clip,
    concat,
    concat_last_axis,
    div,
    elementwise,
    exp,
    layer_norm,
    log,
    matmul,
    mul,
    no_grad,
    power,
    relu,
    reset_op_index,
    reshape,
    scale,
    sigmoid,
    softmax_lastaxis,
    stack,
    sub,
    take,
    tanh,
    tensor_mean,
    tensor_sum,
    transpose,
)
from .gradcheck import grad_check, run_suite

__all__ = [
    "Node", "Tape", "Tensor", "add", "add_bias", "as_tensor", "backward", "clip",
    "concat", "concat_last_axis", "div", "elementwise", "exp", "grad_check",
    "layer_norm", "log", "matmul", "mul", "no_grad", "power", "relu",
    "reset_op_index", "reshape", "run_suite", "scale", "sigmoid",
    "softmax_lastaxis", "stack", "sub", "take", "tanh", "tensor_mean",
    "tensor_sum", "transpose",
]
