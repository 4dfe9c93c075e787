"""
Dense Tensors with Reverse-Mode Differentiation

A small float64 tensor type. Every forward op checks its output for NaN/Inf
and, when an input requires a gradient, records a node holding the inputs
and a backward rule. ``backward`` orders those nodes into a ``Tape`` and
runs the rules in reverse.
"""

import threading
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit

from ..errors import ContractError, NonFiniteError, ShapeError

ArrayLike = Union[np.ndarray, float, int, Sequence]
Operand = Union["Tensor", float, int]

_state = threading.local()


def _grad_enabled() -> bool:
    return getattr(_state, "grad_enabled", True)


def _next_op_index() -> int:
    index = getattr(_state, "op_index", 0)
    _state.op_index = index + 1
    return index


def reset_op_index() -> None:
    """Restart the per-thread forward op counter used in error reports."""
    _state.op_index = 0


@contextmanager
def no_grad() -> Iterator[None]:
    """Run forward ops without recording backward nodes."""
    previous = _grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = previous


@dataclass(eq=False)
class Node:
    """One recorded op: its inputs and how to push an output gradient into them."""

    op: str
    inputs: Tuple["Tensor", ...]
    backward: Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]
    index: int


class Tensor:
    """Dense row-major float64 array that can take part in differentiation."""

    def __init__(self, data: ArrayLike, requires_grad: bool = False,
                 name: Optional[str] = None, _node: Optional[Node] = None):
        array = np.array(data, dtype=np.float64)
        if any(extent <= 0 for extent in array.shape):
            raise ShapeError("Tensor extents must be positive", shapes=[array.shape])
        self.data = array
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self._node = _node

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError("item() needs a single-element tensor", {'shape': self.shape})
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        backward(self)

    # arithmetic
    def __add__(self, other: Operand) -> "Tensor":
        return add(self, other)

    def __radd__(self, other: Operand) -> "Tensor":
        return add(other, self)

    def __sub__(self, other: Operand) -> "Tensor":
        return sub(self, other)

    def __rsub__(self, other: Operand) -> "Tensor":
        return sub(other, self)

    def __mul__(self, other: Operand) -> "Tensor":
        return mul(self, other)

    def __rmul__(self, other: Operand) -> "Tensor":
        return mul(other, self)

    def __truediv__(self, other: Operand) -> "Tensor":
        return div(self, other)

    def __rtruediv__(self, other: Operand) -> "Tensor":
        return div(other, self)

    def __neg__(self) -> "Tensor":
        return scale(self, -1.0)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def __getitem__(self, index) -> "Tensor":
        return take(self, index)

    # unary ops
    def sigmoid(self) -> "Tensor":
        return sigmoid(self)

    def tanh(self) -> "Tensor":
        return tanh(self)

    def relu(self) -> "Tensor":
        return relu(self)

    def exp(self) -> "Tensor":
        return exp(self)

    def log(self) -> "Tensor":
        return log(self)

    def pow(self, exponent: float) -> "Tensor":
        return power(self, exponent)

    def clip(self, low: float, high: float) -> "Tensor":
        return clip(self, low, high)

    def sum(self, axis: Optional[int] = None, keepdims: bool = False) -> "Tensor":
        return tensor_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis: Optional[int] = None, keepdims: bool = False) -> "Tensor":
        return tensor_mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape: int) -> "Tensor":
        return reshape(self, shape)

    def transpose(self, *axes: int) -> "Tensor":
        return transpose(self, axes or None)


def as_tensor(value: Union[Tensor, ArrayLike]) -> Tensor:
    """Wrap plain numbers and arrays as constant tensors."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def _record(op: str, data: np.ndarray, inputs: Sequence[Tensor],
            backward_rule: Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]) -> Tensor:
    index = _next_op_index()
    if not np.all(np.isfinite(data)):
        raise NonFiniteError(f"Non-finite output from {op}", op=op, op_index=index)
    if any(extent <= 0 for extent in data.shape):
        raise ShapeError(f"{op} produced an empty tensor", shapes=[data.shape])
    needs_grad = _grad_enabled() and any(t.requires_grad for t in inputs)
    out = Tensor.__new__(Tensor)
    out.data = np.asarray(data, dtype=np.float64)
    out.requires_grad = needs_grad
    out.grad = None
    out.name = None
    out._node = Node(op, tuple(inputs), backward_rule, index) if needs_grad else None
    return out


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    # only scalar-vs-tensor broadcasting exists, so the other side is 0-d
    return np.asarray(grad.sum())


def _check_broadcast(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape == b.shape or a.ndim == 0 or b.ndim == 0:
        return
    raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}",
                     shapes=[a.shape, b.shape])


# ---------------------------------------------------------------------------
# Elementwise arithmetic
# ---------------------------------------------------------------------------

def add(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("add", a, b)

    def rule(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _record("add", a.data + b.data, (a, b), rule)


def sub(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("sub", a, b)

    def rule(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _record("sub", a.data - b.data, (a, b), rule)


def mul(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("mul", a, b)

    def rule(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _record("mul", a.data * b.data, (a, b), rule)


def div(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("div", a, b)
    out = a.data / b.data

    def rule(g):
        return (_unbroadcast(g / b.data, a.shape),
                _unbroadcast(-g * out / b.data, b.shape))

    return _record("div", out, (a, b), rule)


def scale(x: Tensor, factor: float) -> Tensor:
    factor = float(factor)

    def rule(g):
        return (g * factor,)

    return _record("scale", x.data * factor, (x,), rule)


def add_bias(x: Tensor, bias: Tensor) -> Tensor:
    """Add a vector along the last axis of ``x``."""
    if bias.ndim != 1 or x.shape[-1:] != bias.shape:
        raise ShapeError(f"add_bias: bias {bias.shape} does not match last axis of {x.shape}",
                         shapes=[x.shape, bias.shape])

    def rule(g):
        return g, g.reshape(-1, bias.shape[0]).sum(axis=0)

    return _record("add_bias", x.data + bias.data, (x, bias), rule)


# ---------------------------------------------------------------------------
# Nonlinearities
# ---------------------------------------------------------------------------

def sigmoid(x: Tensor) -> Tensor:
    out = expit(x.data)

    def rule(g):
        return (g * out * (1.0 - out),)

    return _record("sigmoid", out, (x,), rule)


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)

    def rule(g):
        return (g * (1.0 - out * out),)

    return _record("tanh", out, (x,), rule)


def relu(x: Tensor) -> Tensor:
    positive = x.data > 0

    def rule(g):
        return (g * positive,)

    return _record("relu", np.where(positive, x.data, 0.0), (x,), rule)


def exp(x: Tensor) -> Tensor:
    out = np.exp(x.data)

    def rule(g):
        return (g * out,)

    return _record("exp", out, (x,), rule)


def log(x: Tensor) -> Tensor:
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(x.data)

    def rule(g):
        return (g / x.data,)

    return _record("log", out, (x,), rule)


def power(x: Tensor, exponent: float) -> Tensor:
    exponent = float(exponent)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.power(x.data, exponent)

    def rule(g):
        if exponent == 0.0:
            return (np.zeros_like(g),)
        return (g * exponent * np.power(x.data, exponent - 1.0),)

    return _record("pow", out, (x,), rule)


def clip(x: Tensor, low: float, high: float) -> Tensor:
    inside = (x.data >= low) & (x.data <= high)

    def rule(g):
        return (g * inside,)

    return _record("clip", np.clip(x.data, low, high), (x,), rule)


# ---------------------------------------------------------------------------
# Reductions and shape ops
# ---------------------------------------------------------------------------

def tensor_sum(x: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def rule(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _record("sum", np.asarray(out), (x,), rule)


def tensor_mean(x: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    count = x.size if axis is None else x.shape[axis]
    return scale(tensor_sum(x, axis=axis, keepdims=keepdims), 1.0 / count)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
        shape = tuple(shape[0])
    out = x.data.reshape(shape)

    def rule(g):
        return (g.reshape(x.shape),)

    return _record("reshape", out, (x,), rule)


def transpose(x: Tensor, axes: Optional[Sequence[int]] = None) -> Tensor:
    if axes is None:
        axes = tuple(reversed(range(x.ndim)))
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))

    def rule(g):
        return (g.transpose(inverse),)

    return _record("transpose", x.data.transpose(axes), (x,), rule)


def take(x: Tensor, index) -> Tensor:
    """Basic slicing or boolean-mask selection."""
    out = np.array(x.data[index])

    def rule(g):
        full = np.zeros_like(x.data)
        full[index] += g
        return (full,)

    return _record("take", out, (x,), rule)


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    shapes = {t.shape for t in tensors}
    if len(shapes) != 1:
        raise ShapeError("stack: all tensors need the same shape",
                         shapes=[t.shape for t in tensors])
    out = np.stack([t.data for t in tensors], axis=axis)

    def rule(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))

    return _record("stack", out, tensors, rule)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    """Concatenate along one axis; every other extent must agree."""
    tensors = [as_tensor(t) for t in tensors]
    reference = tensors[0]
    axis = axis % reference.ndim
    for t in tensors[1:]:
        if t.ndim != reference.ndim or any(
                t.shape[i] != reference.shape[i] for i in range(t.ndim) if i != axis):
            raise ShapeError("concat: extents differ off the concatenation axis",
                             shapes=[reference.shape, t.shape])
    out = np.concatenate([t.data for t in tensors], axis=axis)
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def rule(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _record("concat", out, tensors, rule)


def concat_last_axis(tensors: Sequence[Tensor]) -> Tensor:
    return concat(tensors, axis=-1)


# ---------------------------------------------------------------------------
# Linear algebra, softmax, normalization
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """
    Matrix product.

    ``a[..., m, k] @ b[k, n]`` contracts the last axis of ``a`` with a shared
    matrix; ``a[..., m, k] @ b[..., k, n]`` with equal leading extents is a
    batched product.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim >= 2 and b.ndim == 2 and a.shape[-1] == b.shape[0]:
        def rule(g):
            k = a.shape[-1]
            grad_a = g @ b.data.T
            grad_b = a.data.reshape(-1, k).T @ g.reshape(-1, b.shape[1])
            return grad_a, grad_b
    elif (a.ndim == b.ndim and a.ndim >= 3 and a.shape[:-2] == b.shape[:-2]
          and a.shape[-1] == b.shape[-2]):
        def rule(g):
            return g @ np.swapaxes(b.data, -1, -2), np.swapaxes(a.data, -1, -2) @ g
    else:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}",
                         shapes=[a.shape, b.shape])

    return _record("matmul", a.data @ b.data, (a, b), rule)


def softmax_lastaxis(x: Tensor, mask: Optional[np.ndarray] = None) -> Tensor:
    """
    Softmax over the last axis with max-subtraction.

    ``mask`` (boolean, broadcastable to ``x``) marks the positions allowed to
    receive weight; every row must allow at least one position.
    """
    z = x.data if mask is None else np.where(mask, x.data, -np.inf)
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)

    def rule(g):
        return (out * (g - (g * out).sum(axis=-1, keepdims=True)),)

    return _record("softmax", out, (x,), rule)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then apply a per-feature gain and bias."""
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError("layer_norm: gain/bias must match the last axis",
                         shapes=[x.shape, gain.shape, bias.shape])
    centered = x.data - x.data.mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt((centered * centered).mean(axis=-1, keepdims=True) + eps)
    normed = centered * inv_std
    out = normed * gain.data + bias.data

    def rule(g):
        flat_g = g.reshape(-1, d)
        grad_gain = (flat_g * normed.reshape(-1, d)).sum(axis=0)
        grad_bias = flat_g.sum(axis=0)
        gn = g * gain.data
        grad_x = inv_std / d * (
            d * gn
            - gn.sum(axis=-1, keepdims=True)
            - normed * (gn * normed).sum(axis=-1, keepdims=True)
        )
        return grad_x, grad_gain, grad_bias

    return _record("layer_norm", out, (x, gain, bias), rule)


def elementwise(op: str, *args, **kwargs) -> Tensor:
    """Dispatch one of the named elementwise ops."""
    table = {
        "add": add,
        "sub": sub,
        "mul": mul,
        "div": div,
        "sigmoid": sigmoid,
        "tanh": tanh,
        "relu": relu,
        "scale": scale,
        "concat-last-axis": lambda *tensors: concat_last_axis(tensors),
    }
    if op not in table:
        raise ContractError(f"Unknown elementwise op: {op}",
                            {'valid': ", ".join(sorted(table))})
    return table[op](*args, **kwargs)


# ---------------------------------------------------------------------------
# Backward pass
# ---------------------------------------------------------------------------

class Tape:
    """Recorded ops reachable from one output, in topological order."""

    def __init__(self, order: List[Tensor]):
        self.order = order

    @property
    def entries(self) -> List[Node]:
        return [t._node for t in self.order if t._node is not None]

    @classmethod
    def from_output(cls, output: Tensor) -> "Tape":
        order: List[Tensor] = []
        visited = set()
        stack_ = [(output, False)]
        while stack_:
            tensor, expanded = stack_.pop()
            if expanded:
                order.append(tensor)
                continue
            if id(tensor) in visited:
                continue
            visited.add(id(tensor))
            stack_.append((tensor, True))
            if tensor._node is not None:
                for parent in tensor._node.inputs:
                    if parent.requires_grad and id(parent) not in visited:
                        stack_.append((parent, False))
        return cls(order)

    def run_backward(self, output: Tensor, seed: np.ndarray) -> None:
        grads = {id(output): seed}
        for tensor in reversed(self.order):
            g = grads.pop(id(tensor), None)
            if g is None:
                continue
            node = tensor._node
            if node is None:
                tensor.grad = g.copy() if tensor.grad is None else tensor.grad + g
                continue
            for parent, parent_grad in zip(node.inputs, node.backward(g)):
                if parent_grad is None or not parent.requires_grad:
                    continue
                if not np.all(np.isfinite(parent_grad)):
                    raise NonFiniteError(f"Non-finite gradient through {node.op}",
                                         op=node.op, op_index=node.index)
                key = id(parent)
                grads[key] = parent_grad if key not in grads else grads[key] + parent_grad


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every requires_grad leaf."""
    if loss.ndim != 0 and loss.size != 1:
        raise ContractError("backward needs a scalar loss", {'shape': loss.shape})
    if not loss.requires_grad:
        raise ContractError("loss was not produced through recorded ops")
    tape = Tape.from_output(loss)
    tape.run_backward(loss, np.ones_like(loss.data))
