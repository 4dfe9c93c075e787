"""
Optimizers

Adam and SGD with momentum as in-place updates over named parameter arrays,
plus global-norm gradient clipping. Optimizer buffers are exposed as named
arrays so checkpoints can store and restore them exactly.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

import numpy as np

from ..autodiff import Tensor
from ..errors import CheckpointError, ConfigurationError, NonFiniteError, ShapeError

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class AdamState:
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


@dataclass
class SgdState:
    velocity: Dict[str, np.ndarray] = field(default_factory=dict)


def _check(name: str, param: np.ndarray, grad: np.ndarray) -> None:
    if grad.shape != param.shape:
        raise ShapeError(f"Gradient of {name} does not match the parameter",
                         shapes=[param.shape, grad.shape])
    if not np.all(np.isfinite(grad)):
        raise NonFiniteError(f"Non-finite gradient for parameter {name}", parameter=name)


def adam_step(params: Mapping[str, np.ndarray], grads: Mapping[str, np.ndarray],
              state: AdamState, lr: float, beta1: float = ADAM_BETA1,
              beta2: float = ADAM_BETA2, eps: float = ADAM_EPS) -> AdamState:
    """
    One bias-corrected Adam update, applied to ``params`` in place.

    Raises:
        NonFiniteError: Naming the parameter whose gradient is NaN/Inf
    """
    for name, grad in grads.items():
        _check(name, params[name], grad)
    state.step += 1
    correction1 = 1.0 - beta1 ** state.step
    correction2 = 1.0 - beta2 ** state.step
    for name, grad in grads.items():
        m = state.m.get(name)
        v = state.v.get(name)
        m = (1.0 - beta1) * grad if m is None else beta1 * m + (1.0 - beta1) * grad
        v = (1.0 - beta2) * grad * grad if v is None else beta2 * v + (1.0 - beta2) * grad * grad
        state.m[name], state.v[name] = m, v
        params[name] -= lr * (m / correction1) / (np.sqrt(v / correction2) + eps)
    return state


def sgd_step(params: Mapping[str, np.ndarray], grads: Mapping[str, np.ndarray],
             state: SgdState, lr: float, momentum: float = 0.0) -> SgdState:
    """v <- momentum * v + g; p <- p - lr * v (in place)."""
    for name, grad in grads.items():
        _check(name, params[name], grad)
    for name, grad in grads.items():
        previous = state.velocity.get(name)
        velocity = grad.copy() if previous is None else momentum * previous + grad
        state.velocity[name] = velocity
        params[name] -= lr * velocity
    return state


def clip_grad_norm(parameters: Iterable[Tensor], max_norm: float) -> float:
    """
    Rescale gradients so their global L2 norm is at most ``max_norm``.

    ``max_norm <= 0`` leaves them unchanged.

    Returns:
        The norm before clipping
    """
    grads = [p.grad for p in parameters if p.grad is not None]
    total = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))
    if max_norm > 0 and total > max_norm:
        factor = max_norm / (total + 1e-12)
        for g in grads:
            g *= factor
    return total


class Optimizer(ABC):
    """Updates a fixed set of named parameters from their ``.grad``."""

    name: str = "base"

    def __init__(self, named_params: Iterable[Tuple[str, Tensor]]):
        self.params: Dict[str, Tensor] = dict(named_params)

    def _arrays(self) -> Tuple[Dict[str, np.ndarray], Dict[str, np.ndarray]]:
        params = {n: p.data for n, p in self.params.items()}
        grads = {n: p.grad if p.grad is not None else np.zeros_like(p.data)
                 for n, p in self.params.items()}
        return params, grads

    @abstractmethod
    def step(self, lr: float) -> None:
        """Apply one update with learning rate ``lr``."""

    @abstractmethod
    def state_arrays(self) -> Dict[str, np.ndarray]:
        """Buffers as named arrays for checkpointing."""

    @abstractmethod
    def load_state_arrays(self, arrays: Mapping[str, np.ndarray]) -> None:
        """Restore buffers written by ``state_arrays``."""

    def _restore(self, arrays: Mapping[str, np.ndarray], prefix: str) -> Dict[str, np.ndarray]:
        restored = {}
        for key, value in arrays.items():
            if not key.startswith(prefix):
                continue
            name = key[len(prefix):]
            if name not in self.params or value.shape != self.params[name].shape:
                raise CheckpointError(f"Optimizer buffer {key} does not match the model")
            restored[name] = np.array(value, dtype=np.float64)
        return restored


class Adam(Optimizer):
    name = "adam"

    def __init__(self, named_params, beta1: float = ADAM_BETA1, beta2: float = ADAM_BETA2,
                 eps: float = ADAM_EPS):
        super().__init__(named_params)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.state = AdamState()

    def step(self, lr: float) -> None:
        params, grads = self._arrays()
        adam_step(params, grads, self.state, lr, self.beta1, self.beta2, self.eps)

    def state_arrays(self) -> Dict[str, np.ndarray]:
        arrays = {"adam.step": np.array([float(self.state.step)])}
        arrays.update({f"adam.m.{n}": m for n, m in self.state.m.items()})
        arrays.update({f"adam.v.{n}": v for n, v in self.state.v.items()})
        return arrays

    def load_state_arrays(self, arrays: Mapping[str, np.ndarray]) -> None:
        step = arrays.get("adam.step")
        self.state = AdamState(
            step=int(step[0]) if step is not None else 0,
            m=self._restore(arrays, "adam.m."),
            v=self._restore(arrays, "adam.v."),
        )


class SGD(Optimizer):
    name = "sgd"

    def __init__(self, named_params, momentum: float = 0.0):
        super().__init__(named_params)
        self.momentum = momentum
        self.state = SgdState()

    def step(self, lr: float) -> None:
        params, grads = self._arrays()
        sgd_step(params, grads, self.state, lr, self.momentum)

    def state_arrays(self) -> Dict[str, np.ndarray]:
        return {f"sgd.velocity.{n}": v for n, v in self.state.velocity.items()}

    def load_state_arrays(self, arrays: Mapping[str, np.ndarray]) -> None:
        self.state = SgdState(velocity=self._restore(arrays, "sgd.velocity."))


def build_optimizer(kind: str, named_params: Iterable[Tuple[str, Tensor]],
                    momentum: Optional[float] = None) -> Optimizer:
    if kind == "adam":
        return Adam(named_params)
    if kind == "sgd":
        return SGD(named_params, momentum=momentum or 0.0)
    raise ConfigurationError(f"Unknown optimizer: {kind}", key="optimizer",
                             expected="adam, sgd")


__all__: List[str] = [
    "Adam", "AdamState", "Optimizer", "SGD", "SgdState", "adam_step", "build_optimizer",
    "clip_grad_norm", "sgd_step",
]
