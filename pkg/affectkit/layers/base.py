"""
Base Module

Abstract base class for every layer and model: named parameters, child
modules and state dictionaries.
"""

from abc import ABC, abstractmethod
from typing import Dict, Iterator, List, Mapping, Tuple

import numpy as np
import structlog

from ..autodiff import Tensor
from ..errors import CheckpointError


def uniform_init(rng: np.random.Generator, d_in: int, shape: Tuple[int, ...]) -> np.ndarray:
    """Uniform(-sqrt(1/d_in), +sqrt(1/d_in)) weights."""
    bound = np.sqrt(1.0 / d_in)
    return rng.uniform(-bound, bound, size=shape)


class Module(ABC):
    """Abstract base class for layers and models."""

    def __init__(self):
        self.logger = structlog.get_logger(f"{__name__}.{self.__class__.__name__}")
        self._params: Dict[str, Tensor] = {}
        self._children: Dict[str, "Module"] = {}

    def add_param(self, name: str, data: np.ndarray) -> Tensor:
        param = Tensor(data, requires_grad=True, name=name)
        self._params[name] = param
        return param

    def add_child(self, name: str, module: "Module") -> "Module":
        self._children[name] = module
        return module

    def param(self, name: str) -> Tensor:
        return self._params[name]

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Tensor]]:
        for name, param in self._params.items():
            yield f"{prefix}{name}", param
        for child_name, child in self._children.items():
            yield from child.named_parameters(f"{prefix}{child_name}.")

    def parameters(self) -> List[Tensor]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: Mapping[str, np.ndarray]) -> None:
        """
        Replace every parameter value.

        Raises:
            CheckpointError: If names or shapes differ from this module's
        """
        own = dict(self.named_parameters())
        missing = sorted(set(own) - set(state))
        unexpected = sorted(set(state) - set(own))
        if missing or unexpected:
            raise CheckpointError("Parameter names do not match the model",
                                  missing=", ".join(missing),
                                  unexpected=", ".join(unexpected))
        for name, param in own.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != param.shape:
                raise CheckpointError(f"Parameter {name} has shape {value.shape}, "
                                      f"model expects {param.shape}")
            param.data = value.copy()

    @abstractmethod
    def forward(self, *args, **kwargs):
        """Run the module on its inputs."""

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)
