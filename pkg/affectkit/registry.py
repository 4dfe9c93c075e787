"""
Trainer Registry

Discovers the training loops in ``affectkit.training`` and looks them up by
task name.
"""

import importlib
import inspect
from pathlib import Path
from typing import Any, Dict, List, Type

import structlog

from .errors import ConfigurationError
from .training.trainer import Trainer

# Support modules of the training package that hold no trainers
_SKIP = {"__init__", "trainer", "checkpoint", "evaluate", "optim", "schedule"}


class TrainerRegistry:
    """Registry of trainer classes keyed by task name."""

    def __init__(self):
        self.logger = structlog.get_logger(__name__)
        self._trainers: Dict[str, Type[Trainer]] = {}
        self._discover_trainers()

    def _discover_trainers(self) -> None:
        """Import every training module and register its Trainer subclasses."""
        training_dir = Path(__file__).parent / "training"
        for module_file in sorted(training_dir.glob("*.py")):
            if module_file.stem in _SKIP:
                continue
            module_name = f"{__package__}.training.{module_file.stem}"
            try:
                module = importlib.import_module(module_name)
            except ImportError as e:
                self.logger.error("Failed to import trainer module", module=module_name,
                                  error=str(e))
                continue
            for name, obj in inspect.getmembers(module, inspect.isclass):
                if issubclass(obj, Trainer) and obj is not Trainer and not inspect.isabstract(obj):
                    self.register(obj.task, obj)
                    self.logger.debug("Discovered trainer", task=obj.task, module=module_name)

    def register(self, task: str, trainer_class: Type[Trainer]) -> None:
        """Register a trainer class under a task name."""
        if not issubclass(trainer_class, Trainer):
            raise ConfigurationError(f"Trainer class must inherit from Trainer: {trainer_class}",
                                     key="task")
        self._trainers[task] = trainer_class

    def get(self, task: str) -> Type[Trainer]:
        if task not in self._trainers:
            raise ConfigurationError(f"Unknown task: {task}", key="task",
                                     expected=", ".join(sorted(self._trainers)))
        return self._trainers[task]

    def list_trainers(self) -> Dict[str, Dict[str, Any]]:
        """Registered trainers with their description and label kind."""
        return {
            task: {"description": cls.description, "label_kind": cls.label_kind}
            for task, cls in sorted(self._trainers.items())
        }

    def tasks(self) -> List[str]:
        return sorted(self._trainers)

    def has(self, task: str) -> bool:
        return task in self._trainers
