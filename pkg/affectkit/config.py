"""
Training Configuration

``TrainConfig`` holds every knob of a training run. Files are either flat
``key = value`` text or YAML mappings; values are decoded with PyYAML and
coerced to the field's type. Defaults depend on the task.
"""

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

import structlog
import yaml

from .errors import ConfigurationError

logger = structlog.get_logger(__name__)

TASKS = ("stage1", "stage2", "au")
CHOICES = {
    "task": TASKS,
    "optimizer": ("adam", "sgd"),
    "schedule": ("constant", "cosine-warm-restarts"),
    "f1_average": ("macro", "micro"),
}

# Per-task departures from the field defaults below (which are stage1's)
TASK_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "stage1": {},
    "stage2": {"gru_layers": 4},
    "au": {
        "epochs": 20,
        "optimizer": "sgd",
        "lr": 0.01,
        "momentum": 0.9,
        "schedule": "cosine-warm-restarts",
        "transformer_blocks": 2,
    },
}


@dataclass
class TrainConfig:
    """Resolved configuration of one training run."""

    task: str = "stage1"
    epochs: int = 25
    lr: float = 1e-3
    optimizer: str = "adam"
    momentum: float = 0.0
    schedule: str = "constant"
    t0: int = 5
    t_mult: int = 1
    eta_min: float = 1e-5
    batch_size: int = 16
    window: int = 64
    stride: int = 0
    seed: int = 0
    loss_weights: Tuple[float, float, float] = (1.0, 1.0, 1.0)
    k_folds: int = 5
    hidden_dim: int = 256
    gru_layers: int = 2
    transformer_blocks: int = 1
    heads: int = 4
    ff_mult: int = 4
    local_window: int = 5
    local_layers: int = 2
    attention_dim: int = 0
    expand_factor: int = 2
    clip_norm: float = 5.0
    focal_gamma: float = 2.0
    focal_alpha: float = 0.25
    threshold: float = 0.5
    f1_average: str = "macro"
    positional_encoding: bool = True
    infer_max_len: int = 2048

    @classmethod
    def for_task(cls, task: str = "stage1", **overrides) -> "TrainConfig":
        """Defaults for ``task`` with ``overrides`` applied (already typed)."""
        if task not in TASKS:
            raise ConfigurationError(f"Unknown task: {task}", key="task",
                                     expected=", ".join(TASKS))
        values = {**TASK_DEFAULTS[task], **overrides, "task": task}
        return cls(**values)

    @property
    def effective_stride(self) -> int:
        return self.stride or self.window

    def validate(self) -> "TrainConfig":
        """
        Check ranges and choices.

        Raises:
            ConfigurationError: Naming the first offending key
        """
        for key, valid in CHOICES.items():
            if getattr(self, key) not in valid:
                raise ConfigurationError(f"Invalid value for {key}: {getattr(self, key)!r}",
                                         key=key, expected=", ".join(valid))
        checks = [
            ("epochs", self.epochs >= 1, ">= 1"),
            ("lr", self.lr > 0, "> 0"),
            ("momentum", 0.0 <= self.momentum < 1.0, "in [0, 1)"),
            ("t0", self.t0 >= 1, ">= 1"),
            ("t_mult", self.t_mult >= 1, ">= 1"),
            ("eta_min", self.eta_min >= 0.0
             and (self.schedule == "constant" or self.eta_min <= self.lr), "in [0, lr]"),
            ("batch_size", self.batch_size >= 1, ">= 1"),
            ("window", self.window >= 1, ">= 1"),
            ("stride", 0 <= self.stride <= self.window, "in [0, window]"),
            ("loss_weights", all(w >= 0 for w in self.loss_weights), "non-negative"),
            ("k_folds", self.k_folds >= 2, ">= 2"),
            ("hidden_dim", self.hidden_dim >= 1, ">= 1"),
            ("gru_layers", self.gru_layers >= 1, ">= 1"),
            ("transformer_blocks", self.transformer_blocks >= 1, ">= 1"),
            ("heads", self.heads >= 1, ">= 1"),
            ("ff_mult", self.ff_mult >= 1, ">= 1"),
            ("local_window", self.local_window >= 0, ">= 0"),
            ("local_layers", self.local_layers >= 0, ">= 0"),
            ("attention_dim", self.attention_dim >= 0, ">= 0"),
            ("expand_factor", self.expand_factor >= 2, ">= 2"),
            ("clip_norm", self.clip_norm >= 0, ">= 0 (0 disables clipping)"),
            ("focal_gamma", self.focal_gamma >= 0, ">= 0"),
            ("focal_alpha", self.focal_alpha > 0, "> 0"),
            ("threshold", 0.0 <= self.threshold <= 1.0, "in [0, 1]"),
            ("infer_max_len", self.infer_max_len >= 1, ">= 1"),
        ]
        for key, ok, expected in checks:
            if not ok:
                raise ConfigurationError(f"Invalid value for {key}: {getattr(self, key)!r}",
                                         key=key, expected=expected)
        return self

    def as_dict(self) -> Dict[str, Any]:
        values = dataclasses.asdict(self)
        values["loss_weights"] = list(self.loss_weights)
        return values

    def to_text(self) -> str:
        """Serialize to the ``key = value`` format; ``parse_text`` inverts it."""
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool):
                text = "true" if value else "false"
            elif isinstance(value, tuple):
                text = ", ".join(repr(float(v)) for v in value)
            elif isinstance(value, float):
                text = repr(value)
            else:
                text = str(value)
            lines.append(f"{f.name} = {text}")
        return "\n".join(lines) + "\n"


FIELD_TYPES = {f.name: f.type for f in fields(TrainConfig)}


def _coerce(key: str, value: Any, source: Optional[str] = None) -> Any:
    expected = FIELD_TYPES[key]

    def fail(label: str):
        raise ConfigurationError(f"{key} must be {label}, got {value!r}", key=key,
                                 expected=label, config_file=source)

    if expected is bool:
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "false", "yes", "no"):
            return value.lower() in ("true", "yes")
        fail("a boolean")
    if expected is int:
        if isinstance(value, bool):
            fail("an integer")
        if isinstance(value, int):
            return value
        if isinstance(value, str):
            try:
                return int(value)
            except ValueError:
                pass
        fail("an integer")
    if expected is float:
        if isinstance(value, bool):
            fail("a number")
        if isinstance(value, (int, float)):
            return float(value)
        if isinstance(value, str):
            # YAML 1.1 reads exponent forms like 1e-05 as strings
            try:
                return float(value)
            except ValueError:
                pass
        fail("a number")
    if expected is str:
        if isinstance(value, str):
            return value
        fail("a string")
    # loss_weights
    items = value.split(",") if isinstance(value, str) else value
    if not isinstance(items, (list, tuple)) or len(items) != 3:
        fail("three comma-separated numbers")
    try:
        return tuple(float(v) for v in items)
    except (TypeError, ValueError):
        fail("three comma-separated numbers")


def parse_text(text: str, source: Optional[str] = None) -> Dict[str, Any]:
    """Decode flat ``key = value`` lines; blank lines and ``#`` comments are skipped."""
    raw: Dict[str, Any] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigurationError(f"Line {number} is not 'key = value': {stripped!r}",
                                     config_file=source, line=number)
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key in raw:
            raise ConfigurationError(f"Duplicate key on line {number}: {key}", key=key,
                                     config_file=source)
        try:
            raw[key] = yaml.safe_load(value) if value else ""
        except yaml.YAMLError:
            raw[key] = value
    return raw


def _read_file(path: Path) -> Dict[str, Any]:
    text = path.read_text(encoding="utf-8")
    if path.suffix in (".yaml", ".yml"):
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as e:
            raise ConfigurationError(f"Invalid YAML: {e}", config_file=str(path)) from e
        if data is None:
            return {}
        if not isinstance(data, dict):
            raise ConfigurationError("YAML config must be a mapping", config_file=str(path))
        return data
    return parse_text(text, source=str(path))


def resolve_config(raw: Mapping[str, Any], task: Optional[str] = None,
                   source: Optional[str] = None, validate: bool = True) -> TrainConfig:
    """
    Build a TrainConfig from decoded (untyped) values over the task defaults.

    Raises:
        ConfigurationError: Unknown key, wrong type, task clash, or (when
            ``validate``) an invalid choice or range
    """
    unknown = sorted(set(raw) - set(FIELD_TYPES))
    if unknown:
        raise ConfigurationError(f"Unknown configuration key: {unknown[0]}", key=unknown[0],
                                 config_file=source, valid=", ".join(FIELD_TYPES))

    typed = {key: _coerce(key, value, source) for key, value in raw.items()}
    file_task = typed.pop("task", None)
    if task is not None and file_task is not None and file_task != task:
        raise ConfigurationError(f"Config is for task {file_task!r}, command runs {task!r}",
                                 key="task", config_file=source)
    config = TrainConfig.for_task(task or file_task or "stage1", **typed)
    return config.validate() if validate else config


def load_config(path: Optional[Union[str, Path]] = None,
                overrides: Optional[Mapping[str, Any]] = None,
                task: Optional[str] = None) -> TrainConfig:
    """
    Resolve a training configuration.

    File values override task defaults and ``overrides`` (CLI flags) override
    file values.

    Args:
        path: Config file (``key = value`` text, or YAML by extension)
        overrides: Values from the command line, raw or typed
        task: Task the caller runs; a file naming another task is an error

    Returns:
        Validated TrainConfig

    Raises:
        ConfigurationError: Unknown key, wrong type, invalid choice or range
    """
    source = str(path) if path is not None else None
    raw: Dict[str, Any] = _read_file(Path(path)) if path is not None else {}
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    config = resolve_config(raw, task=task, source=source)
    logger.debug("Configuration resolved", task=config.task, config_file=source)
    return config
