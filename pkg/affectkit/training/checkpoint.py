"""
Checkpoint Files

Framed little-endian binary:

    magic "AFCK" | version u16 = 1
    | config text   (u32 length + UTF-8 ``key = value`` lines)
    | model spec    (u32 length + UTF-8 JSON)
    | run state     (u32 length + UTF-8 JSON: epoch, best score, RNG state)
    | tensor count u32, then per tensor:
        name (u16 length + UTF-8) | ndim u8 | extents u32 * ndim | float64 data

Model parameters are stored under ``param.<name>``, optimizer buffers under
their optimizer prefix.
"""

import json
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np
import structlog

from ..config import TrainConfig, parse_text, resolve_config
from ..errors import AffectError, CheckpointError

logger = structlog.get_logger(__name__)

MAGIC = b"AFCK"
VERSION = 1
PARAM_PREFIX = "param."


@dataclass
class ModelSpec:
    """Enough topology to rebuild the model next to the stored config."""

    task: str
    input_dim: int
    options: Dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({"task": self.task, "input_dim": self.input_dim,
                           "options": self.options}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ModelSpec":
        data = json.loads(text)
        return cls(data["task"], int(data["input_dim"]), data.get("options", {}))


@dataclass
class CheckpointState:
    """Everything needed to resume a run or run inference."""

    config: TrainConfig
    spec: ModelSpec
    epoch: int
    rng_state: Dict[str, Any]
    best_score: Optional[float]
    best_epoch: int
    params: Dict[str, np.ndarray]
    optimizer: Dict[str, np.ndarray] = field(default_factory=dict)


class _Reader:
    def __init__(self, data: bytes, path: str):
        self.data = data
        self.path = path
        self.offset = 0

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.data):
            raise CheckpointError("Checkpoint ends unexpectedly", path=self.path,
                                  offset=self.offset)
        chunk = self.data[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def text(self, length_fmt: str = "<I") -> str:
        (length,) = self.unpack(length_fmt)
        return self.take(length).decode("utf-8")


def _text_block(text: str, length_fmt: str = "<I") -> bytes:
    raw = text.encode("utf-8")
    return struct.pack(length_fmt, len(raw)) + raw


def encode_checkpoint(state: CheckpointState) -> bytes:
    tensors = {f"{PARAM_PREFIX}{n}": a for n, a in state.params.items()}
    tensors.update(state.optimizer)
    run_state = {"epoch": state.epoch, "best_score": state.best_score,
                 "best_epoch": state.best_epoch, "rng_state": state.rng_state}
    parts = [
        MAGIC, struct.pack("<H", VERSION),
        _text_block(state.config.to_text()),
        _text_block(state.spec.to_json()),
        _text_block(json.dumps(run_state, sort_keys=True)),
        struct.pack("<I", len(tensors)),
    ]
    for name, array in tensors.items():
        array = np.ascontiguousarray(array, dtype="<f8")
        parts.append(_text_block(name, "<H"))
        parts.append(struct.pack("<B", array.ndim))
        parts.append(struct.pack(f"<{array.ndim}I", *array.shape))
        parts.append(array.tobytes())
    return b"".join(parts)


def decode_checkpoint(data: bytes, path: str = "<memory>") -> CheckpointState:
    reader = _Reader(data, path)
    if reader.take(4) != MAGIC:
        raise CheckpointError("Not an AFCK checkpoint", path=path, offset=0)
    (version,) = reader.unpack("<H")
    if version != VERSION:
        raise CheckpointError(f"Unsupported checkpoint version {version}", path=path)
    try:
        config = resolve_config(parse_text(reader.text()), validate=False)
        spec = ModelSpec.from_json(reader.text())
        run_state = json.loads(reader.text())
    except (AffectError, ValueError, KeyError, TypeError) as e:
        raise CheckpointError(f"Corrupt checkpoint header: {e}", path=path) from e

    (count,) = reader.unpack("<I")
    params: Dict[str, np.ndarray] = {}
    optimizer: Dict[str, np.ndarray] = {}
    for _ in range(count):
        name = reader.text("<H")
        (ndim,) = reader.unpack("<B")
        shape = reader.unpack(f"<{ndim}I") if ndim else ()
        size = int(np.prod(shape)) if shape else 1
        array = np.frombuffer(reader.take(8 * size), dtype="<f8").reshape(shape)
        array = array.astype(np.float64)
        if name.startswith(PARAM_PREFIX):
            params[name[len(PARAM_PREFIX):]] = array
        else:
            optimizer[name] = array
    if reader.offset != len(data):
        raise CheckpointError("Trailing bytes after the tensor table", path=path,
                              offset=reader.offset)
    return CheckpointState(config, spec, int(run_state["epoch"]), run_state["rng_state"],
                           run_state.get("best_score"), int(run_state.get("best_epoch", -1)),
                           params, optimizer)


def save_checkpoint(path: Union[str, Path], state: CheckpointState) -> Path:
    """Write atomically (temp file then rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    temporary = path.with_suffix(path.suffix + ".tmp")
    temporary.write_bytes(encode_checkpoint(state))
    os.replace(temporary, path)
    logger.debug("Checkpoint written", path=str(path), epoch=state.epoch,
                 tensors=len(state.params) + len(state.optimizer))
    return path


def load_checkpoint(path: Union[str, Path]) -> CheckpointState:
    path = Path(path)
    if not path.exists():
        raise CheckpointError("Checkpoint file not found", path=str(path))
    return decode_checkpoint(path.read_bytes(), path=str(path))
