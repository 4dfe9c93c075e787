"""
AFB1 Feature Files

Binary per-video feature file, little-endian:

    magic "AFB1" | version u16 = 1 | label_kind u8 | reserved u8
    | id_len u16 | video_id (UTF-8) | n_frames u32 | feat_dim u32
    | features: n_frames * feat_dim float32
    | labels: VA -> n_frames * 2 float32, AU12 -> n_frames * 12 u8

label_kind is 0 (none), 1 (VA) or 2 (AU12).
"""

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
import structlog

from ..errors import (
    BadMagicError,
    DataFormatError,
    FrameCountMismatchError,
    LabelRangeError,
    TruncatedPayloadError,
)

logger = structlog.get_logger(__name__)

MAGIC = b"AFB1"
VERSION = 1
LABEL_NONE, LABEL_VA, LABEL_AU = 0, 1, 2
LABEL_KINDS = {LABEL_NONE: "none", LABEL_VA: "va", LABEL_AU: "au"}
N_AUS = 12

_PREFIX = struct.Struct("<4sHBBH")
_DIMS = struct.Struct("<II")


def _label_width(kind: int) -> int:
    return {LABEL_NONE: 0, LABEL_VA: 2 * 4, LABEL_AU: N_AUS}[kind]


@dataclass
class VideoRecord:
    """
    One video's per-frame features and optional labels.

    ``labels`` is [n_frames, 2] for VA or [n_frames, 12] AU bits.
    """

    video_id: str
    features: np.ndarray
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        self.features = np.asarray(self.features)
        if self.features.ndim != 2 or min(self.features.shape) < 1:
            raise DataFormatError("Features must be a non-empty [frames, dim] array",
                                  video_id=self.video_id, shape=self.features.shape)
        if self.labels is not None:
            self.labels = np.asarray(self.labels)
            if self.labels.shape[0] != self.n_frames:
                raise FrameCountMismatchError(
                    "Label frame count differs from feature frame count",
                    header_frames=self.n_frames, payload_frames=self.labels.shape[0],
                    video_id=self.video_id)
            if self.labels.ndim != 2 or self.labels.shape[1] not in (2, N_AUS):
                raise DataFormatError("Labels must be [frames, 2] (VA) or [frames, 12] (AU)",
                                      video_id=self.video_id, shape=self.labels.shape)
            _check_label_range(self.labels, self.label_kind, video_id=self.video_id)

    @property
    def n_frames(self) -> int:
        return self.features.shape[0]

    @property
    def feat_dim(self) -> int:
        return self.features.shape[1]

    @property
    def label_kind(self) -> str:
        if self.labels is None:
            return "none"
        return "va" if self.labels.shape[1] == 2 else "au"


def _check_label_range(labels: np.ndarray, kind: str, offset: Optional[int] = None,
                       **context) -> None:
    if kind == "va":
        bad = ~(np.isfinite(labels) & (np.abs(labels) <= 1.0))
        item_size = 4
        message = "VA labels must lie in [-1, 1]"
    else:
        bad = ~((labels == 0) | (labels == 1))
        item_size = 1
        message = "AU labels must be 0 or 1"
    if np.any(bad):
        first = int(np.flatnonzero(bad.reshape(-1))[0])
        raise LabelRangeError(
            message,
            offset=None if offset is None else offset + first * item_size,
            frame=first // labels.shape[1], **context)


def encode_record(record: VideoRecord) -> bytes:
    """Serialize a record to AFB1 bytes."""
    kind = {"none": LABEL_NONE, "va": LABEL_VA, "au": LABEL_AU}[record.label_kind]
    video_id = record.video_id.encode("utf-8")
    parts = [
        _PREFIX.pack(MAGIC, VERSION, kind, 0, len(video_id)),
        video_id,
        _DIMS.pack(record.n_frames, record.feat_dim),
        np.ascontiguousarray(record.features, dtype="<f4").tobytes(),
    ]
    if kind == LABEL_VA:
        parts.append(np.ascontiguousarray(record.labels, dtype="<f4").tobytes())
    elif kind == LABEL_AU:
        parts.append(np.ascontiguousarray(record.labels, dtype=np.uint8).tobytes())
    return b"".join(parts)


def decode_record(data: bytes, path: Optional[str] = None) -> VideoRecord:
    """
    Parse AFB1 bytes.

    Raises:
        BadMagicError: Unknown magic, version or label kind
        TruncatedPayloadError: Data ends inside the header or payload
        FrameCountMismatchError: Payload holds a different whole number of frames
        LabelRangeError: Labels outside their codomain
    """
    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagicError("Not an AFB1 file", path=path, offset=0, found=data[:4])
    if len(data) < _PREFIX.size:
        raise TruncatedPayloadError("File ends inside the header", path=path, offset=len(data))
    _, version, kind, _, id_len = _PREFIX.unpack_from(data, 0)
    if version != VERSION:
        raise BadMagicError(f"Unsupported AFB1 version {version}", path=path, offset=4)
    if kind not in LABEL_KINDS:
        raise BadMagicError(f"Unknown label kind {kind}", path=path, offset=6)

    id_end = _PREFIX.size + id_len
    header_len = id_end + _DIMS.size
    if len(data) < header_len:
        raise TruncatedPayloadError("File ends inside the header", path=path, offset=len(data))
    try:
        video_id = data[_PREFIX.size:id_end].decode("utf-8")
    except UnicodeDecodeError as e:
        raise DataFormatError("Video id is not valid UTF-8", path=path,
                              offset=_PREFIX.size + e.start) from e
    n_frames, feat_dim = _DIMS.unpack_from(data, id_end)
    if n_frames == 0 or feat_dim == 0:
        raise DataFormatError("Header declares an empty feature block", path=path,
                              offset=id_end, n_frames=n_frames, feat_dim=feat_dim)

    frame_bytes = feat_dim * 4 + _label_width(kind)
    payload = len(data) - header_len
    expected = n_frames * frame_bytes
    if payload != expected:
        if payload % frame_bytes == 0:
            raise FrameCountMismatchError(
                f"Header declares {n_frames} frames, payload holds {payload // frame_bytes}",
                header_frames=n_frames, payload_frames=payload // frame_bytes,
                path=path, offset=header_len)
        if payload < expected:
            raise TruncatedPayloadError(
                f"Payload has {payload} bytes, header requires {expected}",
                path=path, offset=len(data))
        raise DataFormatError(f"{payload - expected} trailing bytes after the payload",
                              path=path, offset=header_len + expected)

    features_end = header_len + n_frames * feat_dim * 4
    features = np.frombuffer(data, dtype="<f4", count=n_frames * feat_dim,
                             offset=header_len).reshape(n_frames, feat_dim).astype(np.float32)
    if not np.all(np.isfinite(features)):
        first = int(np.flatnonzero(~np.isfinite(features.reshape(-1)))[0])
        raise DataFormatError("Non-finite feature value", path=path,
                              offset=header_len + first * 4)

    labels = None
    if kind == LABEL_VA:
        labels = np.frombuffer(data, dtype="<f4", count=n_frames * 2,
                               offset=features_end).reshape(n_frames, 2).astype(np.float32)
        _check_label_range(labels, "va", offset=features_end, path=path)
    elif kind == LABEL_AU:
        labels = np.frombuffer(data, dtype=np.uint8, count=n_frames * N_AUS,
                               offset=features_end).reshape(n_frames, N_AUS).copy()
        _check_label_range(labels, "au", offset=features_end, path=path)
    return VideoRecord(video_id, features, labels)


def write_video_file(path: Union[str, Path], record: VideoRecord) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_record(record))
    logger.debug("Wrote feature file", path=str(path), video_id=record.video_id,
                 frames=record.n_frames, feat_dim=record.feat_dim)
    return path


def read_video_file(path: Union[str, Path]) -> VideoRecord:
    """Read one AFB1 file; parse errors carry the path and byte offset."""
    path = Path(path)
    return decode_record(path.read_bytes(), path=str(path))
