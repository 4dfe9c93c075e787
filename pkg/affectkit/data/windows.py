"""
Sequence Windows

Cuts videos into fixed-length windows for training and stitches per-window
predictions back into per-frame streams.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from ..errors import ContractError, ShapeError
from .afb1 import VideoRecord


@dataclass
class SequenceWindow:
    """
    One window of ``length`` frames starting at ``start``.

    Frames past ``valid`` repeat the video's last frame and are masked out.
    """

    video_id: str
    start: int
    features: np.ndarray
    labels: Optional[np.ndarray]
    mask: np.ndarray

    @property
    def length(self) -> int:
        return self.features.shape[0]

    @property
    def valid(self) -> int:
        return int(self.mask.sum())


@dataclass
class SequenceBatch:
    """(batch, time, feature) block with per-window masks and labels."""

    features: np.ndarray
    labels: Optional[np.ndarray]
    mask: np.ndarray
    video_ids: List[str]
    starts: List[int]

    @property
    def lengths(self) -> np.ndarray:
        return self.mask.sum(axis=1)

    def __len__(self) -> int:
        return self.features.shape[0]


def window_starts(n_frames: int, length: int, stride: Optional[int] = None) -> List[int]:
    """Window start frames: 0, stride, 2*stride, ... until the last window reaches the end."""
    stride = length if not stride else stride
    if length < 1:
        raise ContractError("Window length must be >= 1", {'length': length})
    if not 1 <= stride <= length:
        raise ContractError("Stride must lie in [1, window length]",
                            {'stride': stride, 'length': length})
    starts = [0]
    while starts[-1] + length < n_frames:
        starts.append(starts[-1] + stride)
    return starts


def _pad(block: np.ndarray, length: int) -> np.ndarray:
    if block.shape[0] == length:
        return block
    tail = np.repeat(block[-1:], length - block.shape[0], axis=0)
    return np.concatenate([block, tail], axis=0)


def window_sequences(record: VideoRecord, length: int,
                     stride: Optional[int] = None) -> List[SequenceWindow]:
    """
    Cover every frame of ``record`` with windows of ``length`` frames.

    The final short window repeats the last frame up to ``length`` and masks
    the repeats.
    """
    windows = []
    for start in window_starts(record.n_frames, length, stride):
        stop = min(start + length, record.n_frames)
        valid = stop - start
        mask = np.zeros(length, dtype=bool)
        mask[:valid] = True
        labels = None
        if record.labels is not None:
            labels = _pad(record.labels[start:stop], length)
        windows.append(SequenceWindow(record.video_id, start,
                                      _pad(record.features[start:stop], length),
                                      labels, mask))
    return windows


def batch_windows(windows: Sequence[SequenceWindow]) -> SequenceBatch:
    """Stack equal-length windows into one batch."""
    if not windows:
        raise ContractError("Cannot batch an empty window list")
    lengths = {w.length for w in windows}
    if len(lengths) != 1:
        raise ShapeError("Windows in a batch must share one length",
                         shapes=[(w.length,) for w in windows])
    has_labels = {w.labels is not None for w in windows}
    if len(has_labels) != 1:
        raise ContractError("Either every window in a batch has labels or none does")
    labels = np.stack([w.labels for w in windows]) if True in has_labels else None
    return SequenceBatch(
        features=np.stack([w.features for w in windows]).astype(np.float64),
        labels=None if labels is None else labels.astype(np.float64),
        mask=np.stack([w.mask for w in windows]),
        video_ids=[w.video_id for w in windows],
        starts=[w.start for w in windows],
    )


def stitch_windows(starts: Sequence[int], predictions: Sequence[np.ndarray],
                   n_frames: int, valid: Optional[Sequence[int]] = None) -> np.ndarray:
    """
    Per-frame stream from overlapping window predictions.

    Each frame takes its value from the covering window whose centre is
    nearest; ties go to the earlier window.

    Args:
        starts: Window start frames
        predictions: Per-window [length, C] arrays
        n_frames: Frame count of the video
        valid: Valid frames per window; defaults to the frames inside the video

    Returns:
        Array of shape [n_frames, C]
    """
    if len(starts) != len(predictions) or not predictions:
        raise ContractError("Need one prediction block per window start")
    width = predictions[0].shape[1]
    out = np.zeros((n_frames, width), dtype=np.asarray(predictions[0]).dtype)
    best = np.full(n_frames, np.inf)
    frames = np.arange(n_frames)
    for i, (start, block) in enumerate(zip(starts, predictions)):
        length = block.shape[0]
        count = min(length, n_frames - start) if valid is None else valid[i]
        covered = frames[start:start + count]
        distance = np.abs(covered - (start + (length - 1) / 2.0))
        closer = distance < best[covered]
        out[covered[closer]] = block[:count][closer]
        best[covered[closer]] = distance[closer]
    if np.isinf(best).any():
        raise ContractError("Windows do not cover every frame",
                            {'first_uncovered': int(np.flatnonzero(np.isinf(best))[0])})
    return out
