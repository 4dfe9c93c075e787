"""
Score Files

Comma-separated text, one frame per line with six-decimal values:

    video_id,frame,valence,arousal          (VA predictions)
    video_id,frame,AU1,...,AU26             (AU probabilities)
    frame,V1,...,VK,A1,...,AK               (fold score vectors of one video)
"""

from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd
import structlog

from ..ensemble import FoldScoreSequence
from ..errors import DataFormatError
from ..metrics import AU_NAMES

logger = structlog.get_logger(__name__)

VA_COLUMNS = ("valence", "arousal")
FLOAT_FORMAT = "%.6f"


def _columns_for(width: int) -> List[str]:
    if width == 2:
        return list(VA_COLUMNS)
    if width == len(AU_NAMES):
        return list(AU_NAMES)
    return [f"c{i}" for i in range(width)]


def write_scores(path: Union[str, Path], scores: Mapping[str, np.ndarray],
                 columns: Optional[Sequence[str]] = None) -> Path:
    """
    Write per-frame scores of several videos, in mapping order.

    An empty mapping gives a header-only file.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if columns is None:
        first = next(iter(scores.values()), None)
        columns = _columns_for(2 if first is None else np.asarray(first).shape[1])
    columns = list(columns)

    frames = []
    for video_id, values in scores.items():
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2 or values.shape[1] != len(columns):
            raise DataFormatError(f"Scores for {video_id} do not have {len(columns)} columns",
                                  path=str(path), shape=values.shape)
        frame = pd.DataFrame(values, columns=columns)
        frame.insert(0, "frame", np.arange(values.shape[0]))
        frame.insert(0, "video_id", video_id)
        frames.append(frame)
    table = pd.concat(frames, ignore_index=True) if frames else \
        pd.DataFrame(columns=["video_id", "frame", *columns])
    table.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.debug("Wrote score file", path=str(path), videos=len(scores), rows=len(table))
    return path


def read_scores(path: Union[str, Path]) -> Dict[str, np.ndarray]:
    """Inverse of ``write_scores``: video id -> [frames, columns] array."""
    path = Path(path)
    table = pd.read_csv(path, dtype={"video_id": str}, keep_default_na=False, na_filter=False)
    if list(table.columns[:2]) != ["video_id", "frame"]:
        raise DataFormatError("Score file must start with video_id,frame columns",
                              path=str(path))
    value_columns = list(table.columns[2:])
    scores: Dict[str, np.ndarray] = {}
    for video_id, group in table.groupby("video_id", sort=False):
        frames = group["frame"].to_numpy()
        if not np.array_equal(frames, np.arange(len(frames))):
            raise DataFormatError(f"Frames of {video_id} are not 0..N-1 in order",
                                  path=str(path))
        scores[video_id] = group[value_columns].to_numpy(dtype=np.float64)
    return scores


def fold_columns(k: int) -> List[str]:
    return [f"V{i}" for i in range(1, k + 1)] + [f"A{i}" for i in range(1, k + 1)]


def write_fold_scores(path: Union[str, Path], scores: FoldScoreSequence) -> Path:
    """Write one video's fold score vectors with a V1..VK,A1..AK header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table = pd.DataFrame(scores.vectors, columns=fold_columns(scores.k))
    table.insert(0, "frame", np.arange(scores.n_frames))
    table.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def read_fold_scores(path: Union[str, Path], video_id: Optional[str] = None) -> FoldScoreSequence:
    """Read fold score vectors; the video id defaults to the file stem."""
    path = Path(path)
    table = pd.read_csv(path)
    width = table.shape[1] - 1
    if width < 2 or width % 2 or list(table.columns[1:]) != fold_columns(width // 2):
        raise DataFormatError("Fold score header must be frame,V1..VK,A1..AK", path=str(path))
    return FoldScoreSequence(video_id or path.stem,
                             table.iloc[:, 1:].to_numpy(dtype=np.float64))
