"""
Evaluation

Full-video inference and metric reports. VA reports hold per-video CCC and
the pooled CCC over all frames of all videos concatenated; AU reports hold
per-video and pooled F1 plus per-AU F1.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, Mapping

import numpy as np
import pandas as pd
import structlog

from ..data.windows import stitch_windows, window_starts
from ..errors import ContractError
from ..metrics import AU_NAMES, ccc_va, f1_macro, f1_per_class
from ..models.au import au_predict

logger = structlog.get_logger(__name__)

BatchPredictor = Callable[[np.ndarray], np.ndarray]


def predict_video(predict: BatchPredictor, features: np.ndarray, max_len: int) -> np.ndarray:
    """
    Per-frame predictions for a whole video.

    One pass when the video has at most ``max_len`` frames; otherwise windows
    of ``max_len`` frames at half-window stride, stitched at window centres.

    Args:
        predict: Maps a [B, T, d] float64 batch to [B, T, C]
        features: [N, d] video features
        max_len: Longest sequence run in one pass

    Returns:
        Array of shape [N, C]
    """
    features = np.asarray(features, dtype=np.float64)
    n_frames = features.shape[0]
    if n_frames <= max_len:
        return predict(features[None])[0]

    stride = max(1, max_len // 2)
    starts = window_starts(n_frames, max_len, stride)
    blocks, valid = [], []
    for start in starts:
        block = features[start:start + max_len]
        valid.append(block.shape[0])
        if block.shape[0] < max_len:
            block = np.concatenate([block, np.repeat(block[-1:], max_len - block.shape[0], 0)])
        blocks.append(predict(block[None])[0])
    return stitch_windows(starts, blocks, n_frames, valid)


@dataclass
class EvaluationReport:
    """Pooled metrics, one row per video and (AU only) per-AU F1."""

    kind: str
    pooled: Dict[str, float]
    per_video: pd.DataFrame
    per_class: Dict[str, float] = field(default_factory=dict)

    @property
    def score(self) -> float:
        """Selection score: pooled combined CCC (VA) or pooled F1 (AU)."""
        return self.pooled["combined"] if self.kind == "va" else self.pooled["f1"]

    def as_dict(self) -> Dict[str, object]:
        return {
            "kind": self.kind,
            "pooled": self.pooled,
            "per_video": self.per_video.to_dict(orient="records"),
            "per_class": self.per_class,
        }


def _common_ids(predictions: Mapping[str, np.ndarray], labels: Mapping[str, np.ndarray]):
    missing = [vid for vid in labels if vid not in predictions]
    if missing:
        raise ContractError("No predictions for some labelled videos",
                            {'missing': ", ".join(missing[:5]), 'count': len(missing)})
    if not labels:
        raise ContractError("Nothing to evaluate: no labelled videos")
    for vid, label in labels.items():
        if np.asarray(predictions[vid]).shape != np.asarray(label).shape:
            raise ContractError("Prediction and label shapes differ", {'video_id': vid})
    return list(labels)


def va_report(predictions: Mapping[str, np.ndarray],
              labels: Mapping[str, np.ndarray]) -> EvaluationReport:
    """Per-video and pooled valence/arousal CCC."""
    ids = _common_ids(predictions, labels)
    rows = []
    for vid in ids:
        pred, label = np.asarray(predictions[vid]), np.asarray(labels[vid])
        if pred.shape[0] < 2:
            rows.append({"video_id": vid, "frames": pred.shape[0], "valence": np.nan,
                         "arousal": np.nan, "combined": np.nan})
            continue
        result = ccc_va(pred, label)
        rows.append({"video_id": vid, "frames": pred.shape[0], **result.as_dict()})
    pooled = ccc_va(np.concatenate([predictions[v] for v in ids]),
                    np.concatenate([labels[v] for v in ids]))
    return EvaluationReport("va", pooled.as_dict(), pd.DataFrame(rows))


def au_report(probabilities: Mapping[str, np.ndarray], labels: Mapping[str, np.ndarray],
              threshold: float = 0.5, average: str = "macro") -> EvaluationReport:
    """Per-video and pooled F1 of thresholded AU probabilities."""
    ids = _common_ids(probabilities, labels)
    rows = []
    for vid in ids:
        bits = au_predict(probabilities[vid], threshold)
        rows.append({"video_id": vid, "frames": bits.shape[0],
                     "f1": f1_macro(bits, labels[vid], average)})
    bits = np.concatenate([au_predict(probabilities[v], threshold) for v in ids])
    targets = np.concatenate([labels[v] for v in ids])
    per_class = dict(zip(AU_NAMES, (float(v) for v in f1_per_class(bits, targets))))
    return EvaluationReport("au", {"f1": f1_macro(bits, targets, average)},
                            pd.DataFrame(rows), per_class)
