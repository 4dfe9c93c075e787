"""
Metrics and Losses

Concordance correlation (metric and differentiable loss), the combined VA
score, the stage-1 three-head loss, focal loss and F1 for AU detection.
"""

from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
import structlog

from .autodiff import Tensor, as_tensor, clip, log, power, scale
from .errors import ContractError, ShapeError

logger = structlog.get_logger(__name__)

CCC_DENOMINATOR_GUARD = 1e-8
FOCAL_CLAMP = 1e-7
AU_NAMES = ("AU1", "AU2", "AU4", "AU6", "AU7", "AU10",
            "AU12", "AU15", "AU23", "AU24", "AU25", "AU26")

FloatSequence = Union[Sequence[float], np.ndarray]


@dataclass(frozen=True)
class MomentSummary:
    """Population moments of a (label, prediction) pair."""

    mean_label: float
    mean_pred: float
    std_label: float
    std_pred: float
    pearson: float
    covariance: float


@dataclass(frozen=True)
class CccResult:
    """Per-dimension CCC and their mean."""

    ccc_v: float
    ccc_a: float
    combined: float

    @classmethod
    def of(cls, ccc_v: float, ccc_a: float) -> "CccResult":
        return cls(ccc_v, ccc_a, va_combined(ccc_v, ccc_a))

    def as_dict(self) -> Dict[str, float]:
        return {"valence": self.ccc_v, "arousal": self.ccc_a, "combined": self.combined}


def _pair(pred: FloatSequence, label: FloatSequence) -> Tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=np.float64).reshape(-1)
    label = np.asarray(label, dtype=np.float64).reshape(-1)
    if pred.shape != label.shape:
        raise ContractError("Prediction and label lengths differ",
                            {'pred': pred.size, 'label': label.size})
    if pred.size < 2:
        raise ContractError("CCC needs at least two frames", {'length': pred.size})
    return pred, label


def moments(pred: FloatSequence, label: FloatSequence) -> MomentSummary:
    """Means, standard deviations, covariance and Pearson correlation (divisor N)."""
    pred, label = _pair(pred, label)
    mean_pred, mean_label = pred.mean(), label.mean()
    covariance = float(np.mean((pred - mean_pred) * (label - mean_label)))
    std_pred, std_label = float(pred.std()), float(label.std())
    varies = np.ptp(pred) > 0 and np.ptp(label) > 0
    pearson = covariance / (std_pred * std_label) if varies else 0.0
    return MomentSummary(float(mean_label), float(mean_pred), std_label, std_pred,
                         pearson, covariance)


def ccc(pred: FloatSequence, label: FloatSequence) -> float:
    """
    Concordance correlation coefficient.

    2 cov / (var_pred + var_label + (mean_pred - mean_label)^2), population
    moments; 0 when the denominator vanishes.

    Both streams constant counts as a vanishing denominator even when
    rounding in the means leaves a residue of order 1e-33.
    """
    pred, label = _pair(pred, label)
    if np.ptp(pred) == 0.0 and np.ptp(label) == 0.0:
        return 0.0
    mean_pred, mean_label = pred.mean(), label.mean()
    pred_c, label_c = pred - mean_pred, label - mean_label
    covariance = np.mean(pred_c * label_c)
    denominator = np.mean(pred_c * pred_c) + np.mean(label_c * label_c) \
        + (mean_pred - mean_label) ** 2
    if denominator == 0.0:
        return 0.0
    return float(2.0 * covariance / denominator)


def va_combined(ccc_v: float, ccc_a: float) -> float:
    """Mean of the valence and arousal scores."""
    return (ccc_v + ccc_a) / 2.0


def ccc_va(pred: np.ndarray, label: np.ndarray) -> CccResult:
    """CCC for [N, 2] (valence, arousal) predictions against labels."""
    pred = np.asarray(pred)
    label = np.asarray(label)
    return CccResult.of(ccc(pred[:, 0], label[:, 0]), ccc(pred[:, 1], label[:, 1]))


def _ccc_tensor(pred: Tensor, label: np.ndarray) -> Tensor:
    label = np.asarray(label, dtype=np.float64).reshape(-1)
    if pred.ndim != 1 or pred.shape[0] != label.shape[0]:
        raise ShapeError("CCC loss needs matching 1-D prediction and label",
                         shapes=[pred.shape, label.shape])
    mean_label = label.mean()
    label_c = Tensor(label - mean_label)
    mean_pred = pred.mean()
    pred_c = pred - mean_pred
    covariance = (pred_c * label_c).mean()
    shift = mean_pred - mean_label
    denominator = (pred_c * pred_c).mean() + float(np.mean(label_c.data ** 2)) + shift * shift
    if denominator.item() < CCC_DENOMINATOR_GUARD:
        logger.warning("CCC denominator guard applied",
                       denominator=denominator.item(), guard=CCC_DENOMINATOR_GUARD)
        denominator = denominator + CCC_DENOMINATOR_GUARD
    return scale(covariance, 2.0) / denominator


def ccc_loss(pred_v: Tensor, pred_a: Tensor, label_v: FloatSequence,
             label_a: FloatSequence) -> Tensor:
    """1 - (ccc_v + ccc_a) / 2, differentiable in the predictions."""
    combined = scale(_ccc_tensor(as_tensor(pred_v), label_v)
                     + _ccc_tensor(as_tensor(pred_a), label_a), 0.5)
    return 1.0 - combined


def va_loss(pred: Tensor, label: np.ndarray, mask: Optional[np.ndarray] = None) -> Tensor:
    """ccc_loss of [..., 2] predictions over the frames selected by ``mask``."""
    label = np.asarray(label, dtype=np.float64)
    if mask is not None:
        pred, label = pred[mask], label[mask]
    pred = pred.reshape(-1, 2)
    label = label.reshape(-1, 2)
    return ccc_loss(pred[:, 0], pred[:, 1], label[:, 0], label[:, 1])


def stage1_combined_loss(fused: Tensor, gru_head: Tensor, trf_head: Tensor,
                         labels: np.ndarray, weights: Sequence[float] = (1.0, 1.0, 1.0),
                         mask: Optional[np.ndarray] = None) -> Tensor:
    """Weighted sum of the CCC losses of the fused, GRU and Transformer heads."""
    if len(weights) != 3:
        raise ContractError("Stage-1 loss needs three weights", {'weights': tuple(weights)})
    total: Optional[Tensor] = None
    for weight, head in zip(weights, (fused, gru_head, trf_head)):
        term = scale(va_loss(head, labels, mask), float(weight))
        total = term if total is None else total + term
    return total


def _check_bits(bits: np.ndarray, name: str) -> np.ndarray:
    bits = np.asarray(bits)
    if not np.all((bits == 0) | (bits == 1)):
        raise ContractError(f"{name} must contain only 0 and 1")
    return bits.astype(np.float64)


def focal_loss(prob: Tensor, target: np.ndarray, gamma: float = 2.0,
               alpha: float = 0.25) -> Tensor:
    """
    Mean of -alpha (1 - p_t)^gamma log(p_t) over every frame and AU channel.

    With gamma=0 and alpha=1 this is binary cross-entropy.
    """
    prob = as_tensor(prob)
    target = _check_bits(target, "Focal loss targets")
    if target.shape != prob.shape:
        raise ShapeError("Focal loss targets must match probabilities",
                         shapes=[prob.shape, target.shape])
    p = clip(prob, FOCAL_CLAMP, 1.0 - FOCAL_CLAMP)
    p_t = p * Tensor(2.0 * target - 1.0) + Tensor(1.0 - target)
    per_element = power(1.0 - p_t, gamma) * log(p_t)
    return scale(per_element.mean(), -alpha)


def f1_per_class(pred_bits: np.ndarray, target_bits: np.ndarray) -> np.ndarray:
    """2TP / (2TP + FP + FN) per column; 0 where the denominator is 0."""
    pred = _check_bits(pred_bits, "Predictions")
    target = _check_bits(target_bits, "Targets")
    if pred.shape != target.shape:
        raise ShapeError("F1 inputs differ in shape", shapes=[pred.shape, target.shape])
    pred = pred.reshape(-1, pred.shape[-1])
    target = target.reshape(-1, target.shape[-1])
    tp = (pred * target).sum(axis=0)
    fp = (pred * (1 - target)).sum(axis=0)
    fn = ((1 - pred) * target).sum(axis=0)
    denominator = 2 * tp + fp + fn
    return np.divide(2 * tp, denominator, out=np.zeros_like(tp), where=denominator > 0)


def f1_macro(pred_bits: np.ndarray, target_bits: np.ndarray, average: str = "macro") -> float:
    """
    F1 over the AU channels.

    ``average="macro"`` is the mean of per-AU F1; ``"micro"`` pools counts.
    """
    if average == "macro":
        return float(f1_per_class(pred_bits, target_bits).mean())
    if average == "micro":
        pred = _check_bits(pred_bits, "Predictions")
        target = _check_bits(target_bits, "Targets")
        tp = float((pred * target).sum())
        denominator = 2 * tp + float((pred * (1 - target)).sum()) \
            + float(((1 - pred) * target).sum())
        return 2 * tp / denominator if denominator > 0 else 0.0
    raise ContractError(f"Unknown F1 averaging: {average}", {'valid': "macro, micro"})
