"""
Action Unit Detector

Two Transformer branches over the same feature stream. T1 works at the source
dimension; T2 expands the features, encodes them at the higher dimension and
compresses back. Three 12-way heads (T1, T2 and the fused representation)
produce logits whose mean is the final per-frame AU prediction.
"""

from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence

import numpy as np

from ..autodiff import Tensor, as_tensor, concat_last_axis, no_grad, scale, sigmoid
from ..errors import ConfigurationError, ContractError, ShapeError
from ..layers import Linear, Module, TransformerEncoder

N_AUS = 12
HEADS = ("t1", "t2", "fused")


@dataclass
class AuOutput:
    """Final logits/probabilities [B, T, 12] plus the per-head ones."""

    logits: Tensor
    probs: Tensor
    head_logits: Dict[str, Tensor] = field(default_factory=dict)
    head_probs: Dict[str, Tensor] = field(default_factory=dict)


class AuModel(Module):
    """Dual-Transformer AU model with tri-source logit fusion."""

    def __init__(self, d: int, rng: Optional[np.random.Generator] = None, blocks: int = 2,
                 heads: int = 4, expand_factor: int = 2, ff_mult: int = 4,
                 positional: bool = True, head_init: str = "zeros"):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        d_e = expand_factor * d
        if d_e <= d:
            raise ConfigurationError(f"Expanded dimension {d_e} must exceed source dimension {d}",
                                     key="expand_factor")
        self.d = d
        self.d_e = d_e
        self.t1 = self.add_child("t1", TransformerEncoder(d, blocks, heads, ff_mult, rng,
                                                          positional=positional))
        self.expand = self.add_child("expand", Linear(d, d_e, rng=rng))
        self.t2 = self.add_child("t2", TransformerEncoder(d_e, blocks, heads, ff_mult, rng,
                                                          positional=positional))
        self.compress = self.add_child("compress", Linear(d_e, d, rng=rng))
        self.fc1 = self.add_child("fc1", Linear(d, N_AUS, rng=rng, init=head_init))
        self.fc2 = self.add_child("fc2", Linear(d, N_AUS, rng=rng, init=head_init))
        self.fc_f = self.add_child("fc_f", Linear(2 * d, N_AUS, rng=rng, init=head_init))

    def forward(self, x: Tensor, heads: Sequence[str] = HEADS) -> AuOutput:
        """
        Run the selected heads and fuse their logits.

        ``heads=("t1",)`` skips T2 and the fusion head entirely.
        """
        unknown = [h for h in heads if h not in HEADS]
        if unknown or not heads:
            raise ContractError("Unknown AU head selection",
                                {'heads': tuple(heads), 'valid': ", ".join(HEADS)})
        x = as_tensor(x)
        if x.ndim != 3 or x.shape[-1] != self.d:
            raise ShapeError(f"AU model expects [B, T, {self.d}]", shapes=[x.shape])

        t1_out = self.t1(x)
        t2_out = None
        if "t2" in heads or "fused" in heads:
            t2_out = self.compress(self.t2(self.expand(x)))

        logits: Dict[str, Tensor] = {}
        for name in heads:
            if name == "t1":
                logits[name] = self.fc1(t1_out)
            elif name == "t2":
                logits[name] = self.fc2(t2_out)
            else:
                logits[name] = self.fc_f(concat_last_axis([t1_out, t2_out]))

        selected = list(logits.values())
        final = selected[0]
        if len(selected) > 1:
            for extra in selected[1:]:
                final = final + extra
            final = scale(final, 1.0 / len(selected))
        return AuOutput(
            logits=final,
            probs=sigmoid(final),
            head_logits=logits,
            head_probs={name: sigmoid(value) for name, value in logits.items()},
        )


def au_forward(model: AuModel, x: Tensor) -> AuOutput:
    """Full dual-branch forward pass."""
    return model(x)


def au_predict(probs, threshold: float = 0.5) -> np.ndarray:
    """AU bits: 1 where prob >= threshold."""
    probs = probs.data if isinstance(probs, Tensor) else np.asarray(probs, dtype=np.float64)
    return (probs >= threshold).astype(np.uint8)


def au_ablate_t1(model: AuModel, x: Tensor) -> Tensor:
    """Probabilities from the T1 head alone, with T2 and fusion disabled."""
    return model(x, heads=("t1",)).probs


def au_predict_numpy(model: AuModel, features: np.ndarray,
                     heads: Sequence[str] = HEADS) -> np.ndarray:
    with no_grad():
        return model(Tensor(features), heads=heads).probs.data
