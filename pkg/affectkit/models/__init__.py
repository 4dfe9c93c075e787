"""
Models Package

Stage-1 fusion model, stage-2 stacker and the AU detector, plus a builder
that constructs any of them from a task name and a config.
"""

from typing import TYPE_CHECKING, Optional

import numpy as np

from ..errors import ConfigurationError
from ..layers import Module
from .au import AuModel, AuOutput, au_ablate_t1, au_forward, au_predict
from .stage1 import FusionModel, Stage1Output
from .stage2 import StackerModel, stage2_forward

if TYPE_CHECKING:
    from ..config import TrainConfig


def build_model(task: str, input_dim: int, config: "TrainConfig",
                rng: Optional[np.random.Generator] = None) -> Module:
    """
    Construct the model a training task uses.

    Args:
        task: stage1, stage2 or au
        input_dim: Per-frame feature width (2K for stage2)
        config: Resolved training configuration
        rng: Generator used for weight initialisation

    Returns:
        Freshly initialised model
    """
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    if task == "stage1":
        return FusionModel(input_dim, hidden_dim=config.hidden_dim,
                           gru_layers=config.gru_layers,
                           transformer_blocks=config.transformer_blocks,
                           heads=config.heads, ff_mult=config.ff_mult, rng=rng,
                           positional=config.positional_encoding)
    if task == "stage2":
        return StackerModel(input_dim, hidden_dim=config.hidden_dim,
                            gru_layers=config.gru_layers, local_layers=config.local_layers,
                            local_window=config.local_window,
                            attention_dim=config.attention_dim or None, rng=rng)
    if task == "au":
        return AuModel(input_dim, rng=rng, blocks=config.transformer_blocks,
                       heads=config.heads, expand_factor=config.expand_factor,
                       ff_mult=config.ff_mult, positional=config.positional_encoding)
    raise ConfigurationError(f"Unknown task: {task}", key="task",
                             expected="stage1, stage2, au")


__all__ = [
    "AuModel", "AuOutput", "FusionModel", "Stage1Output", "StackerModel",
    "au_ablate_t1", "au_forward", "au_predict", "build_model", "stage2_forward",
]
