"""
Affectkit

Two-stage valence-arousal estimation over per-frame video features (K-fold
GRU + Transformer models stacked by a GRU with local attention) and a
dual-Transformer action unit detector, on a small numpy autodiff engine.
"""

__version__ = "1.0.0"

from .config import TrainConfig, load_config
from .registry import TrainerRegistry

__all__ = ["TrainConfig", "TrainerRegistry", "load_config", "__version__"]
