"""
Training Package

Optimizers, learning rate schedules, checkpoints, the trainer base class and
the stage-1, stage-2 and AU training loops.
"""

from .au import AuTrainer
from .checkpoint import (
    CheckpointState,
    ModelSpec,
    decode_checkpoint,
    encode_checkpoint,
    load_checkpoint,
    save_checkpoint,
)
from .evaluate import EvaluationReport, au_report, predict_video, va_report
from .optim import SGD, Adam, Optimizer, adam_step, build_optimizer, clip_grad_norm, sgd_step
from .schedule import LRSchedule, cosine_annealing_lr, cosine_warm_restart_lr, restart_position
from .stage1 import Stage1Trainer
from .stage2 import Stage2Trainer, score_records
from .trainer import BEST_CHECKPOINT, LAST_CHECKPOINT, METRIC_LOG, Trainer, TrainingResult

__all__ = [
    "AuTrainer", "CheckpointState", "ModelSpec", "decode_checkpoint", "encode_checkpoint",
    "load_checkpoint", "save_checkpoint", "EvaluationReport", "au_report", "predict_video",
    "va_report", "SGD", "Adam", "Optimizer", "adam_step", "build_optimizer",
    "clip_grad_norm", "sgd_step", "LRSchedule", "cosine_annealing_lr",
    "cosine_warm_restart_lr", "restart_position", "Stage1Trainer", "Stage2Trainer",
    "score_records", "BEST_CHECKPOINT", "LAST_CHECKPOINT", "METRIC_LOG", "Trainer",
    "TrainingResult",
]
