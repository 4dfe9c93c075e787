"""
Base Trainer

Abstract base class for the three training loops. A trainer owns one model,
its optimizer and the run's random generator; ``fit`` runs epochs of
shuffled windows, evaluates after every epoch, keeps the best checkpoint and
writes a JSON-lines metric log.
"""

import math
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import structlog

from ..autodiff import Tensor, backward, reset_op_index
from ..config import TrainConfig
from ..data.afb1 import VideoRecord
from ..data.windows import SequenceBatch, batch_windows, window_sequences
from ..errors import CheckpointError, ConfigurationError, NonFiniteError
from ..loggingx import log_epoch, log_run_completion, log_run_start
from ..models import build_model
from ..storage import MetricLog
from .checkpoint import CheckpointState, ModelSpec, load_checkpoint, save_checkpoint
from .evaluate import EvaluationReport, au_report, predict_video, va_report
from .optim import build_optimizer, clip_grad_norm
from .schedule import LRSchedule

BEST_CHECKPOINT = "best.afck"
LAST_CHECKPOINT = "last.afck"
METRIC_LOG = "metrics.jsonl"


@dataclass
class TrainingResult:
    """Outcome of ``Trainer.fit``."""

    task: str
    epochs: int
    best_score: Optional[float]
    best_epoch: int
    history: List[Dict[str, Any]] = field(default_factory=list)
    duration: float = 0.0


class Trainer(ABC):
    """Abstract base class for training loops."""

    # Trainer metadata
    task: str = "base"
    description: str = "Base trainer class"
    label_kind: str = "va"

    def __init__(self, config: TrainConfig, input_dim: int,
                 run_dir: Optional[Union[str, Path]] = None):
        """
        Initialize model, optimizer and generator from the configuration.

        Args:
            config: Resolved training configuration for this trainer's task
            input_dim: Per-frame input width
            run_dir: Directory for checkpoints and the metric log; nothing is
                written when omitted

        Raises:
            ConfigurationError: If the config was resolved for another task
        """
        if config.task != self.task:
            raise ConfigurationError(f"Config is for task {config.task!r}, trainer runs "
                                     f"{self.task!r}", key="task", expected=self.task)
        self.config = config
        self.input_dim = input_dim
        self.logger = structlog.get_logger(f"{__name__}.{self.__class__.__name__}")
        self._check_input_dim(input_dim)

        self.rng = np.random.default_rng(config.seed)
        self.model = build_model(self.task, input_dim, config, rng=self.rng)
        self.optimizer = build_optimizer(config.optimizer, self.model.named_parameters(),
                                         config.momentum)
        self.run_dir = Path(run_dir) if run_dir is not None else None
        self.metric_log = MetricLog(self.run_dir / METRIC_LOG) if self.run_dir else None

        self.epoch = 0
        self.best_score: Optional[float] = None
        self.best_epoch = -1
        self.loss_trace: List[float] = []

    def _check_input_dim(self, input_dim: int) -> None:
        """Hook for trainers with a constrained input width."""
        if input_dim < 1:
            raise ConfigurationError("Input width must be positive", key="input_dim")

    @abstractmethod
    def batch_loss(self, batch: SequenceBatch) -> Tensor:
        """
        Differentiable scalar loss of one batch.

        Args:
            batch: Windows with labels and frame masks

        Returns:
            0-d Tensor
        """
        pass

    @abstractmethod
    def predict_batch(self, features: np.ndarray) -> np.ndarray:
        """Map [B, T, d] features to [B, T, C] outputs without recording gradients."""
        pass

    def predict(self, record: VideoRecord) -> np.ndarray:
        """Per-frame outputs for a whole video."""
        return predict_video(self.predict_batch, record.features, self.config.infer_max_len)

    def evaluate_records(self, records: Sequence[VideoRecord]) -> EvaluationReport:
        """Metric report of the current model on labelled records."""
        self._check_records(records, "evaluation")
        outputs = {r.video_id: self.predict(r) for r in records}
        labels = {r.video_id: r.labels for r in records}
        if self.label_kind == "au":
            return au_report(outputs, labels, self.config.threshold, self.config.f1_average)
        return va_report(outputs, labels)

    def _check_records(self, records: Sequence[VideoRecord], split: str) -> None:
        if not records:
            raise ConfigurationError(f"No videos in the {split} split", key="split",
                                     task=self.task)
        for record in records:
            if record.label_kind != self.label_kind:
                raise ConfigurationError(
                    f"Video {record.video_id} has {record.label_kind} labels, "
                    f"{self.task} needs {self.label_kind}", key="labels", task=self.task)
            if record.feat_dim != self.input_dim:
                raise ConfigurationError(
                    f"Video {record.video_id} has {record.feat_dim} features per frame, "
                    f"model expects {self.input_dim}", key="input_dim", task=self.task)

    def fit(self, train_records: Sequence[VideoRecord],
            val_records: Optional[Sequence[VideoRecord]] = None,
            until_epoch: Optional[int] = None) -> TrainingResult:
        """
        Train from the current epoch to ``config.epochs`` (or ``until_epoch``).

        Args:
            train_records: Labelled training videos
            val_records: Labelled validation videos; the training videos are
                scored when omitted
            until_epoch: Stop after this many total epochs

        Returns:
            TrainingResult with per-epoch metrics

        Raises:
            ConfigurationError: Empty split or wrongly labelled videos
            NonFiniteError: If a batch loss is not finite
        """
        config = self.config
        self._check_records(train_records, "train")
        eval_records = list(val_records) if val_records else list(train_records)
        eval_split = "val" if val_records else "train"
        if val_records:
            self._check_records(val_records, "val")

        windows = [w for record in train_records
                   for w in window_sequences(record, config.window, config.effective_stride)]
        steps = math.ceil(len(windows) / config.batch_size)
        schedule = LRSchedule.from_config(config, steps)
        stop = config.epochs if until_epoch is None else min(until_epoch, config.epochs)

        start_time = time.time()
        log_run_start(self.task, config.as_dict(), logger=self.logger,
                      videos=len(train_records), windows=len(windows), start_epoch=self.epoch)
        if self.metric_log:
            self.metric_log.log_run_start(self.task, config.as_dict(), start_epoch=self.epoch)

        history = []
        for epoch in range(self.epoch, stop):
            order = self.rng.permutation(len(windows))
            losses, lr, grad_norm = [], config.lr, 0.0
            for step, begin in enumerate(range(0, len(order), config.batch_size)):
                batch = batch_windows([windows[i] for i in order[begin:begin + config.batch_size]])
                lr = schedule.lr_at(epoch, step)
                self.model.zero_grad()
                reset_op_index()
                loss = self.batch_loss(batch)
                value = loss.item()
                if not np.isfinite(value):
                    raise NonFiniteError("Training loss is not finite", op="loss",
                                         epoch=epoch, step=step)
                backward(loss)
                grad_norm = clip_grad_norm(self.model.parameters(), config.clip_norm)
                self.optimizer.step(lr)
                self.loss_trace.append(value)
                losses.append(value)
            self.epoch = epoch + 1

            report = self.evaluate_records(eval_records)
            metrics = {"loss": float(np.mean(losses)), "lr": lr, "grad_norm": grad_norm,
                       **report.pooled, "score": report.score, "split": eval_split}
            if self.best_score is None or report.score > self.best_score:
                self.best_score, self.best_epoch = report.score, epoch
                self.save(BEST_CHECKPOINT)
            self.save(LAST_CHECKPOINT)

            history.append({"epoch": epoch, **metrics})
            log_epoch(self.task, epoch, metrics, logger=self.logger)
            if self.metric_log:
                self.metric_log.log_epoch(self.task, epoch, metrics)

        duration = time.time() - start_time
        log_run_completion(self.task, duration, self.epoch, self.best_score, logger=self.logger)
        if self.metric_log:
            self.metric_log.log_run_complete(self.task, duration, self.best_score,
                                             self.best_epoch)
        return TrainingResult(self.task, self.epoch, self.best_score, self.best_epoch,
                              history, duration)

    def state(self) -> CheckpointState:
        """Snapshot of everything a resumed run needs."""
        return CheckpointState(
            config=self.config,
            spec=ModelSpec(self.task, self.input_dim),
            epoch=self.epoch,
            rng_state=self.rng.bit_generator.state,
            best_score=self.best_score,
            best_epoch=self.best_epoch,
            params=self.model.state_dict(),
            optimizer=self.optimizer.state_arrays(),
        )

    def save(self, name: str) -> Optional[Path]:
        if self.run_dir is None:
            return None
        return save_checkpoint(self.run_dir / name, self.state())

    def restore(self, state: CheckpointState) -> "Trainer":
        """Load parameters, optimizer buffers, generator and progress counters."""
        if state.spec.task != self.task or state.spec.input_dim != self.input_dim:
            raise CheckpointError(
                f"Checkpoint holds a {state.spec.task} model over {state.spec.input_dim} "
                f"inputs, trainer is {self.task} over {self.input_dim}")
        self.model.load_state_dict(state.params)
        self.optimizer.load_state_arrays(state.optimizer)
        self.rng.bit_generator.state = state.rng_state
        self.epoch = state.epoch
        self.best_score = state.best_score
        self.best_epoch = state.best_epoch
        return self

    @classmethod
    def from_checkpoint(cls, path: Union[str, Path],
                        run_dir: Optional[Union[str, Path]] = None) -> "Trainer":
        """
        Rebuild a trainer from a checkpoint, ready to predict or continue.

        Raises:
            CheckpointError: Missing or corrupt file, or another task's model
        """
        state = load_checkpoint(path)
        if state.spec.task != cls.task:
            raise CheckpointError(f"Checkpoint is for task {state.spec.task!r}, "
                                  f"expected {cls.task!r}", path=str(path))
        trainer = cls(state.config, state.spec.input_dim, run_dir=run_dir)
        return trainer.restore(state)
