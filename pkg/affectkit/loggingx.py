"""
Structured Logging Setup

structlog on top of the standard library. Events go to stderr, so stdout
carries only command output (resolved configs, tables). With ``log_file``
every event is also appended to that file as one JSON object per line.
"""

import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import structlog

SHARED_PROCESSORS: List[Any] = [
    structlog.stdlib.add_logger_name,
    structlog.stdlib.add_log_level,
    structlog.stdlib.PositionalArgumentsFormatter(),
    structlog.processors.TimeStamper(fmt="iso"),
    structlog.processors.StackInfoRenderer(),
    structlog.processors.format_exc_info,
]


def _formatter(renderer: Any) -> structlog.stdlib.ProcessorFormatter:
    return structlog.stdlib.ProcessorFormatter(
        processors=[structlog.stdlib.ProcessorFormatter.remove_processors_meta, renderer],
        foreign_pre_chain=SHARED_PROCESSORS,
    )


def setup_logging(level: str = "INFO", verbose: bool = False,
                  log_file: Optional[str] = None) -> None:
    """
    Setup structured logging for the toolkit.

    Replaces any handlers already on the root logger, so calling it again
    (one CLI invocation after another in the same process) starts clean.

    Args:
        level: Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        verbose: Render stderr events for humans instead of as JSON
        log_file: Optional JSON-lines log file, created with its parent directory
    """
    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
        handler.close()
    root.setLevel(getattr(logging, level.upper()))

    console = logging.StreamHandler(sys.stderr)
    console.setFormatter(_formatter(structlog.dev.ConsoleRenderer(colors=True) if verbose
                                    else structlog.processors.JSONRenderer()))
    root.addHandler(console)

    if log_file:
        log_path = Path(log_file)
        log_path.parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(log_path, encoding="utf-8")
        file_handler.setFormatter(_formatter(structlog.processors.JSONRenderer()))
        root.addHandler(file_handler)

    structlog.configure(
        processors=[structlog.stdlib.filter_by_level, *SHARED_PROCESSORS,
                    structlog.stdlib.ProcessorFormatter.wrap_for_formatter],
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )


def get_logger(name: str) -> structlog.BoundLogger:
    """
    Get a structured logger instance.

    Args:
        name: Logger name (usually __name__)

    Returns:
        Configured structured logger
    """
    return structlog.get_logger(name)


def log_run_start(task: str, config: Dict[str, Any],
                  logger: Optional[structlog.BoundLogger] = None, **context) -> None:
    """
    Log the start of a training run.

    Args:
        task: Trainer task name (stage1, stage2, au)
        config: Resolved configuration as a flat dict
        logger: Optional logger instance
    """
    if logger is None:
        logger = get_logger(__name__)

    logger.info("Training run started", task=task, config=config, **context)


def log_epoch(task: str, epoch: int, metrics: Dict[str, float],
              logger: Optional[structlog.BoundLogger] = None) -> None:
    """
    Log the metrics of one finished epoch.

    Args:
        task: Trainer task name
        epoch: Zero-based epoch index
        metrics: Loss and validation metrics for the epoch
        logger: Optional logger instance
    """
    if logger is None:
        logger = get_logger(__name__)

    logger.info("Epoch completed", task=task, epoch=epoch, **metrics)


def log_run_completion(task: str, duration: float, epochs: int,
                       best_score: Optional[float],
                       logger: Optional[structlog.BoundLogger] = None) -> None:
    """
    Log training run completion.

    Args:
        task: Trainer task name
        duration: Wall-clock duration in seconds
        epochs: Number of epochs run
        best_score: Best validation score seen, if any
        logger: Optional logger instance
    """
    if logger is None:
        logger = get_logger(__name__)

    logger.info("Training run completed",
                task=task,
                duration=duration,
                epochs=epochs,
                best_score=best_score)
