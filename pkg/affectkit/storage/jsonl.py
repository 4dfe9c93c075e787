"""
JSONL Metric Log

Append-only JSON Lines log of a training run: one record per event with a
timestamp, an event type and a data payload.
"""

import json
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import structlog


class MetricLog:
    """Append-only JSONL log bound to one file."""

    def __init__(self, path: Union[str, Path]):
        """
        Initialize the log.

        Args:
            path: Log file; parent directories are created
        """
        self.logger = structlog.get_logger(__name__)
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)

    def log_event(self, event_type: str, data: Dict[str, Any],
                  timestamp: Optional[datetime] = None) -> None:
        """
        Append one event.

        Args:
            event_type: Type of event (e.g. 'run_start', 'epoch', 'run_complete')
            data: Event payload; must be JSON serializable
            timestamp: Event time (now when omitted)
        """
        if timestamp is None:
            timestamp = datetime.now()

        entry = {
            'timestamp': timestamp.isoformat(),
            'event_type': event_type,
            'data': data
        }
        with open(self.path, 'a', encoding='utf-8') as f:
            f.write(json.dumps(entry, sort_keys=True) + '\n')

    def log_run_start(self, task: str, config: Dict[str, Any], **context) -> None:
        self.log_event('run_start', {'task': task, 'config': config, **context})

    def log_epoch(self, task: str, epoch: int, metrics: Dict[str, float]) -> None:
        self.log_event('epoch', {'task': task, 'epoch': epoch, **metrics})

    def log_run_complete(self, task: str, duration: float, best_score: Optional[float],
                         best_epoch: int) -> None:
        self.log_event('run_complete', {'task': task, 'duration': duration,
                                        'best_score': best_score, 'best_epoch': best_epoch})


def read_log_entries(path: Union[str, Path], event_type: Optional[str] = None,
                     limit: Optional[int] = None) -> List[Dict[str, Any]]:
    """
    Read entries from a JSONL file.

    Args:
        path: Log file
        event_type: Keep only this event type
        limit: Maximum number of entries to return

    Returns:
        Entries in file order; malformed lines are skipped
    """
    entries = []
    with open(path, 'r', encoding='utf-8') as f:
        for line in f:
            if limit and len(entries) >= limit:
                break
            try:
                entry = json.loads(line.strip())
            except json.JSONDecodeError:
                continue
            if event_type is None or entry.get('event_type') == event_type:
                entries.append(entry)
    return entries
