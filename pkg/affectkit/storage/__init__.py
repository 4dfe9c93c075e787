"""
Storage Package

Run artifacts that are not checkpoints.
"""

from .jsonl import MetricLog, read_log_entries

__all__ = ["MetricLog", "read_log_entries"]
