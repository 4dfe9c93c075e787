"""Tests for error context, exit codes and the metric log."""

from datetime import datetime

import pytest

from affectkit.errors import (
    AlignmentError,
    BadMagicError,
    CheckpointError,
    ConfigurationError,
    ContractError,
    MissingFoldError,
    NonFiniteError,
    exit_code_for,
    format_error_context,
)
from affectkit.storage import MetricLog, read_log_entries


def test_context_rendering():
    error = ConfigurationError("Invalid value for lr", key="lr", expected="> 0")
    assert str(error) == "Invalid value for lr (Context: key=lr, expected=> 0)"
    assert str(ContractError("plain")) == "plain"


def test_format_error_context():
    context = format_error_context(NonFiniteError("bad", op="log", op_index=3))
    assert context == {"error_type": "NonFiniteError", "message": "bad",
                       "context": {"op": "log", "op_index": 3}}
    assert format_error_context(ValueError("x"))["context"] == {}


@pytest.mark.parametrize("error,code", [
    (FileNotFoundError("missing"), 2),
    (BadMagicError("magic", path="a.afb1", offset=0), 2),
    (CheckpointError("corrupt"), 2),
    (MissingFoldError("folds", folds=[3, 1]), 2),
    (ConfigurationError("bad"), 1),
    (AlignmentError("frames", video_id="v", fold=2), 1),
    (ContractError("pre"), 1),
])
def test_exit_codes(error, code):
    assert exit_code_for(error) == code


def test_missing_folds_are_sorted():
    error = MissingFoldError("Stage-1 checkpoints are missing", folds=[3, 1])
    assert error.folds == [1, 3]
    assert "missing_folds=1, 3" in str(error)


class TestMetricLog:
    def test_events_in_order(self, tmp_path):
        log = MetricLog(tmp_path / "run" / "metrics.jsonl")
        log.log_run_start("stage1", {"epochs": 2})
        log.log_epoch("stage1", 0, {"loss": 0.5, "combined": 0.2})
        log.log_epoch("stage1", 1, {"loss": 0.4, "combined": 0.3})
        log.log_run_complete("stage1", 1.5, 0.3, 1)

        entries = read_log_entries(log.path)
        assert [e["event_type"] for e in entries] == ["run_start", "epoch", "epoch",
                                                      "run_complete"]
        epochs = read_log_entries(log.path, event_type="epoch", limit=1)
        assert epochs[0]["data"] == {"task": "stage1", "epoch": 0, "loss": 0.5,
                                     "combined": 0.2}

    def test_timestamp_and_malformed_lines(self, tmp_path):
        log = MetricLog(tmp_path / "metrics.jsonl")
        log.log_event("note", {"x": 1}, timestamp=datetime(2024, 1, 2, 3, 4, 5))
        with open(log.path, "a", encoding="utf-8") as f:
            f.write("{not json\n")
        entries = read_log_entries(log.path)
        assert len(entries) == 1
        assert entries[0]["timestamp"] == "2024-01-02T03:04:05"
