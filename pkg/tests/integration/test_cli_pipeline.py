"""End-to-end run of the command-line pipeline on a tiny synthetic dataset."""

import logging

import pytest
import structlog

from affectkit.cli import run
from affectkit.data import read_manifest
from affectkit.data.scores import read_fold_scores

pytestmark = pytest.mark.slow

STAGE1 = ["--epochs", "1", "--window", "12", "--batch-size", "4",
          "--set", "k_folds=3", "--set", "hidden_dim=4", "--set", "heads=2",
          "--set", "gru_layers=1", "--set", "ff_mult=1"]
STAGE2 = ["--epochs", "1", "--window", "12", "--batch-size", "4",
          "--set", "k_folds=3", "--set", "hidden_dim=4", "--set", "gru_layers=1",
          "--set", "local_layers=1", "--set", "local_window=2"]


@pytest.fixture(autouse=True)
def reset_logging():
    yield
    logging.getLogger().handlers.clear()
    structlog.reset_defaults()


def test_pipeline(tmp_path, capsys):
    data = tmp_path / "data"
    manifest = str(data / "manifest.tsv")
    runs, scores = str(tmp_path / "runs"), str(tmp_path / "scores")

    assert run(["synth", "--videos", "8", "--frames", "24", "--dim", "4", "--seed", "1",
                "--val-fraction", "0.25", "--out", str(data)]) == 0
    assert run(["split", manifest, "-k", "3", "--seed", "1"]) == 0
    assert read_manifest(manifest).folds() == [0, 1, 2]

    assert run(["train-stage1", manifest, "--runs", runs, *STAGE1]) == 0
    for fold in range(3):
        assert (tmp_path / "runs" / "stage1" / f"fold_{fold}" / "best.afck").exists()

    assert run(["infer-folds", manifest, "--runs", runs, "--scores", scores]) == 0
    video = read_manifest(manifest).ids()[0]
    assert read_fold_scores(tmp_path / "scores" / "vectors" / f"{video}.csv").vectors.shape == (24, 6)

    assert run(["train-stage2", manifest, "--scores", scores, "--runs", runs,
                "--name", "gru_attention", *STAGE2]) == 0
    checkpoint = str(tmp_path / "runs" / "gru_attention" / "best.afck")
    assert (tmp_path / "runs" / "gru_attention" / "predictions.csv").exists()

    capsys.readouterr()
    assert run(["evaluate", checkpoint, manifest, "--scores", scores, "--per-video"]) == 0
    assert "| val |" in capsys.readouterr().out

    report_path = tmp_path / "report.md"
    assert run(["report", manifest, "--scores", scores, "--gru-attention", checkpoint,
                "-o", str(report_path)]) == 0
    text = report_path.read_text()
    for row in ("| 1 |", "| 3 |", "| Average |", "| GRU + Transformer |",
                "| GRU + Attention |"):
        assert row in text

    assert run(["evaluate", checkpoint, manifest]) == 1
