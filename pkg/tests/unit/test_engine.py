"""Tests for pipeline stage preconditions and the Markdown report."""

import numpy as np
import pytest

from affectkit.data import load_records, read_manifest, read_scores, synth_generate, write_dataset
from affectkit.engine import (
    PipelineReport,
    ReportRow,
    build_report,
    evaluate_checkpoint,
    fold_run_dir,
    fold_score_file,
    infer_folds,
    load_fold_sequences,
    split_folds,
    train_au,
    train_stage1,
    train_stage2,
)
from affectkit.errors import ConfigurationError, MissingFoldError
from affectkit.reporting import MarkdownReporter, format_score
from affectkit.training import Stage1Trainer


@pytest.fixture
def manifest_path(dataset_dir):
    return dataset_dir / "manifest.tsv"


def test_split_folds_rewrites_manifest(manifest_path):
    updated = split_folds(manifest_path, k=3, seed=0)
    assert updated.folds() == [0, 1, 2]
    reread = read_manifest(manifest_path)
    assert reread.has_folds()
    assert all(e.fold is None for e in reread.by_split("val"))


def test_stage1_needs_folds(stage1_config, manifest_path, tmp_path):
    with pytest.raises(ConfigurationError):
        train_stage1(stage1_config, manifest_path, tmp_path / "runs")


def test_stage1_fold_count_must_match(stage1_config, manifest_path, tmp_path):
    split_folds(manifest_path, k=2)
    with pytest.raises(ConfigurationError) as info:
        train_stage1(stage1_config, manifest_path, tmp_path / "runs")
    assert info.value.key == "k_folds"


def test_unknown_fold_requested(stage1_config, manifest_path, tmp_path):
    split_folds(manifest_path, k=3)
    with pytest.raises(MissingFoldError) as info:
        train_stage1(stage1_config, manifest_path, tmp_path / "runs", folds=[1, 4])
    assert info.value.folds == [4]


def test_missing_stage1_models_are_listed(manifest_path, tmp_path):
    split_folds(manifest_path, k=3)
    with pytest.raises(MissingFoldError) as info:
        infer_folds(manifest_path, tmp_path / "runs", tmp_path / "scores")
    assert info.value.folds == [0, 1, 2]


def test_missing_fold_scores(stage2_config, manifest_path, tmp_path):
    manifest = split_folds(manifest_path, k=3)
    (tmp_path / "scores").mkdir()
    (tmp_path / "scores" / "fold_1.csv").write_text("video_id,frame,valence,arousal\n")
    with pytest.raises(MissingFoldError) as info:
        load_fold_sequences(manifest, tmp_path / "scores", 3)
    assert info.value.folds == [0, 2]
    with pytest.raises(MissingFoldError):
        train_stage2(stage2_config, manifest, tmp_path / "scores", tmp_path / "runs")
    with pytest.raises(MissingFoldError):
        build_report(manifest, tmp_path / "scores")


def test_one_fold_pipeline(stage1_config, manifest_path, tmp_path):
    split_folds(manifest_path, k=3)
    results = train_stage1(stage1_config, manifest_path, tmp_path / "runs", folds=[0, 1, 2],
                           max_workers=2)
    assert sorted(results) == [0, 1, 2]
    sequences = infer_folds(manifest_path, tmp_path / "runs", tmp_path / "scores")
    assert len(sequences) == 9
    assert all(s.k == 3 and s.n_frames == 30 for s in sequences.values())

    report = build_report(manifest_path, tmp_path / "scores")
    assert [row.label for row in report.folds] == ["1", "2", "3", "Average"]
    assert report.methods[0].label == "GRU + Transformer"
    assert report.methods[0].combined == max(row.combined for row in report.folds[:3])
    with pytest.raises(ConfigurationError):
        build_report(manifest_path, tmp_path / "scores", split="train")


def test_train_vectors_are_out_of_fold(stage1_config, manifest_path, tmp_path):
    manifest = split_folds(manifest_path, k=3)
    train_stage1(stage1_config, manifest, tmp_path / "runs")
    sequences = infer_folds(manifest, tmp_path / "runs", tmp_path / "scores")
    records = load_records(manifest)
    fold_of = {e.video_id: e.fold for e in manifest.by_split("train")}
    val_ids = manifest.ids("val")
    models = [Stage1Trainer.from_checkpoint(fold_run_dir(tmp_path / "runs", fold) / "best.afck")
              for fold in range(3)]

    for vid, fold in fold_of.items():
        own = models[fold].predict(records[vid])
        for slot in range(3):
            np.testing.assert_allclose(sequences[vid].fold_stream(slot), own, atol=1e-12)
    for vid in val_ids:
        for slot in range(3):
            np.testing.assert_allclose(sequences[vid].fold_stream(slot),
                                       models[slot].predict(records[vid]), atol=1e-12)

    for fold in range(3):
        scored = read_scores(fold_score_file(tmp_path / "scores", fold))
        held_out = {vid for vid, f in fold_of.items() if f == fold}
        assert set(scored) == held_out | set(val_ids)


def test_manifest_folds_must_fit_k(manifest_path, tmp_path):
    split_folds(manifest_path, k=3)
    with pytest.raises(ConfigurationError) as info:
        infer_folds(manifest_path, tmp_path / "runs", tmp_path / "scores", k=2)
    assert info.value.key == "k_folds"


def test_au_training_and_checkpoint_evaluation(au_config, tmp_path):
    records = synth_generate(n_videos=4, n_frames=24, feat_dim=8, seed=5, labels="au")
    write_dataset(records, tmp_path / "au", seed=5, val_fraction=0.25)
    manifest = tmp_path / "au" / "manifest.tsv"
    result = train_au(au_config, manifest, tmp_path / "runs")
    assert result.epochs == 2

    report = evaluate_checkpoint(tmp_path / "runs" / "au" / "best.afck", manifest, "val")
    assert report.kind == "au"
    assert 0.0 <= report.score <= 1.0
    assert len(report.per_video) == 1
    assert len(report.per_class) == 12


class TestMarkdownReport:
    def _report(self):
        return PipelineReport(
            split="val",
            folds=[ReportRow("1", 0.5, 0.25, 0.375), ReportRow("Average", 0.6, 0.3, 0.45)],
            methods=[ReportRow("GRU + Attention", 0.61, 0.4, 0.505)],
        )

    def test_tables(self):
        text = MarkdownReporter().render(self._report())
        assert "# Valence-Arousal Results (val split)" in text
        assert "| 1 | 0.500 | 0.250 | 0.375 |" in text
        assert "| GRU + Attention | 0.610 | 0.400 | 0.505 |" in text
        assert "Action Unit" not in text

    def test_au_section(self, tmp_path):
        report = self._report()
        report.au = [ReportRow("Dual Transformer", f1=0.544), ReportRow("T1 only", f1=0.5)]
        report.per_au = {"AU1": 0.25}
        path = MarkdownReporter().write(report, tmp_path / "out" / "report.md")
        text = path.read_text()
        assert "| Dual Transformer | 0.544 |" in text
        assert "| AU1 | 0.250 |" in text

    def test_missing_template(self, tmp_path):
        with pytest.raises(ConfigurationError):
            MarkdownReporter(tmp_path).render(self._report())

    def test_score_format(self):
        assert format_score(None) == "-"
        assert format_score(0.12345) == "0.123"
