"""Fixed-seed synthetic training benchmarks."""

import numpy as np
import pytest

from affectkit.config import TrainConfig
from affectkit.data import synth_generate
from affectkit.ensemble import average_folds, build_fold_scores
from affectkit.metrics import ccc_va
from affectkit.training import AuTrainer, Stage1Trainer, Stage2Trainer, score_records

pytestmark = pytest.mark.slow


def train_until(trainer, train, val, target, max_epochs):
    """Run one epoch at a time until the best score reaches ``target``."""
    for epoch in range(1, max_epochs + 1):
        trainer.fit(train, val, until_epoch=epoch)
        if trainer.best_score is not None and trainer.best_score >= target:
            break
    return trainer.best_score


def test_stage1_overfits_training_videos():
    records = synth_generate(n_videos=40, n_frames=400, feat_dim=64, seed=0, labels="va")
    config = TrainConfig.for_task("stage1", epochs=200, lr=0.003, hidden_dim=32,
                                  gru_layers=1, heads=2, ff_mult=2, window=64,
                                  batch_size=16, seed=0)
    trainer = Stage1Trainer(config, 64)
    assert train_until(trainer, records, None, 0.90, 200) >= 0.90
    assert np.all(np.isfinite(trainer.loss_trace))


def test_stage1_loss_decreases_over_five_epochs():
    records = synth_generate(n_videos=4, n_frames=48, feat_dim=8, seed=1, labels="va")
    config = TrainConfig.for_task("stage1", epochs=5, lr=0.005, hidden_dim=8, gru_layers=1,
                                  heads=2, ff_mult=2, window=24, batch_size=2, seed=1)
    result = Stage1Trainer(config, 8).fit(records)
    assert result.history[-1]["loss"] < result.history[0]["loss"]


def test_au_detector_overfits_training_videos():
    records = synth_generate(n_videos=4, n_frames=128, feat_dim=8, seed=0, labels="au")
    config = TrainConfig.for_task("au", lr=0.1, transformer_blocks=1, heads=2, ff_mult=2,
                                  window=16, stride=8, batch_size=4, seed=0)
    assert (config.epochs, config.optimizer, config.schedule) == \
        (20, "sgd", "cosine-warm-restarts")
    assert config.momentum == 0.9
    trainer = AuTrainer(config, 8)
    assert train_until(trainer, records, None, 0.95, 20) >= 0.95


def test_stacker_matches_fold_averaging():
    rng = np.random.default_rng(7)
    videos = synth_generate(n_videos=10, n_frames=80, feat_dim=2, seed=7, labels="va")
    sequences = []
    for record in videos:
        labels = record.labels.astype(np.float64)
        streams = [np.clip(labels + rng.normal(0.0, 0.3, labels.shape), -1.0, 1.0)
                   for _ in range(5)]
        sequences.append(build_fold_scores(record.video_id, streams))
    records = score_records(sequences, {r.video_id: r.labels for r in videos})
    train, val = records[:7], records[7:]

    val_labels = np.concatenate([r.labels for r in val])
    averaged = np.concatenate([average_folds(s) for s in sequences[7:]])
    baseline = ccc_va(averaged, val_labels).combined
    single = [ccc_va(np.concatenate([s.fold_stream(k) for s in sequences[7:]]),
                     val_labels).combined for k in range(5)]
    assert baseline > max(single)

    config = TrainConfig.for_task("stage2", epochs=150, lr=0.005, hidden_dim=16,
                                  gru_layers=1, local_layers=1, local_window=2, k_folds=5,
                                  window=40, batch_size=2, seed=7)
    trainer = Stage2Trainer(config, 10)
    assert train_until(trainer, train, val, baseline - 0.01, 150) >= baseline - 0.01
