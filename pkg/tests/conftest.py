"""Shared fixtures: tiny synthetic datasets and small training configs."""

import numpy as np
import pytest

from affectkit.config import TrainConfig
from affectkit.data import synth_generate, write_dataset


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def va_records():
    """Six short VA-labelled videos with 8 features per frame."""
    return synth_generate(n_videos=6, n_frames=40, feat_dim=8, seed=3, labels="va")


@pytest.fixture
def au_records():
    return synth_generate(n_videos=4, n_frames=32, feat_dim=8, seed=5, labels="au")


@pytest.fixture
def stage1_config():
    return TrainConfig.for_task(
        "stage1", epochs=2, hidden_dim=8, gru_layers=1, transformer_blocks=1, heads=2,
        ff_mult=2, window=16, batch_size=4, seed=11, k_folds=3, lr=0.003,
    )


@pytest.fixture
def stage2_config():
    return TrainConfig.for_task(
        "stage2", epochs=2, hidden_dim=8, gru_layers=2, local_layers=1, local_window=2,
        window=16, batch_size=4, seed=11, k_folds=3,
    )


@pytest.fixture
def au_config():
    return TrainConfig.for_task(
        "au", epochs=2, transformer_blocks=1, heads=2, ff_mult=2, window=16, batch_size=4,
        seed=11,
    )


@pytest.fixture
def dataset_dir(tmp_path):
    """Nine-video VA dataset on disk with manifest.tsv."""
    records = synth_generate(n_videos=9, n_frames=30, feat_dim=8, seed=2, labels="va")
    write_dataset(records, tmp_path / "data", seed=2, val_fraction=0.25)
    return tmp_path / "data"
