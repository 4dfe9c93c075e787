"""Tests for checkpoint encoding and loading."""

import numpy as np
import pytest

from affectkit.errors import CheckpointError
from affectkit.training import (
    Stage1Trainer,
    decode_checkpoint,
    encode_checkpoint,
    load_checkpoint,
    save_checkpoint,
)


@pytest.fixture
def state(stage1_config):
    return Stage1Trainer(stage1_config, 8).state()


def test_encode_decode_preserves_everything(state):
    decoded = decode_checkpoint(encode_checkpoint(state))
    assert decoded.config == state.config
    assert decoded.spec == state.spec
    assert decoded.rng_state == state.rng_state
    assert (decoded.epoch, decoded.best_score, decoded.best_epoch) == (0, None, -1)
    assert decoded.params.keys() == state.params.keys()
    for name, array in state.params.items():
        np.testing.assert_array_equal(decoded.params[name], array, err_msg=name)


def test_header_starts_with_magic(state):
    data = encode_checkpoint(state)
    assert data[:4] == b"AFCK"
    assert data[4:6] == b"\x01\x00"


@pytest.mark.parametrize("corrupt", [
    lambda data: b"XXXX" + data[4:],
    lambda data: data[:4] + b"\x02\x00" + data[6:],
    lambda data: data[:-5],
    lambda data: data + b"\x00",
    lambda data: data[:10],
])
def test_corrupt_bytes(state, corrupt):
    with pytest.raises(CheckpointError):
        decode_checkpoint(corrupt(encode_checkpoint(state)))


def test_save_is_atomic_and_loadable(state, tmp_path):
    path = save_checkpoint(tmp_path / "run" / "best.afck", state)
    assert path.exists()
    assert not (tmp_path / "run" / "best.afck.tmp").exists()
    assert load_checkpoint(path).spec.input_dim == 8


def test_missing_file(tmp_path):
    with pytest.raises(CheckpointError) as info:
        load_checkpoint(tmp_path / "absent.afck")
    assert "absent.afck" in str(info.value)
