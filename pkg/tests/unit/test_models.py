"""Tests for the fusion model, the stacker and the AU detector."""

import numpy as np
import pytest

from affectkit.autodiff import Tensor
from affectkit.config import TrainConfig
from affectkit.ensemble import build_fold_scores
from affectkit.errors import CheckpointError, ConfigurationError, ContractError, ShapeError
from affectkit.models import (
    AuModel,
    FusionModel,
    StackerModel,
    au_ablate_t1,
    au_forward,
    au_predict,
    build_model,
    stage2_forward,
)


class TestFusionModel:
    def test_untrained_heads_predict_zero(self, rng):
        model = FusionModel(6, hidden_dim=8, gru_layers=1, heads=2, ff_mult=2, rng=rng)
        out = model(Tensor(rng.standard_normal((2, 5, 6))))
        for head in (out.fused, out.gru, out.transformer):
            assert head.shape == (2, 5, 2)
            np.testing.assert_array_equal(head.data, 0.0)

    def test_outputs_bounded(self, rng):
        model = FusionModel(6, hidden_dim=8, gru_layers=1, heads=2, ff_mult=2, rng=rng,
                            head_init="uniform")
        out = model(Tensor(10 * rng.standard_normal((1, 7, 6))))
        assert np.all(np.abs(out.fused.data) <= 1.0)

    def test_wrong_width(self, rng):
        model = FusionModel(6, hidden_dim=8, gru_layers=1, heads=2, ff_mult=2, rng=rng)
        with pytest.raises(ShapeError):
            model(Tensor(np.zeros((1, 3, 5))))


class TestStacker:
    def test_forward_on_fold_scores(self, rng):
        model = StackerModel(6, hidden_dim=8, gru_layers=2, local_layers=1, local_window=2,
                             rng=rng, head_init="uniform")
        scores = build_fold_scores("v", [rng.uniform(-1, 1, (9, 2)) for _ in range(3)])
        out = stage2_forward(model, scores)
        assert out.shape == (9, 2)
        assert np.all(np.abs(out) <= 1.0)
        np.testing.assert_array_equal(out, stage2_forward(model, scores.vectors))

    def test_width_mismatch_is_a_checkpoint_error(self, rng):
        model = StackerModel(10, hidden_dim=4, gru_layers=1, rng=rng)
        with pytest.raises(CheckpointError):
            stage2_forward(model, np.zeros((5, 6)))

    def test_plain_gru_variant(self, rng):
        plain = StackerModel(6, hidden_dim=4, gru_layers=4, local_layers=0, rng=rng)
        assert not any(name.startswith("attention") for name, _ in plain.named_parameters())
        np.testing.assert_array_equal(stage2_forward(plain, np.zeros((3, 6))), 0.0)


class TestAuModel:
    def test_untrained_probabilities_are_one_half(self, rng):
        model = AuModel(8, rng=rng, blocks=1, heads=2, ff_mult=2)
        out = model(Tensor(rng.standard_normal((2, 4, 8))))
        assert out.probs.shape == (2, 4, 12)
        np.testing.assert_array_equal(out.probs.data, 0.5)
        assert set(out.head_probs) == {"t1", "t2", "fused"}

    def test_final_logits_are_head_mean(self, rng):
        model = AuModel(4, rng=rng, blocks=1, heads=2, ff_mult=2, head_init="uniform")
        out = model(Tensor(rng.standard_normal((1, 5, 4))))
        mean = sum(out.head_logits[h].data for h in ("t1", "t2", "fused")) / 3
        np.testing.assert_allclose(out.logits.data, mean, rtol=1e-12)

    def test_t1_ablation_matches_t1_head(self, rng):
        model = AuModel(4, rng=rng, blocks=1, heads=2, ff_mult=2, head_init="uniform")
        x = Tensor(rng.standard_normal((2, 6, 4)))
        full = model(x)
        np.testing.assert_array_equal(au_ablate_t1(model, x).data, full.head_probs["t1"].data)

    def test_zeroed_t2_branch_reduces_to_t1(self, rng):
        model = AuModel(4, rng=rng, blocks=1, heads=2, ff_mult=2, head_init="uniform")
        for layer in (model.compress, model.fc2):
            for p in layer.parameters():
                p.data[...] = 0.0
        fused = model.fc_f.param("W").data
        fused[:4] = 2.0 * model.fc1.param("W").data
        fused[4:] = 0.0
        model.fc_f.param("b").data[...] = 2.0 * model.fc1.param("b").data
        x = Tensor(rng.standard_normal((2, 6, 4)))
        np.testing.assert_allclose(au_forward(model, x).probs.data,
                                   au_ablate_t1(model, x).data, rtol=1e-12, atol=1e-15)

    def test_functional_forward(self, rng):
        model = AuModel(4, rng=rng, blocks=1, heads=2, ff_mult=2, head_init="uniform")
        x = Tensor(rng.standard_normal((1, 3, 4)))
        np.testing.assert_array_equal(au_forward(model, x).probs.data, model(x).probs.data)

    def test_expanded_branch_width(self, rng):
        model = AuModel(4, rng=rng, blocks=1, heads=2, ff_mult=2, expand_factor=3)
        assert model.d_e == 12
        with pytest.raises(ConfigurationError):
            AuModel(4, rng=rng, expand_factor=1)

    def test_invalid_head_selection(self, rng):
        model = AuModel(4, rng=rng, blocks=1, heads=2, ff_mult=2)
        with pytest.raises(ContractError):
            model(Tensor(np.zeros((1, 2, 4))), heads=("t3",))
        with pytest.raises(ContractError):
            model(Tensor(np.zeros((1, 2, 4))), heads=())

    def test_thresholding(self):
        bits = au_predict(np.array([[0.2, 0.5, 0.9]]), threshold=0.5)
        assert bits.tolist() == [[0, 1, 1]]


def test_build_model_per_task():
    config = TrainConfig.for_task("stage1", hidden_dim=8, heads=2, ff_mult=2)
    assert isinstance(build_model("stage1", 6, config), FusionModel)
    stacker = build_model("stage2", 10, TrainConfig.for_task("stage2", hidden_dim=8))
    assert isinstance(stacker, StackerModel) and stacker.input_dim == 10
    au = build_model("au", 8, TrainConfig.for_task("au", heads=2, ff_mult=2))
    assert isinstance(au, AuModel)
    with pytest.raises(ConfigurationError):
        build_model("stage3", 6, config)
