"""Tests for optimizers, clipping and learning rate schedules."""

import math

import numpy as np
import pytest

from affectkit.autodiff import Tensor
from affectkit.config import TrainConfig
from affectkit.errors import ConfigurationError, ContractError, NonFiniteError
from affectkit.training.optim import (
    Adam,
    AdamState,
    SGD,
    SgdState,
    adam_step,
    build_optimizer,
    clip_grad_norm,
    sgd_step,
)
from affectkit.training.schedule import (
    LRSchedule,
    cosine_annealing_lr,
    cosine_warm_restart_lr,
    restart_position,
)


class TestAdam:
    def test_first_step_moves_by_lr_times_sign(self):
        params = {"w": np.array([1.0, -2.0, 0.5])}
        grads = {"w": np.array([0.3, -4.0, 2.0])}
        adam_step(params, grads, AdamState(), lr=0.1)
        expected = np.array([1.0, -2.0, 0.5]) - 0.1 * grads["w"] / (np.abs(grads["w"]) + 1e-8)
        np.testing.assert_allclose(params["w"], expected, rtol=1e-12)

    def test_minimises_quadratic(self):
        params = {"x": np.array([1.0])}
        state = AdamState()
        for _ in range(100):
            adam_step(params, {"x": 2.0 * params["x"]}, state, lr=0.1)
        assert abs(params["x"][0]) < 0.05
        assert state.step == 100

    def test_non_finite_gradient_names_parameter(self):
        params = {"layer0.W_z": np.zeros(2)}
        with pytest.raises(NonFiniteError) as info:
            adam_step(params, {"layer0.W_z": np.array([np.nan, 0.0])}, AdamState(), lr=0.1)
        assert info.value.parameter == "layer0.W_z"
        assert params["layer0.W_z"].tolist() == [0.0, 0.0]

    def test_state_arrays_resume_exactly(self, rng):
        def run(optimizer, param, grads):
            for g in grads:
                param.grad = g.copy()
                optimizer.step(0.01)

        grads = [rng.standard_normal(4) for _ in range(4)]
        straight = Tensor(np.ones(4), requires_grad=True)
        run(Adam([("w", straight)]), straight, grads)

        resumed = Tensor(np.ones(4), requires_grad=True)
        first = Adam([("w", resumed)])
        run(first, resumed, grads[:2])
        second = Adam([("w", resumed)])
        second.load_state_arrays(first.state_arrays())
        run(second, resumed, grads[2:])
        np.testing.assert_array_equal(straight.data, resumed.data)


class TestSgd:
    def test_momentum(self):
        params = {"w": np.array([0.0])}
        state = SgdState()
        sgd_step(params, {"w": np.array([1.0])}, state, lr=0.1, momentum=0.9)
        sgd_step(params, {"w": np.array([2.0])}, state, lr=0.1, momentum=0.9)
        assert params["w"][0] == pytest.approx(-0.1 - 0.1 * (0.9 + 2.0))

    def test_zero_lr_leaves_parameters(self, rng):
        w = Tensor(rng.standard_normal(3), requires_grad=True)
        before = w.data.copy()
        w.grad = np.ones(3)
        SGD([("w", w)], momentum=0.9).step(0.0)
        np.testing.assert_array_equal(w.data, before)

    def test_build_optimizer(self):
        w = Tensor(np.zeros(2), requires_grad=True)
        assert isinstance(build_optimizer("sgd", [("w", w)], 0.9), SGD)
        assert isinstance(build_optimizer("adam", [("w", w)]), Adam)
        with pytest.raises(ConfigurationError):
            build_optimizer("rmsprop", [("w", w)])


class TestClipping:
    def test_rescales_to_max_norm(self):
        a = Tensor(np.zeros(1), requires_grad=True)
        b = Tensor(np.zeros(1), requires_grad=True)
        a.grad, b.grad = np.array([3.0]), np.array([4.0])
        assert clip_grad_norm([a, b], 1.0) == pytest.approx(5.0)
        np.testing.assert_allclose([a.grad[0], b.grad[0]], [0.6, 0.8], rtol=1e-9)

    def test_zero_disables(self):
        a = Tensor(np.zeros(2), requires_grad=True)
        a.grad = np.array([30.0, 40.0])
        clip_grad_norm([a], 0.0)
        assert a.grad.tolist() == [30.0, 40.0]


class TestSchedule:
    def test_cosine_endpoints(self):
        assert cosine_annealing_lr(0.0, 5.0, 0.01, 1e-5) == pytest.approx(0.01, abs=1e-12)
        assert cosine_annealing_lr(5.0, 5.0, 0.01, 1e-5) == pytest.approx(1e-5, abs=1e-12)
        assert cosine_annealing_lr(2.5, 5.0, 0.01, 0.0) == pytest.approx(0.005, abs=1e-12)

    def test_restart_resets_to_max(self):
        assert cosine_warm_restart_lr(5.0, 5, 1, 0.01, 1e-5) == pytest.approx(0.01, abs=1e-12)
        assert cosine_warm_restart_lr(4.999, 5, 1, 0.01, 1e-5) < 1e-4

    def test_growing_cycles(self):
        assert restart_position(2.0, 2, 2) == pytest.approx((0.0, 4.0))
        assert restart_position(5.0, 2, 2) == pytest.approx((3.0, 4.0))
        assert restart_position(6.0, 2, 2) == pytest.approx((0.0, 8.0))

    def test_invalid_arguments(self):
        with pytest.raises(ContractError):
            restart_position(1.0, 0, 1)
        with pytest.raises(ContractError):
            restart_position(-1.0, 5, 1)

    def test_per_step_progress(self):
        config = TrainConfig.for_task("au", lr=0.01, t0=1, eta_min=0.0)
        schedule = LRSchedule.from_config(config, steps_per_epoch=4)
        assert schedule.lr_at(0, 0) == pytest.approx(0.01)
        assert schedule.lr_at(0, 2) == pytest.approx(0.005)
        assert schedule.lr_at(1, 0) == pytest.approx(0.01)
        constant = LRSchedule.from_config(TrainConfig(lr=0.002), steps_per_epoch=4)
        assert {constant.lr_at(e, s) for e in range(3) for s in range(4)} == {0.002}

    def test_progress_matches_closed_form(self):
        lr = cosine_warm_restart_lr(7.5, 5, 1, 0.1, 0.0)
        assert lr == pytest.approx(0.05 * (1 + math.cos(math.pi * 2.5 / 5)), abs=1e-12)


def test_sgd_momentum_minimises_quadratic():
    params = {"x": np.array([3.0])}
    state = SgdState()
    for _ in range(500):
        sgd_step(params, {"x": 2.0 * params["x"]}, state, lr=0.1, momentum=0.9)
    assert abs(params["x"][0]) < 1e-6


def test_two_momentum_steps_constant_gradient():
    params = {"w": np.array([0.0])}
    state = SgdState()
    for _ in range(2):
        sgd_step(params, {"w": np.array([0.5])}, state, lr=0.2, momentum=0.9)
    assert params["w"][0] == pytest.approx(-0.2 * 0.5 * (1 + 1.9))
