"""Tests for the tensor type, its ops and reverse-mode differentiation."""

import numpy as np
import pytest

from affectkit.autodiff import (
    Tape,
    Tensor,
    backward,
    clip,
    concat,
    elementwise,
    exp,
    grad_check,
    layer_norm,
    log,
    matmul,
    no_grad,
    power,
    relu,
    reset_op_index,
    run_suite,
    sigmoid,
    softmax_lastaxis,
    stack,
    tanh,
)
from affectkit.errors import ContractError, NonFiniteError, ShapeError


def leaf(rng, *shape):
    return Tensor(rng.standard_normal(shape), requires_grad=True)


class TestForward:
    def test_elementwise_dispatch(self, rng):
        a = Tensor(rng.standard_normal((2, 3)))
        b = Tensor(rng.standard_normal((2, 3)))
        np.testing.assert_array_equal(elementwise("mul", a, b).data, a.data * b.data)
        np.testing.assert_array_equal(elementwise("scale", a, 2.0).data, a.data * 2.0)
        assert elementwise("concat-last-axis", a, b).shape == (2, 6)
        assert elementwise("sigmoid", Tensor(np.zeros(1))).item() == 0.5
        with pytest.raises(ContractError):
            elementwise("gelu", a)

    def test_data_is_float64(self):
        assert Tensor([1, 2, 3]).data.dtype == np.float64

    def test_empty_extent_rejected(self):
        with pytest.raises(ShapeError):
            Tensor(np.zeros((0, 3)))

    def test_incompatible_shapes_rejected(self, rng):
        with pytest.raises(ShapeError):
            Tensor(rng.standard_normal((2, 3))) + Tensor(rng.standard_normal((3, 2)))

    def test_scalar_broadcast(self):
        out = Tensor(np.ones((2, 2))) * 3.0
        np.testing.assert_array_equal(out.data, np.full((2, 2), 3.0))

    def test_non_finite_output_names_op(self):
        reset_op_index()
        with pytest.raises(NonFiniteError) as excinfo:
            log(Tensor([0.0, 1.0]))
        assert excinfo.value.op == "log"
        assert excinfo.value.op_index == 0

    def test_sigmoid_is_stable(self):
        out = sigmoid(Tensor([-1000.0, 0.0, 1000.0]))
        np.testing.assert_allclose(out.data, [0.0, 0.5, 1.0])

    def test_softmax_mask_zeroes_excluded(self, rng):
        mask = np.array([[True, False], [True, True]])
        weights = softmax_lastaxis(Tensor(rng.standard_normal((2, 2))), mask=mask)
        assert weights.data[0, 1] == 0.0
        np.testing.assert_allclose(weights.data.sum(axis=-1), 1.0)

    def test_item_requires_single_element(self):
        with pytest.raises(ContractError):
            Tensor([1.0, 2.0]).item()


class TestBackward:
    def test_product_rule(self):
        a = Tensor(3.0, requires_grad=True)
        b = Tensor(4.0, requires_grad=True)
        backward(a * b + a)
        assert a.grad == pytest.approx(5.0)
        assert b.grad == pytest.approx(3.0)

    def test_reused_input_accumulates(self):
        x = Tensor(2.0, requires_grad=True)
        backward(x * x * x)
        assert x.grad == pytest.approx(12.0)

    def test_gradients_accumulate_across_calls(self):
        x = Tensor(1.5, requires_grad=True)
        backward(x * 2.0)
        backward(x * 2.0)
        assert x.grad == pytest.approx(4.0)

    def test_backward_needs_scalar(self, rng):
        x = leaf(rng, 3)
        with pytest.raises(ContractError):
            backward(x * 2.0)

    def test_backward_needs_recorded_graph(self):
        with pytest.raises(ContractError):
            backward(Tensor(1.0) * 2.0)

    def test_no_grad_records_nothing(self, rng):
        x = leaf(rng, 3)
        with no_grad():
            y = (x * 2.0).sum()
        assert not y.requires_grad

    def test_tape_is_topological(self, rng):
        x = leaf(rng, 2)
        y = tanh(x * 2.0).sum()
        order = Tape.from_output(y).order
        assert order[0] is x
        assert order[-1] is y

    @pytest.mark.parametrize("op", [
        lambda x: sigmoid(x).sum(),
        lambda x: tanh(x).sum(),
        lambda x: relu(x + 0.05).sum(),
        lambda x: exp(x).mean(),
        lambda x: log(x * x + 1.0).sum(),
        lambda x: power(x * x + 0.5, 1.5).sum(),
        lambda x: clip(x, -0.5, 0.5).sum(),
        lambda x: (x / (x * x + 2.0)).sum(),
        lambda x: softmax_lastaxis(x)[:, 0].sum(),
        lambda x: stack([x, x * 2.0], axis=1).mean(),
        lambda x: concat([x, tanh(x)], axis=-1).sum(),
        lambda x: x.transpose(1, 0).reshape(-1)[1:4].sum(),
    ])
    def test_elementwise_and_shape_ops(self, rng, op):
        x = Tensor(rng.uniform(-1.0, 1.0, size=(3, 4)))
        assert grad_check(op, x) <= 1e-6

    def test_matmul_batched_and_shared(self, rng):
        w = leaf(rng, 4, 3)
        x = Tensor(rng.standard_normal((2, 5, 4)))
        assert grad_check(lambda t: matmul(t, w).sum(), x, wrt=[w]) <= 1e-6
        y = Tensor(rng.standard_normal((2, 3, 6)))
        assert grad_check(lambda t: matmul(matmul(t, w), y).sum(), x, wrt=[w]) <= 1e-6

    def test_layer_norm(self, rng):
        gain = Tensor(rng.uniform(0.5, 1.5, size=6), requires_grad=True)
        bias = Tensor(rng.standard_normal(6), requires_grad=True)
        x = Tensor(rng.standard_normal((2, 3, 6)))
        assert grad_check(lambda t: layer_norm(t, gain, bias), x, wrt=[gain, bias]) <= 1e-5

    def test_grad_check_rejects_bad_eps(self, rng):
        with pytest.raises(ContractError):
            grad_check(lambda t: t.sum(), leaf(rng, 2), eps=0.1)


@pytest.mark.slow
def test_layer_suite_within_tolerance():
    results = run_suite(seed=0)
    assert set(results) >= {
        "gru_1_layer", "gru_4_layer", "transformer_block", "local_attention_w0",
        "local_attention_w2", "local_attention_w5", "va_head", "au_dual_branch",
        "ccc_loss", "focal_loss",
    }
    for name, error in results.items():
        assert error <= 1e-4, name
