"""
张量引擎测试：原语数值、梯度（中心差分）、累加语义与错误路径
"""
import math

import numpy as np
import pytest

from src.autodiff import RngStreams, Tensor, backward, grad_check, grad_check_params, ops
from src.errors import ConfigError, GraphStateError, NonFiniteError, ShapeError


# =============================================================================
# 前向数值
# =============================================================================

class TestPrimitiveValues:

    def test_softmax_uniform_row(self):
        y = ops.softmax(Tensor([[0.0, 0.0]]))
        np.testing.assert_allclose(y.data, [[0.5, 0.5]])

    def test_softmax_log_two(self):
        y = ops.softmax(Tensor([[math.log(2.0), 0.0]]))
        np.testing.assert_allclose(y.data, [[2 / 3, 1 / 3]], atol=1e-15)

    def test_softmax_rows_sum_to_one(self, rng):
        y = ops.softmax(Tensor(rng.normal(size=(3, 4, 5)) * 30))
        assert (y.data >= 0).all()
        np.testing.assert_allclose(y.data.sum(axis=-1), 1.0, atol=1e-12)

    def test_sigmoid_and_its_gradient_at_zero(self):
        x = Tensor([0.0], requires_grad=True)
        y = ops.sigmoid(x)
        assert y.item() == 0.5
        backward(ops.sum(y))
        np.testing.assert_allclose(x.grad, [0.25])

    def test_repeat_interleave_order(self):
        y = ops.repeat_interleave(Tensor([[1.0], [2.0]]), 2, axis=0)
        np.testing.assert_array_equal(y.data, [[1.0], [1.0], [2.0], [2.0]])

    def test_strided_slice_even_odd(self):
        x = Tensor(np.arange(6.0).reshape(6, 1))
        np.testing.assert_array_equal(ops.strided_slice(x, 0, 0, 2).data.ravel(), [0, 2, 4])
        np.testing.assert_array_equal(ops.strided_slice(x, 0, 1, 2).data.ravel(), [1, 3, 5])

    def test_softplus_is_stable_for_large_inputs(self):
        y = ops.softplus(Tensor([800.0, -800.0]))
        np.testing.assert_allclose(y.data, [800.0, 0.0], atol=1e-12)

    def test_data_is_read_only(self):
        t = Tensor([1.0, 2.0])
        with pytest.raises(ValueError):
            t.data[0] = 5.0


# =============================================================================
# 梯度校验
# =============================================================================

class TestGradients:

    def test_matmul_matches_central_differences(self, rng):
        a0 = rng.normal(size=(3, 2))
        b = Tensor(rng.normal(size=(2, 4)))
        assert grad_check(lambda a: ops.sum(ops.matmul(a, b)), a0) < 1e-6

    @pytest.mark.parametrize("op", [ops.sigmoid, ops.tanh, ops.softplus])
    def test_smooth_unary(self, op, rng):
        w = Tensor(rng.normal(size=(2, 3)))
        assert grad_check(lambda x: ops.sum(ops.mul(op(x), w)), rng.normal(size=(2, 3))) < 1e-6

    def test_relu_away_from_kink(self, rng):
        x0 = rng.uniform(0.2, 1.0, size=(2, 3)) * rng.choice([-1.0, 1.0], size=(2, 3))
        w = Tensor(rng.normal(size=(2, 3)))
        assert grad_check(lambda x: ops.sum(ops.mul(ops.relu(x), w)), x0) < 1e-6

    def test_softmax_weighted(self, rng):
        w = Tensor(rng.normal(size=(2, 2, 3)))
        assert grad_check(lambda x: ops.sum(ops.mul(ops.softmax(x), w)), rng.normal(size=(2, 2, 3))) < 1e-6

    def test_batched_matmul_and_transpose(self, rng):
        b = Tensor(rng.normal(size=(2, 3, 2)))
        f = lambda a: ops.sum(ops.matmul(ops.transpose(a, (0, 2, 1)), ops.transpose(b, (0, 2, 1))))  # noqa: E731
        assert grad_check(f, rng.normal(size=(2, 2, 3))) < 1e-6

    def test_shape_ops(self, rng):
        w = Tensor(rng.normal(size=(4, 3)))

        def f(x):
            r = ops.repeat_interleave(ops.reshape(x, (2, 1, 3)), 2, axis=0)
            r = ops.concat([ops.strided_slice(r, 0, 0, 2), ops.strided_slice(r, 0, 1, 2)], axis=0)
            return ops.sum(ops.mul(ops.reshape(r, (4, 3)), w))
        assert grad_check(f, rng.normal(size=(2, 3))) < 1e-6

    def test_take_and_expand(self, rng):
        w = Tensor(rng.normal(size=(3, 4)))

        def f(x):
            row = ops.take(x, [1], axis=0)
            return ops.sum(ops.mul(ops.add(ops.expand(row, (3, 4)), ops.take(x, [2, 0, 2], axis=0)), w))
        assert grad_check(f, rng.normal(size=(3, 4))) < 1e-6

    def test_broadcast_leading_axis(self, rng):
        b = Tensor(rng.normal(size=(3, 2)))
        assert grad_check(lambda a: ops.sum(ops.mul(ops.add(a, b), b)), rng.normal(size=(1, 2))) < 1e-6

    def test_mean_and_l2(self, rng):
        p = Tensor(rng.normal(size=(2, 2)), requires_grad=True)
        q = Tensor(rng.normal(size=(3,)), requires_grad=True)
        loss_fn = lambda: ops.add(ops.mean(ops.mul(p, p)), ops.l2_norm_sq([p, q]))  # noqa: E731
        assert grad_check_params(loss_fn, [p, q], h=1e-5) < 1e-6


# =============================================================================
# 反向传播语义
# =============================================================================

class TestBackward:

    def test_reused_leaf_accumulates(self):
        x = Tensor([3.0], requires_grad=True)
        backward(ops.sum(ops.mul(x, x)))
        np.testing.assert_allclose(x.grad, [6.0])

    def test_grads_accumulate_across_graphs(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        backward(ops.sum(x))
        backward(ops.sum(ops.scale(x, 2.0)))
        np.testing.assert_allclose(x.grad, [3.0, 3.0])

    def test_second_backward_on_same_graph_rejected(self):
        x = Tensor([1.0], requires_grad=True)
        loss = ops.sum(ops.mul(x, x))
        backward(loss)
        with pytest.raises(GraphStateError):
            backward(loss)

    def test_non_scalar_loss_rejected(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        with pytest.raises(GraphStateError):
            backward(ops.scale(x, 2.0))

    def test_constant_inputs_get_no_grad(self):
        x = Tensor([1.0], requires_grad=True)
        c = Tensor([2.0])
        backward(ops.sum(ops.mul(x, c)))
        assert c.grad is None


# =============================================================================
# 错误路径
# =============================================================================

class TestErrors:

    def test_non_finite_input(self):
        with pytest.raises(NonFiniteError):
            Tensor([1.0, float("nan")])

    def test_broadcast_only_over_leading_axis(self):
        with pytest.raises(ShapeError):
            ops.add(Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 1))))

    def test_matmul_shape_mismatch(self):
        with pytest.raises(ShapeError):
            ops.matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 3))))

    def test_take_out_of_range(self):
        with pytest.raises(ShapeError):
            ops.take(Tensor(np.zeros((3, 2))), [3])

    def test_dropout_rate_validation(self):
        with pytest.raises(ConfigError):
            ops.dropout(Tensor([1.0]), 1.0, None, training=True)

    def test_dropout_training_needs_rng(self):
        with pytest.raises(ConfigError):
            ops.dropout(Tensor([1.0]), 0.5, None, training=True)

    def test_dropout_eval_is_identity(self):
        x = Tensor([1.0, 2.0])
        assert ops.dropout(x, 0.5, None, training=False) is x

    def test_grad_check_step_range(self):
        with pytest.raises(ConfigError):
            grad_check(lambda x: ops.sum(x), [1.0], h=1e-3)

    def test_grad_check_rejects_nondeterministic_function(self):
        gen = np.random.default_rng(0)
        w = Tensor(np.random.default_rng(1).normal(size=16))
        with pytest.raises(GraphStateError):
            grad_check(lambda x: ops.sum(ops.mul(ops.dropout(x, 0.5, gen, training=True), w)), np.ones(16))


class TestRngStreams:

    def test_fresh_restarts_stream(self):
        s = RngStreams(5)
        np.testing.assert_array_equal(s.fresh("init").random(4), s.fresh("init").random(4))

    def test_named_streams_are_independent(self):
        s = RngStreams(5)
        assert not np.array_equal(s.fresh("init").random(4), s.fresh("dropout").random(4))

    def test_generator_keeps_state(self):
        s = RngStreams(5)
        first = s.generator("order").random()
        assert s.generator("order").random() != first

    def test_split_is_deterministic(self):
        a = RngStreams(5).split("bootstrap").fresh("x").random(3)
        b = RngStreams(5).split("bootstrap").fresh("x").random(3)
        np.testing.assert_array_equal(a, b)
