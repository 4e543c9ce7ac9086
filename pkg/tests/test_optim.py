"""
Adam 更新测试
"""
import numpy as np
import pytest

from src.autodiff import Adam, AdamState, Tensor, adam_step, backward, ops
from src.errors import ShapeError


class TestAdamStep:

    def test_first_step_is_learning_rate_sized(self):
        p = Tensor([1.0], requires_grad=True)
        state = AdamState.for_params([p], learning_rate=1e-3)
        adam_step([p], [np.array([1.0])], state)
        # m̂ = v̂ = g，步长 lr · g / (|g| + ε)
        np.testing.assert_allclose(p.data[0] - 1.0, -0.001 / (1.0 + 1e-8), rtol=1e-12)
        assert state.step_count == 1

    def test_zero_gradient_leaves_parameter(self):
        p = Tensor([0.3, -0.2], requires_grad=True)
        state = AdamState.for_params([p])
        adam_step([p], [np.zeros(2)], state)
        np.testing.assert_array_equal(p.data, [0.3, -0.2])

    def test_missing_gradient_counts_as_zero(self):
        p = Tensor([0.3], requires_grad=True)
        state = AdamState.for_params([p])
        adam_step([p], [None], state)
        np.testing.assert_array_equal(p.data, [0.3])
        assert state.step_count == 1

    def test_second_step_with_constant_gradient_does_not_grow(self):
        p = Tensor([0.0], requires_grad=True)
        state = AdamState.for_params([p], learning_rate=1e-3)
        g = np.array([0.7])
        adam_step([p], [g], state)
        first = abs(p.data[0])
        adam_step([p], [g], state)
        second = abs(p.data[0]) - first
        assert second <= first * (1 + 1e-6)

    def test_count_mismatch(self):
        p = Tensor([0.0], requires_grad=True)
        state = AdamState.for_params([p])
        with pytest.raises(ShapeError):
            adam_step([p], [np.zeros(1), np.zeros(1)], state)


class TestAdamWrapper:

    def test_minimizes_a_quadratic(self):
        p = Tensor([2.0, -3.0], requires_grad=True)
        opt = Adam([p], learning_rate=0.1)
        for _ in range(300):
            opt.zero_grad()
            backward(ops.sum(ops.mul(p, p)))
            opt.step()
        assert np.abs(p.data).max() < 0.05

    def test_moments_exported_for_checkpointing(self):
        p = Tensor(np.zeros((2, 2)), requires_grad=True)
        opt = Adam([p])
        arrays = opt.state.to_arrays()
        assert set(arrays) == {"adam_m_0", "adam_v_0", "adam_step"}
