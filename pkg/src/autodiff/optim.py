"""
Adam 优化器（带偏差修正）
"""
from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np

from ..errors import ShapeError
from .tensor import Tensor


@dataclass
class AdamState:
    first_moment: List[np.ndarray]
    second_moment: List[np.ndarray]
    step_count: int = 0
    learning_rate: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_params(cls, params: Sequence[Tensor], learning_rate: float = 5e-4,
                   beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8) -> "AdamState":
        return cls(first_moment=[np.zeros(p.shape) for p in params],
                   second_moment=[np.zeros(p.shape) for p in params],
                   learning_rate=learning_rate, beta1=beta1, beta2=beta2, epsilon=epsilon)

    def to_arrays(self) -> Dict[str, np.ndarray]:
        out = {f"adam_m_{i}": m for i, m in enumerate(self.first_moment)}
        out.update({f"adam_v_{i}": v for i, v in enumerate(self.second_moment)})
        out["adam_step"] = np.array(self.step_count)
        return out


def adam_step(params: Sequence[Tensor], grads: Sequence[np.ndarray], state: AdamState) -> AdamState:
    """
    一步 Adam 更新。grads 为 None 的参数视为零梯度（一阶 / 二阶矩照常衰减）。
    """
    if len(params) != len(grads) or len(params) != len(state.first_moment):
        raise ShapeError("adam_step", (len(params),), (len(grads),), (len(state.first_moment),),
                         detail="parameter / gradient / moment counts differ")
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    bias1 = 1.0 - b1 ** t
    bias2 = 1.0 - b2 ** t
    for i, (p, g) in enumerate(zip(params, grads)):
        if g is None:
            g = np.zeros(p.shape)
        if g.shape != p.shape or state.first_moment[i].shape != p.shape:
            raise ShapeError("adam_step", p.shape, g.shape, state.first_moment[i].shape)
        m = b1 * state.first_moment[i] + (1.0 - b1) * g
        v = b2 * state.second_moment[i] + (1.0 - b2) * g * g
        state.first_moment[i] = m
        state.second_moment[i] = v
        m_hat = m / bias1
        v_hat = v / bias2
        p.assign(p.data - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon))
    return state


class Adam:
    """参数列表 + AdamState 的薄包装"""

    def __init__(self, params: Sequence[Tensor], learning_rate: float = 5e-4, **kwargs):
        self.params = list(params)
        self.state = AdamState.for_params(self.params, learning_rate=learning_rate, **kwargs)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        adam_step(self.params, [p.grad for p in self.params], self.state)
