"""
中心差分梯度校验
"""
from typing import Callable, Sequence, Union

import numpy as np

from ..errors import ConfigError, GraphStateError
from .tensor import Tensor, backward


def _relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    if analytic.size == 0:
        return 0.0
    err = np.abs(analytic - numeric) / (np.abs(analytic) + np.abs(numeric) + 1e-12)
    return float(err.max())


def _check_h(h: float) -> None:
    if not 1e-8 <= h <= 1e-4:
        raise ConfigError(f"finite-difference step h must be in [1e-8, 1e-4], got {h}")


def grad_check(f: Callable[[Tensor], Tensor], x: Union[Tensor, np.ndarray, Sequence[float]],
               h: float = 1e-6) -> float:
    """
    返回 max |analytic − central| / (|analytic| + |central| + 1e-12)。
    f 必须是确定性的（例如 dropout 关闭），否则拒绝。
    """
    _check_h(h)
    x0 = np.array(x.data if isinstance(x, Tensor) else x, dtype=np.float64)

    first = f(Tensor(x0)).item()
    second = f(Tensor(x0)).item()
    if first != second:
        raise GraphStateError("grad_check needs a deterministic function (is dropout active?)")

    xt = Tensor(x0, requires_grad=True)
    backward(f(xt))
    analytic = xt.grad if xt.grad is not None else np.zeros_like(x0)

    numeric = np.zeros_like(x0)
    flat = numeric.reshape(-1)
    for i in range(x0.size):
        xp = x0.copy()
        xm = x0.copy()
        xp.reshape(-1)[i] += h
        xm.reshape(-1)[i] -= h
        flat[i] = (f(Tensor(xp)).item() - f(Tensor(xm)).item()) / (2.0 * h)
    return _relative_error(analytic, numeric)


def grad_check_params(loss_fn: Callable[[], Tensor], params: Sequence[Tensor], h: float = 1e-6) -> float:
    """对一组参数张量做同样的校验；扰动后参数值按位恢复"""
    _check_h(h)
    if loss_fn().item() != loss_fn().item():
        raise GraphStateError("grad_check needs a deterministic loss (is dropout active?)")

    for p in params:
        p.zero_grad()
    backward(loss_fn())

    worst = 0.0
    for p in params:
        analytic = p.grad if p.grad is not None else np.zeros(p.shape)
        base = p.data.copy()
        numeric = np.zeros(p.shape)
        for i in range(base.size):
            bumped = base.copy()
            bumped.reshape(-1)[i] += h
            p.assign(bumped)
            up = loss_fn().item()
            bumped.reshape(-1)[i] = base.reshape(-1)[i] - h
            p.assign(bumped)
            down = loss_fn().item()
            numeric.reshape(-1)[i] = (up - down) / (2.0 * h)
        p.assign(base)
        worst = max(worst, _relative_error(analytic, numeric))
    return worst
