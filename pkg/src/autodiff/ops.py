"""
可微原语
模型需要的全部前向运算及其梯度；逐元素运算只允许沿大小为 1 的首轴广播，其余广播必须显式 expand
"""
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit

from ..errors import ConfigError, ShapeError
from .tensor import Tensor, as_tensor


# ---------- 广播辅助 ----------

def _check_broadcast(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape == b.shape:
        return
    if (a.ndim == b.ndim and a.ndim >= 1 and a.shape[1:] == b.shape[1:]
            and (a.shape[0] == 1 or b.shape[0] == 1)):
        return
    raise ShapeError(op, a.shape, b.shape, detail="only a leading axis of size 1 may broadcast")


def _unbroadcast(g: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    return g.sum(axis=0, keepdims=True)


# ---------- 逐元素二元运算 ----------

def add(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast("add", a, b)
    sa, sb = a.shape, b.shape

    def bw(g):
        return _unbroadcast(g, sa), _unbroadcast(g, sb)
    return Tensor._from_op("add", a.data + b.data, (a, b), bw)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast("sub", a, b)
    sa, sb = a.shape, b.shape

    def bw(g):
        return _unbroadcast(g, sa), _unbroadcast(-g, sb)
    return Tensor._from_op("sub", a.data - b.data, (a, b), bw)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast("mul", a, b)
    ad, bd = a.data, b.data

    def bw(g):
        return _unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)
    return Tensor._from_op("mul", ad * bd, (a, b), bw)


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    if not np.isfinite(c):
        raise ShapeError("scale", a.shape, detail=f"non-finite scalar {c}")

    def bw(g):
        return (g * c,)
    return Tensor._from_op("scale", a.data * c, (a,), bw)


# ---------- 线性代数 / 形状 ----------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """2D (m,k)@(k,n) 或按首轴批量的 3D (B,m,k)@(B,k,n)"""
    ok = a.ndim in (2, 3) and a.ndim == b.ndim and a.shape[-1] == b.shape[-2]
    if ok and a.ndim == 3:
        ok = a.shape[0] == b.shape[0]
    if not ok:
        raise ShapeError("matmul", a.shape, b.shape)
    ad, bd = a.data, b.data

    def bw(g):
        ga = g @ np.swapaxes(bd, -1, -2)
        gb = np.swapaxes(ad, -1, -2) @ g
        return ga, gb
    return Tensor._from_op("matmul", ad @ bd, (a, b), bw)


def transpose(a: Tensor, axes: Optional[Sequence[int]] = None) -> Tensor:
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    axes = tuple(axes)
    if sorted(axes) != list(range(a.ndim)):
        raise ShapeError("transpose", a.shape, detail=f"bad axes {axes}")
    inverse = tuple(np.argsort(axes))

    def bw(g):
        return (np.transpose(g, inverse),)
    return Tensor._from_op("transpose", np.transpose(a.data, axes), (a,), bw)


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(int(s) for s in shape)
    if int(np.prod(shape)) != a.size or any(s <= 0 for s in shape):
        raise ShapeError("reshape", a.shape, shape)
    orig = a.shape

    def bw(g):
        return (g.reshape(orig),)
    return Tensor._from_op("reshape", a.data.reshape(shape), (a,), bw)


def expand(a: Tensor, shape: Sequence[int]) -> Tensor:
    """显式广播：只能把大小为 1 的轴扩展"""
    shape = tuple(int(s) for s in shape)
    if a.ndim != len(shape) or any(s != t and s != 1 for s, t in zip(a.shape, shape)):
        raise ShapeError("expand", a.shape, shape)
    axes = tuple(i for i, (s, t) in enumerate(zip(a.shape, shape)) if s == 1 and t != 1)

    def bw(g):
        return (g.sum(axis=axes, keepdims=True) if axes else g,)
    return Tensor._from_op("expand", np.broadcast_to(a.data, shape).copy(), (a,), bw)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat", (), detail="no inputs")
    ref = tensors[0]
    ax = axis % ref.ndim
    for t in tensors[1:]:
        if t.ndim != ref.ndim or t.shape[:ax] + t.shape[ax + 1:] != ref.shape[:ax] + ref.shape[ax + 1:]:
            raise ShapeError("concat", ref.shape, t.shape)
    sizes = [t.shape[ax] for t in tensors]
    cuts = np.cumsum(sizes)[:-1]

    def bw(g):
        return tuple(np.split(g, cuts, axis=ax))
    out = np.concatenate([t.data for t in tensors], axis=ax)
    return Tensor._from_op("concat", out, tuple(tensors), bw)


def strided_slice(a: Tensor, axis: int, start: int, step: int = 1, stop: Optional[int] = None) -> Tensor:
    """沿某轴取 start::step（头拆分用，偶数头 / 奇数头）"""
    slicer = [slice(None)] * a.ndim
    slicer[axis] = slice(start, stop, step)
    slicer = tuple(slicer)
    out = a.data[slicer]
    if out.size == 0:
        raise ShapeError("strided_slice", a.shape, detail=f"empty slice {start}:{stop}:{step} on axis {axis}")
    shape = a.shape

    def bw(g):
        ga = np.zeros(shape)
        ga[slicer] = g
        return (ga,)
    return Tensor._from_op("strided_slice", out.copy(), (a,), bw)


def repeat_interleave(a: Tensor, repeats: int, axis: int = 0) -> Tensor:
    """[k0, k1] -> [k0, k0, k1, k1]"""
    if repeats < 1:
        raise ShapeError("repeat_interleave", a.shape, detail=f"repeats={repeats}")
    ax = axis % a.ndim
    n = a.shape[ax]

    def bw(g):
        gm = np.moveaxis(g, ax, 0)
        gm = gm.reshape((n, repeats) + gm.shape[1:]).sum(axis=1)
        return (np.moveaxis(gm, 0, ax),)
    return Tensor._from_op("repeat_interleave", np.repeat(a.data, repeats, axis=ax), (a,), bw)


def take(a: Tensor, indices, axis: int = 0) -> Tensor:
    """按索引取行 / 列（嵌入查表、取预测集合的概率）"""
    idx = np.asarray(indices, dtype=np.int64).reshape(-1)
    ax = axis % a.ndim
    n = a.shape[ax]
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        bad = sorted(int(i) for i in idx if i < 0 or i >= n)
        raise ShapeError("take", a.shape, detail=f"index {bad} out of range for axis {ax} of size {n}")
    shape = a.shape

    def bw(g):
        ga = np.zeros(shape)
        np.add.at(np.moveaxis(ga, ax, 0), idx, np.moveaxis(g, ax, 0))
        return (ga,)
    return Tensor._from_op("take", np.take(a.data, idx, axis=ax), (a,), bw)


def embedding(table: Tensor, indices) -> Tensor:
    return take(table, indices, axis=0)


# ---------- 归约 ----------

def sum(a: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    shape = a.shape

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape),)
    return Tensor._from_op("sum", np.asarray(a.data.sum(axis=axis, keepdims=keepdims)), (a,), bw)


def mean(a: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    n = a.size if axis is None else a.shape[axis]
    return scale(sum(a, axis=axis, keepdims=keepdims), 1.0 / n)


# ---------- 非线性 ----------

def sigmoid(a: Tensor) -> Tensor:
    y = expit(a.data)

    def bw(g):
        return (g * y * (1.0 - y),)
    return Tensor._from_op("sigmoid", y, (a,), bw)


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)

    def bw(g):
        return (g * (1.0 - y * y),)
    return Tensor._from_op("tanh", y, (a,), bw)


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0

    def bw(g):
        return (g * mask,)
    return Tensor._from_op("relu", np.where(mask, a.data, 0.0), (a,), bw)


def softplus(a: Tensor) -> Tensor:
    """log(1 + e^x)，BCE-with-logits 的稳定形式用"""
    x = a.data

    def bw(g):
        return (g * expit(x),)
    return Tensor._from_op("softplus", np.logaddexp(0.0, x), (a,), bw)


def softmax(a: Tensor) -> Tensor:
    """沿最后一轴的 row-softmax"""
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=-1, keepdims=True)

    def bw(g):
        return (y * (g - (g * y).sum(axis=-1, keepdims=True)),)
    return Tensor._from_op("softmax", y, (a,), bw)


# ---------- 正则 ----------

def dropout(x: Tensor, rate: float, rng: Optional[np.random.Generator], training: bool) -> Tensor:
    """训练时按概率 rate 置零，幸存元素乘 1/(1-rate)；评估时恒等"""
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise ConfigError("dropout in training mode needs an rng stream")
    keep = rng.random(x.shape) >= rate
    mask = keep / (1.0 - rate)
    return mul(x, Tensor(mask))


def l2_norm_sq(params: Sequence[Tensor]) -> Tensor:
    """‖θ‖₂²；空参数列表为 0"""
    total = Tensor(0.0)
    for p in params:
        total = add(total, sum(mul(p, p)))
    return total
