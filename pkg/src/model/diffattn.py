"""
差分注意力内核
v2：Q 投影到 2H 个头，K/V 为 H 个头并 repeat-interleave 对齐；按 token、按头对的 λ 门控；
    可选的 softmax 前图偏置 λ_graph · B
v1：消融基线，门控为每个头对一个可学习标量（初始化 0.5），无偏置路径
"""
import math
from dataclasses import dataclass
from typing import Iterator, Optional, Tuple, Union

import numpy as np

from ..autodiff import Tensor, ops
from ..errors import ConfigError, ShapeError


@dataclass
class AttentionTrace:
    """一次内核调用的注意力权重 (2H, L_q, L_kv) 与门控"""
    weights: Optional[np.ndarray] = None
    gates: Optional[np.ndarray] = None


@dataclass
class DiffAttnParams:
    w_q: Tensor          # d x 2d
    w_k: Tensor          # d x d
    w_v: Tensor          # d x d
    w_lambda: Tensor     # d x H
    w_o: Tensor          # d x d
    n_heads: int
    lambda_graph: float = 0.1

    def __post_init__(self):
        d = self.w_k.shape[0]
        if d % self.n_heads != 0:
            raise ConfigError(f"d={d} is not divisible by n_heads={self.n_heads}")
        expected = {"w_q": (d, 2 * d), "w_k": (d, d), "w_v": (d, d), "w_lambda": (d, self.n_heads), "w_o": (d, d)}
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ShapeError("DiffAttnParams", getattr(self, name).shape, shape, detail=name)

    @property
    def d(self) -> int:
        return self.w_k.shape[0]

    @property
    def head_dim(self) -> int:
        return self.d // self.n_heads

    @classmethod
    def init(cls, d: int, n_heads: int, rng: np.random.Generator, prefix: str = "attn",
             lambda_graph: float = 0.1) -> "DiffAttnParams":
        if d % n_heads != 0:
            raise ConfigError(f"d={d} is not divisible by n_heads={n_heads}")
        bound = 1.0 / math.sqrt(d)

        def u(shape, name):
            return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True, name=f"{prefix}.{name}")
        return cls(w_q=u((d, 2 * d), "w_q"), w_k=u((d, d), "w_k"), w_v=u((d, d), "w_v"),
                   w_lambda=u((d, n_heads), "w_lambda"), w_o=u((d, d), "w_o"),
                   n_heads=n_heads, lambda_graph=lambda_graph)

    def named_parameters(self) -> Iterator[Tuple[str, Tensor]]:
        for t in (self.w_q, self.w_k, self.w_v, self.w_lambda, self.w_o):
            yield t.name, t


@dataclass
class DiffAttnV1Params:
    w_q: Tensor
    w_k: Tensor
    w_v: Tensor
    gate: Tensor         # (H,)，每个头对一个标量
    w_o: Tensor
    n_heads: int

    def __post_init__(self):
        d = self.w_k.shape[0]
        if d % self.n_heads != 0:
            raise ConfigError(f"d={d} is not divisible by n_heads={self.n_heads}")
        if self.gate.shape != (self.n_heads,):
            raise ShapeError("DiffAttnV1Params", self.gate.shape, (self.n_heads,), detail="gate")

    @property
    def d(self) -> int:
        return self.w_k.shape[0]

    @property
    def head_dim(self) -> int:
        return self.d // self.n_heads

    @classmethod
    def init(cls, d: int, n_heads: int, rng: np.random.Generator, prefix: str = "attn") -> "DiffAttnV1Params":
        if d % n_heads != 0:
            raise ConfigError(f"d={d} is not divisible by n_heads={n_heads}")
        bound = 1.0 / math.sqrt(d)

        def u(shape, name):
            return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True, name=f"{prefix}.{name}")
        return cls(w_q=u((d, 2 * d), "w_q"), w_k=u((d, d), "w_k"), w_v=u((d, d), "w_v"),
                   gate=Tensor(np.full(n_heads, 0.5), requires_grad=True, name=f"{prefix}.gate"),
                   w_o=u((d, d), "w_o"), n_heads=n_heads)

    def named_parameters(self) -> Iterator[Tuple[str, Tensor]]:
        for t in (self.w_q, self.w_k, self.w_v, self.gate, self.w_o):
            yield t.name, t


AttnParams = Union[DiffAttnParams, DiffAttnV1Params]


def _heads(x: Tensor, n_heads: int, head_dim: int) -> Tensor:
    """(L, n_heads·d_h) -> (n_heads, L, d_h)"""
    length = x.shape[0]
    return ops.transpose(ops.reshape(x, (length, n_heads, head_dim)), (1, 0, 2))


def _paired_contexts(X: Tensor, Y: Tensor, bias, params: AttnParams, lambda_graph: float,
                     trace: Optional[AttentionTrace]) -> Tuple[Tensor, Tensor]:
    if X.ndim != 2 or Y.ndim != 2 or X.shape[1] != params.d or Y.shape[1] != params.d:
        raise ShapeError("diffattn", X.shape, Y.shape, detail=f"inputs must be (L, {params.d})")
    H, dh = params.n_heads, params.head_dim
    lq, lkv = X.shape[0], Y.shape[0]

    q = _heads(ops.matmul(X, params.w_q), 2 * H, dh)
    k = ops.repeat_interleave(_heads(ops.matmul(Y, params.w_k), H, dh), 2, axis=0)
    v = ops.repeat_interleave(_heads(ops.matmul(Y, params.w_v), H, dh), 2, axis=0)

    s = ops.scale(ops.matmul(q, ops.transpose(k, (0, 2, 1))), 1.0 / math.sqrt(dh))
    if bias is not None:
        b = np.asarray(bias.data if isinstance(bias, Tensor) else bias, dtype=np.float64)
        if b.shape != (lq, lkv):
            raise ShapeError("diffattn bias", b.shape, (lq, lkv))
        s = ops.add(s, ops.scale(Tensor(b.reshape(1, lq, lkv), name="graph_bias"), lambda_graph))
    a = ops.softmax(s)
    if trace is not None:
        trace.weights = a.data.copy()
    c = ops.matmul(a, v)
    return ops.strided_slice(c, 0, 0, 2), ops.strided_slice(c, 0, 1, 2)


def _combine(c1: Tensor, c2: Tensor, lam: Tensor, params: AttnParams) -> Tensor:
    """C_diff = C1 − λ⊙C2，头拼接回 (L_q, d) 后乘 W_O"""
    H, dh = params.n_heads, params.head_dim
    lq = c1.shape[1]
    c_diff = ops.sub(c1, ops.mul(lam, c2))
    merged = ops.reshape(ops.transpose(c_diff, (1, 0, 2)), (lq, H * dh))
    return ops.matmul(merged, params.w_o)


def lambda_gate(X: Tensor, w_lambda: Tensor) -> Tensor:
    """λ = σ(X · W_λ)，形状 (L_q, H)"""
    if X.ndim != 2 or w_lambda.ndim != 2 or X.shape[1] != w_lambda.shape[0]:
        raise ShapeError("lambda_gate", X.shape, w_lambda.shape)
    return ops.sigmoid(ops.matmul(X, w_lambda))


def diffattn_v2(X: Tensor, Y: Tensor, bias, params: DiffAttnParams, gates=None,
                trace: Optional[AttentionTrace] = None) -> Tensor:
    """
    X: (L_q, d) 查询序列, Y: (L_kv, d) 键值序列, bias: (L_q, L_kv) 或 None。
    gates 直接注入 (L_q, H) 门控，替代 σ(X·W_λ)（退化情形测试用）。
    """
    c1, c2 = _paired_contexts(X, Y, bias, params, params.lambda_graph, trace)
    H, dh = params.n_heads, params.head_dim
    lq = X.shape[0]
    lam = lambda_gate(X, params.w_lambda) if gates is None else (
        gates if isinstance(gates, Tensor) else Tensor(gates))
    if lam.shape != (lq, H):
        raise ShapeError("diffattn_v2 gates", lam.shape, (lq, H))
    if trace is not None:
        trace.gates = lam.data.copy()
    lam = ops.expand(ops.reshape(ops.transpose(lam, (1, 0)), (H, lq, 1)), (H, lq, dh))
    return _combine(c1, c2, lam, params)


def diffattn_v1(X: Tensor, Y: Tensor, params: DiffAttnV1Params,
                trace: Optional[AttentionTrace] = None) -> Tensor:
    """与 v2 相同的流水线，但门控与查询无关"""
    c1, c2 = _paired_contexts(X, Y, None, params, 0.0, trace)
    H, dh = params.n_heads, params.head_dim
    lq = X.shape[0]
    if trace is not None:
        trace.gates = params.gate.data.copy()
    lam = ops.expand(ops.reshape(params.gate, (H, 1, 1)), (H, lq, dh))
    return _combine(c1, c2, lam, params)


def diffattn(X: Tensor, Y: Tensor, bias, params: AttnParams,
             trace: Optional[AttentionTrace] = None) -> Tensor:
    """按参数类型分派；v1 没有偏置路径"""
    if isinstance(params, DiffAttnV1Params):
        if bias is not None:
            raise ConfigError("the v1 kernel has no graph-bias path")
        return diffattn_v1(X, Y, params, trace=trace)
    return diffattn_v2(X, Y, bias, params, trace=trace)
