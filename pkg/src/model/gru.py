"""
模态 GRU
z = σ(x W_z + h U_z + b_z), r = σ(x W_r + h U_r + b_r), n = tanh(x W_n + r ⊙ (h U_n) + b_n)
h' = (1 − z) ⊙ n + z ⊙ h，写成 n + z ⊙ (h − n)
"""
import math
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..autodiff import Tensor, ops
from ..errors import ShapeError


@dataclass
class GruParams:
    w_z: Tensor
    w_r: Tensor
    w_n: Tensor
    u_z: Tensor
    u_r: Tensor
    u_n: Tensor
    b_z: Tensor      # 1 x d
    b_r: Tensor
    b_n: Tensor

    @property
    def d(self) -> int:
        return self.w_z.shape[1]

    @classmethod
    def init(cls, d: int, rng: np.random.Generator, prefix: str = "gru") -> "GruParams":
        bound = 1.0 / math.sqrt(d)

        def u(name):
            return Tensor(rng.uniform(-bound, bound, size=(d, d)), requires_grad=True, name=f"{prefix}.{name}")

        def zeros(name):
            return Tensor(np.zeros((1, d)), requires_grad=True, name=f"{prefix}.{name}")
        return cls(w_z=u("w_z"), w_r=u("w_r"), w_n=u("w_n"), u_z=u("u_z"), u_r=u("u_r"), u_n=u("u_n"),
                   b_z=zeros("b_z"), b_r=zeros("b_r"), b_n=zeros("b_n"))

    @classmethod
    def zeros(cls, d: int) -> "GruParams":
        """全零参数（测试用）"""
        def z(shape):
            return Tensor(np.zeros(shape), requires_grad=True)
        return cls(*(z((d, d)) for _ in range(6)), *(z((1, d)) for _ in range(3)))

    def named_parameters(self) -> Iterator[Tuple[str, Tensor]]:
        for t in (self.w_z, self.w_r, self.w_n, self.u_z, self.u_r, self.u_n, self.b_z, self.b_r, self.b_n):
            yield t.name, t


def gru_step(x: Tensor, h: Tensor, p: GruParams) -> Tensor:
    z = ops.sigmoid(ops.add(ops.add(ops.matmul(x, p.w_z), ops.matmul(h, p.u_z)), p.b_z))
    r = ops.sigmoid(ops.add(ops.add(ops.matmul(x, p.w_r), ops.matmul(h, p.u_r)), p.b_r))
    n = ops.tanh(ops.add(ops.add(ops.matmul(x, p.w_n), ops.mul(r, ops.matmul(h, p.u_n))), p.b_n))
    return ops.add(n, ops.mul(z, ops.sub(h, n)))


def gru_sequence(inputs: Union[Tensor, Sequence[Tensor]], params: GruParams,
                 h0: Optional[Tensor] = None) -> Tuple[List[Tensor], Tensor]:
    """
    inputs: (T, d) 张量或 T 个 (1, d) 行向量。
    返回 (每步隐状态列表, 最终隐状态)；用 ops.concat(outputs) 得到 (T, d)。
    """
    d = params.d
    if isinstance(inputs, Tensor):
        if inputs.ndim != 2 or inputs.shape[1] != d:
            raise ShapeError("gru_sequence", inputs.shape, (None, d))
        rows = [ops.take(inputs, [t], axis=0) for t in range(inputs.shape[0])]
    else:
        rows = list(inputs)
    if not rows:
        raise ShapeError("gru_sequence", (0, d), detail="needs at least one step")
    for x in rows:
        if x.shape != (1, d):
            raise ShapeError("gru_sequence", x.shape, (1, d))

    h = h0 if h0 is not None else Tensor(np.zeros((1, d)))
    if h.shape != (1, d):
        raise ShapeError("gru_sequence h0", h.shape, (1, d))
    outputs = []
    for x in rows:
        h = gru_step(x, h, params)
        outputs.append(h)
    return outputs, h
