"""
Tensor - 反向模式自动微分的稠密张量
每次前向重新建图；节点按创建顺序编号，backward 按编号逆序回放
"""
import itertools
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import GraphStateError, NonFiniteError

Number = Union[int, float]
BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

# 全局单调编号；next() 在 GIL 下是原子的，多个训练线程可共享
_node_counter = itertools.count()


def _check_finite(stage: str, arr: np.ndarray) -> None:
    if not np.isfinite(arr).all():
        raise NonFiniteError(stage)


class Node:
    """一次已执行的运算：输入、输出与梯度回放函数"""
    __slots__ = ("op", "inputs", "output", "backward_fn", "index")

    def __init__(self, op: str, inputs: Tuple["Tensor", ...], output: "Tensor", backward_fn: BackwardFn):
        self.op = op
        self.inputs = inputs
        self.output = output
        self.backward_fn: Optional[BackwardFn] = backward_fn
        self.index = next(_node_counter)


class Tensor:
    """float64 稠密张量，可参与计算图"""
    __slots__ = ("data", "requires_grad", "grad", "node", "name")

    def __init__(self, data, requires_grad: bool = False, name: str = ""):
        arr = np.array(data, dtype=np.float64)
        _check_finite(name or "tensor", arr)
        arr.flags.writeable = False
        self.data: np.ndarray = arr
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.node: Optional[Node] = None
        self.name = name

    @classmethod
    def _from_op(cls, op: str, data: np.ndarray, inputs: Tuple["Tensor", ...], backward_fn: BackwardFn) -> "Tensor":
        data = np.asarray(data)
        _check_finite(op, data)
        out = cls.__new__(cls)
        data.flags.writeable = False
        out.data = data
        out.grad = None
        out.name = ""
        out.requires_grad = any(t.requires_grad for t in inputs)
        out.node = Node(op, inputs, out, backward_fn) if out.requires_grad else None
        return out

    # ---- 属性 ----
    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def assign(self, new_data: np.ndarray) -> None:
        """优化器原地替换参数值（形状不变）"""
        arr = np.array(new_data, dtype=np.float64)
        if arr.shape != self.data.shape:
            from ..errors import ShapeError
            raise ShapeError("assign", self.data.shape, arr.shape)
        _check_finite(self.name or "assign", arr)
        arr.flags.writeable = False
        self.data = arr

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{tag})"

    # ---- 运算符，委托给 ops ----
    def __add__(self, other):
        from . import ops
        return ops.add(self, as_tensor(other))

    def __radd__(self, other):
        from . import ops
        return ops.add(as_tensor(other), self)

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, as_tensor(other))

    def __rsub__(self, other):
        from . import ops
        return ops.sub(as_tensor(other), self)

    def __mul__(self, other):
        from . import ops
        if isinstance(other, (int, float)):
            return ops.scale(self, float(other))
        return ops.mul(self, as_tensor(other))

    def __rmul__(self, other):
        return self.__mul__(other)

    def __neg__(self):
        from . import ops
        return ops.scale(self, -1.0)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, as_tensor(other))

    def sum(self, axis: Optional[int] = None, keepdims: bool = False) -> "Tensor":
        from . import ops
        return ops.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis: Optional[int] = None, keepdims: bool = False) -> "Tensor":
        from . import ops
        return ops.mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape) -> "Tensor":
        from . import ops
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    def transpose(self, *axes) -> "Tensor":
        from . import ops
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return ops.transpose(self, axes or None)

    @property
    def T(self) -> "Tensor":
        return self.transpose()


def as_tensor(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


class ComputeGraph:
    """从 loss 反向可达的节点，按执行顺序排列"""

    def __init__(self, nodes: List[Node]):
        self.nodes = nodes

    @classmethod
    def trace(cls, loss: Tensor) -> "ComputeGraph":
        seen: Dict[int, Node] = {}
        stack = [loss]
        while stack:
            t = stack.pop()
            node = t.node
            if node is None or node.index in seen:
                continue
            seen[node.index] = node
            stack.extend(node.inputs)
        return cls(sorted(seen.values(), key=lambda n: n.index))

    def __len__(self) -> int:
        return len(self.nodes)


def backward(loss: Tensor) -> ComputeGraph:
    """
    对标量 loss 做反向传播，把 ∂loss/∂leaf 累加到每个 requires_grad 叶子的 grad 上。
    同一张图只能 backward 一次。
    """
    if loss.size != 1:
        raise GraphStateError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise GraphStateError("loss does not depend on any tensor with requires_grad=True")

    if loss.node is None:
        # loss 本身就是叶子
        seed = np.ones_like(loss.data)
        loss.grad = seed if loss.grad is None else loss.grad + seed
        return ComputeGraph([])

    graph = ComputeGraph.trace(loss)
    if any(n.backward_fn is None for n in graph.nodes):
        raise GraphStateError("backward was already run on this graph; re-run the forward pass first")

    grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(graph.nodes):
        g = grads.pop(id(node.output), None)
        fn = node.backward_fn
        node.backward_fn = None
        if g is None:
            continue
        input_grads = fn(g)
        for inp, gi in zip(node.inputs, input_grads):
            if gi is None or not inp.requires_grad:
                continue
            if inp.node is None:
                inp.grad = gi.copy() if inp.grad is None else inp.grad + gi
            else:
                key = id(inp)
                grads[key] = gi if key not in grads else grads[key] + gi
    return graph
