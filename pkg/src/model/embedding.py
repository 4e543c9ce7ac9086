"""
多模态嵌入层
编码表求和池化、化验事件编码、人口学编码，以及按模态同构图做一步残差聚合
"""
from dataclasses import dataclass
from typing import Iterator, Sequence, Tuple

import numpy as np

from ..autodiff import Tensor, ops
from ..errors import DataFormatError, ShapeError


@dataclass
class EmbeddingTables:
    diag_table: Tensor        # n_D x d
    proc_table: Tensor        # n_P x d
    med_table: Tensor         # n_M x d
    gender_table: Tensor      # 2 x d
    age_projection: Tensor    # 1 x d
    lab_projection: Tensor    # 2 x d
    refine_diag: Tensor       # d x d
    refine_proc: Tensor
    refine_med: Tensor

    @property
    def d(self) -> int:
        return self.diag_table.shape[1]

    @classmethod
    def init(cls, n_diag: int, n_proc: int, n_med: int, d: int, rng: np.random.Generator) -> "EmbeddingTables":
        bound = 1.0 / np.sqrt(d)

        def u(shape, name):
            return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True, name=name)
        return cls(
            diag_table=u((n_diag, d), "emb.diag"),
            proc_table=u((n_proc, d), "emb.proc"),
            med_table=u((n_med, d), "emb.med"),
            gender_table=u((2, d), "emb.gender"),
            age_projection=u((1, d), "emb.age"),
            lab_projection=u((2, d), "emb.lab"),
            refine_diag=u((d, d), "refine.diag"),
            refine_proc=u((d, d), "refine.proc"),
            refine_med=u((d, d), "refine.med"),
        )

    def named_parameters(self) -> Iterator[Tuple[str, Tensor]]:
        for t in (self.diag_table, self.proc_table, self.med_table, self.gender_table, self.age_projection,
                  self.lab_projection, self.refine_diag, self.refine_proc, self.refine_med):
            yield t.name, t


def _zeros(d: int) -> Tensor:
    return Tensor(np.zeros((1, d)))


def embed_codes_pooled(code_indices: Sequence[int], table: Tensor) -> Tensor:
    """h = Σ_{c ∈ set} table[c]，形状 (1, d)；空集合返回零向量"""
    idx = np.asarray(code_indices, dtype=np.int64).reshape(-1)
    if idx.size == 0:
        return _zeros(table.shape[1])
    return ops.sum(ops.embedding(table, idx), axis=0, keepdims=True)


def encode_labs(lab_pairs: np.ndarray, lab_projection: Tensor) -> Tensor:
    """每个事件 ReLU([id_norm, value_norm] · W_lab)，再在就诊内取平均"""
    pairs = np.asarray(lab_pairs, dtype=np.float64).reshape(-1, 2)
    if pairs.shape[0] == 0:
        return _zeros(lab_projection.shape[1])
    events = ops.relu(ops.matmul(Tensor(pairs, name="labs"), lab_projection))
    return ops.mean(events, axis=0, keepdims=True)


def encode_demographics(gender: int, age: float, gender_table: Tensor,
                        age_projection: Tensor) -> Tuple[Tensor, Tensor]:
    """(G_e[gender], age/100 · A_e)"""
    if gender not in (0, 1):
        raise DataFormatError("<visit>", 0, "gender", f"gender must be 0 or 1, got {gender}")
    if not np.isfinite(age) or age < 0:
        raise DataFormatError("<visit>", 0, "age", f"age must be finite and >= 0, got {age}")
    return ops.embedding(gender_table, [gender]), ops.scale(age_projection, age / 100.0)


def neighbor_weights(code_indices: Sequence[int], adjacency: np.ndarray) -> np.ndarray:
    """w[n] = Σ_c A[c, n] / deg(c) / |set|；无邻居的编码贡献零"""
    idx = np.asarray(code_indices, dtype=np.int64).reshape(-1)
    w = np.zeros(adjacency.shape[0])
    if idx.size == 0:
        return w
    rows = adjacency[idx]
    deg = rows.sum(axis=1, keepdims=True)
    w = (np.divide(rows, deg, out=np.zeros_like(rows), where=deg > 0)).sum(axis=0)
    return w / idx.size


def homograph_refine(pooled: Tensor, code_indices: Sequence[int], adjacency: np.ndarray,
                     table: Tensor, refine_map: Tensor) -> Tensor:
    """output = pooled + ReLU(message · R)，message 为邻居嵌入的均值聚合"""
    adjacency = np.asarray(adjacency)
    n = table.shape[0]
    if adjacency.shape != (n, n):
        raise ShapeError("homograph_refine", adjacency.shape, (n, n), detail="adjacency must match the table")
    w = neighbor_weights(code_indices, adjacency)
    if not w.any():
        return pooled
    message = ops.matmul(Tensor(w[None, :]), table)
    return ops.add(pooled, ops.relu(ops.matmul(message, refine_map)))
