"""
DDI 图与因果效应矩阵的加载 / 写出
"""
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, Tuple

import numpy as np

from ..errors import DataFormatError, ShapeError, UnknownCodeError
from ..utils.logger import data_logger as logger


@dataclass(frozen=True)
class DdiGraph:
    """对称、零对角、0/1 的用药相互作用邻接矩阵 A_DDI"""
    adjacency: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.adjacency, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ShapeError("DdiGraph", a.shape, detail="adjacency must be square")
        if not np.isin(a, (0.0, 1.0)).all():
            raise DataFormatError("<ddi>", 0, "adjacency", "entries must be 0 or 1")
        if not np.array_equal(a, a.T):
            raise DataFormatError("<ddi>", 0, "adjacency", "matrix is not symmetric")
        if np.any(np.diag(a) != 0):
            raise DataFormatError("<ddi>", 0, "adjacency", "diagonal must be zero")
        a.flags.writeable = False
        object.__setattr__(self, "adjacency", a)

    @classmethod
    def empty(cls, n_med: int) -> "DdiGraph":
        return cls(np.zeros((n_med, n_med)))

    @classmethod
    def from_pairs(cls, n_med: int, pairs: Iterable[Tuple[int, int]]) -> "DdiGraph":
        a = np.zeros((n_med, n_med))
        for i, j in pairs:
            if i != j:
                a[i, j] = a[j, i] = 1.0
        return cls(a)

    @property
    def n_med(self) -> int:
        return self.adjacency.shape[0]

    def edges(self) -> list:
        i, j = np.nonzero(np.triu(self.adjacency, k=1))
        return list(zip(i.tolist(), j.tolist()))

    def pair_count(self, med_set) -> Tuple[int, int]:
        """无序对 i<j 上的 (相互作用对数, 总对数)"""
        meds = sorted(set(int(m) for m in med_set))
        n = len(meds)
        if n < 2:
            return 0, 0
        sub = self.adjacency[np.ix_(meds, meds)]
        interacting = int(np.triu(sub, k=1).sum())
        return interacting, n * (n - 1) // 2


@dataclass(frozen=True)
class CausalEffectMatrices:
    """诊断 / 手术 -> 用药 的因果效应强度（作为输入，不在此估计）"""
    diag_to_med: np.ndarray
    proc_to_med: np.ndarray

    def __post_init__(self):
        for name in ("diag_to_med", "proc_to_med"):
            m = np.asarray(getattr(self, name), dtype=np.float64)
            if m.ndim != 2:
                raise ShapeError("CausalEffectMatrices", m.shape, detail=f"{name} must be 2-D")
            if not np.isfinite(m).all() or (m < 0).any():
                raise DataFormatError("<causal>", 0, name, "effects must be finite and nonnegative")
            m.flags.writeable = False
            object.__setattr__(self, name, m)
        if self.diag_to_med.shape[1] != self.proc_to_med.shape[1]:
            raise ShapeError("CausalEffectMatrices", self.diag_to_med.shape, self.proc_to_med.shape)

    @classmethod
    def zeros(cls, n_diag: int, n_proc: int, n_med: int) -> "CausalEffectMatrices":
        return cls(np.zeros((n_diag, n_med)), np.zeros((n_proc, n_med)))


def _lines(path: str):
    p = Path(path)
    if not p.exists():
        raise DataFormatError(str(path), 0, "<file>", "file does not exist")
    with p.open("r", encoding="utf-8") as f:
        for line_no, raw in enumerate(f, start=1):
            if raw.strip():
                yield line_no, raw.split()


def load_ddi_edges(path: str, med_vocab: Dict[str, int]) -> DdiGraph:
    """每行一对用药编码；自环忽略并告警，重复对幂等"""
    n = len(med_vocab)
    a = np.zeros((n, n))
    self_edges = 0
    for line_no, fields in _lines(path):
        if len(fields) != 2:
            raise DataFormatError(str(path), line_no, "pair", f"expected 2 codes, got {len(fields)}")
        unknown = [c for c in fields if c not in med_vocab]
        if unknown:
            raise UnknownCodeError(f"medication ({path}:{line_no})", unknown)
        i, j = med_vocab[fields[0]], med_vocab[fields[1]]
        if i == j:
            self_edges += 1
            continue
        a[i, j] = a[j, i] = 1.0
    if self_edges:
        logger.warning(f"⚠️ {path}: 忽略 {self_edges} 条自环")
    return DdiGraph(a)


def load_causal_matrix(path: str, row_vocab: Dict[str, int], med_vocab: Dict[str, int]) -> np.ndarray:
    """三元组 row_code med_code value；未给出的条目为 0，负值或冲突重复被拒绝"""
    m = np.zeros((len(row_vocab), len(med_vocab)))
    seen: Dict[Tuple[int, int], float] = {}
    for line_no, fields in _lines(path):
        if len(fields) != 3:
            raise DataFormatError(str(path), line_no, "triplet", f"expected 3 fields, got {len(fields)}")
        row_code, med_code, raw_value = fields
        if row_code not in row_vocab:
            raise UnknownCodeError(f"row ({path}:{line_no})", [row_code])
        if med_code not in med_vocab:
            raise UnknownCodeError(f"medication ({path}:{line_no})", [med_code])
        try:
            value = float(raw_value)
        except ValueError as e:
            raise DataFormatError(str(path), line_no, "value", f"not a number: {raw_value!r}") from e
        if not math.isfinite(value) or value < 0:
            raise DataFormatError(str(path), line_no, "value", f"effect must be finite and >= 0, got {value}")
        key = (row_vocab[row_code], med_vocab[med_code])
        if key in seen and seen[key] != value:
            raise DataFormatError(str(path), line_no, "value",
                                  f"conflicting duplicate for ({row_code}, {med_code}): {seen[key]} vs {value}")
        seen[key] = value
        m[key] = value
    return m


def write_ddi_edges(path: str, ddi: DdiGraph, med_codes) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for i, j in ddi.edges():
            f.write(f"{med_codes[i]}\t{med_codes[j]}\n")


def write_causal_matrix(path: str, matrix: np.ndarray, row_codes, med_codes) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        rows, cols = np.nonzero(matrix)
        for r, c in zip(rows.tolist(), cols.tolist()):
            f.write(f"{row_codes[r]}\t{med_codes[c]}\t{float(matrix[r, c])!r}\n")


def co_support_graph(effects: np.ndarray) -> np.ndarray:
    """两个编码若共同支持（效应 > 0）同一种用药则相邻；零对角"""
    support = (np.asarray(effects) > 0).astype(np.float64)
    a = (support @ support.T > 0).astype(np.float64)
    np.fill_diagonal(a, 0.0)
    return a
