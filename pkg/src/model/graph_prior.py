"""
DDI 图先验：就诊对的 DDI 密度，以及放入跨就诊注意力偏置矩阵
"""
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from ..data.graphs import DdiGraph
from ..errors import LayoutError, UnknownCodeError

KV_TAGS = ("diag", "proc", "med", "lab", "null")

# (就诊索引, 模态标签)；null token 的就诊索引为 -1
KvSlot = Tuple[int, str]


@dataclass(frozen=True)
class InterVisitBias:
    matrix: np.ndarray          # (1, L_kv)
    med_mask_q: np.ndarray      # (1,)
    med_mask_kv: np.ndarray     # (L_kv,)


def _checked(meds: Iterable[int], n_med: int) -> List[int]:
    out = sorted(set(int(m) for m in meds))
    bad = [m for m in out if m < 0 or m >= n_med]
    if bad:
        raise UnknownCodeError("medication index", bad)
    return out


def visit_pair_ddi_density(meds_q: Iterable[int], meds_k: Iterable[int], ddi: DdiGraph) -> float:
    """跨集合有序对上 A_DDI 的均值；任一集合为空记 0"""
    q = _checked(meds_q, ddi.n_med)
    k = _checked(meds_k, ddi.n_med)
    if not q or not k:
        return 0.0
    return float(ddi.adjacency[np.ix_(q, k)].sum() / (len(q) * len(k)))


def build_kv_layout(n_history: int, use_labs: bool) -> List[KvSlot]:
    """每个历史就诊依次 diag, proc, med (, lab)；无历史时是单个 null token"""
    if n_history == 0:
        return [(-1, "null")]
    tags = ("diag", "proc", "med", "lab") if use_labs else ("diag", "proc", "med")
    return [(t, tag) for t in range(n_history) for tag in tags]


def assemble_inter_bias(current_meds: Iterable[int], historical_meds: Sequence[Iterable[int]],
                        layout: Sequence[KvSlot], ddi: DdiGraph) -> InterVisitBias:
    """查询 token 恒为用药通道；只有标记为 med 的 kv 位置取该历史就诊的 DDI 密度"""
    current = _checked(current_meds, ddi.n_med)
    history = [_checked(m, ddi.n_med) for m in historical_meds]
    matrix = np.zeros((1, len(layout)))
    mask_kv = np.zeros(len(layout), dtype=bool)
    for j, (visit, tag) in enumerate(layout):
        if tag not in KV_TAGS:
            raise LayoutError(f"unknown kv tag '{tag}' at position {j}")
        if tag == "null":
            if history:
                raise LayoutError("null token in a layout with historical visits")
            continue
        if not 0 <= visit < len(history):
            raise LayoutError(f"kv position {j} names visit {visit}, but only {len(history)} historical visits exist")
        if tag == "med":
            mask_kv[j] = True
            matrix[0, j] = visit_pair_ddi_density(current, history[visit], ddi)
    return InterVisitBias(matrix=matrix, med_mask_q=np.ones(1, dtype=bool), med_mask_kv=mask_kv)


def ddi_pair_count(med_set: Iterable[int], ddi: DdiGraph) -> Tuple[int, int]:
    return ddi.pair_count(_checked(med_set, ddi.n_med))
