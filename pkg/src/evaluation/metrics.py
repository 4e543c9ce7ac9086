"""
评估指标：Jaccard / F1 / PRAUC / DDI rate / Avg #Meds
"""
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence

import numpy as np

from ..data.graphs import DdiGraph

METRICS = ("jaccard", "f1", "prauc", "ddi_rate", "avg_meds")


@dataclass(frozen=True)
class VisitPrediction:
    patient_id: str
    visit: int
    probs: np.ndarray
    true_set: FrozenSet[int]
    predicted: FrozenSet[int]

    @classmethod
    def from_probs(cls, patient_id: str, visit: int, probs: np.ndarray, true_set: Iterable[int],
                   threshold: float = 0.5) -> "VisitPrediction":
        probs = np.asarray(probs, dtype=np.float64).reshape(-1)
        return cls(patient_id, visit, probs, frozenset(int(m) for m in true_set),
                   frozenset(np.nonzero(probs >= threshold)[0].tolist()))

    @property
    def y(self) -> np.ndarray:
        y = np.zeros(self.probs.size)
        y[list(self.true_set)] = 1.0
        return y


def jaccard(pred: Iterable[int], true: Iterable[int]) -> float:
    pred, true = set(pred), set(true)
    if not pred and not true:
        return 1.0
    return len(pred & true) / len(pred | true)


def f1_set(pred: Iterable[int], true: Iterable[int]) -> float:
    pred, true = set(pred), set(true)
    if not pred and not true:
        return 1.0
    hit = len(pred & true)
    precision = hit / len(pred) if pred else 0.0
    recall = hit / len(true) if true else 0.0
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def prauc_sample(p: np.ndarray, y: np.ndarray) -> Optional[float]:
    """单次就诊的 average precision；按 p 降序，同分按索引升序；没有正例返回 None"""
    p = np.asarray(p, dtype=np.float64).reshape(-1)
    y = np.asarray(y).reshape(-1)
    if not y.any():
        return None
    order = np.lexsort((np.arange(p.size), -p))
    hits = y[order] > 0
    ranks = np.arange(1, p.size + 1)
    precision_at = np.cumsum(hits) / ranks
    return float(precision_at[hits].mean())


def ddi_rate(predictions: Sequence[Iterable[int]], ddi: DdiGraph) -> float:
    """micro：所有就诊的相互作用对数之和 / 总对数之和"""
    hit, total = 0, 0
    for meds in predictions:
        a, b = ddi.pair_count(meds)
        hit += a
        total += b
    return hit / total if total else 0.0


def avg_meds(predictions: Sequence[Iterable[int]]) -> float:
    sizes = [len(set(m)) for m in predictions]
    return float(np.mean(sizes)) if sizes else 0.0


def compute_metrics(visits: List[VisitPrediction], ddi: DdiGraph) -> Dict[str, float]:
    """就诊级宏平均（DDI rate 为 micro）"""
    if not visits:
        return {m: 0.0 for m in METRICS}
    aps = [ap for ap in (prauc_sample(v.probs, v.y) for v in visits) if ap is not None]
    preds = [v.predicted for v in visits]
    return {
        "jaccard": float(np.mean([jaccard(v.predicted, v.true_set) for v in visits])),
        "f1": float(np.mean([f1_set(v.predicted, v.true_set) for v in visits])),
        "prauc": float(np.mean(aps)) if aps else 0.0,
        "ddi_rate": ddi_rate(preds, ddi),
        "avg_meds": avg_meds(preds),
    }
