"""
Bootstrap 评估：每次不放回抽取 ⌊0.8·n⌋ 个测试患者，共 10 次，报告各指标 mean ± std
"""
import math
from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np
import pandas as pd

from ..autodiff.rng import RngStreams
from ..data.graphs import DdiGraph
from ..errors import EvaluationError
from .metrics import METRICS, VisitPrediction, compute_metrics


@dataclass(frozen=True)
class MetricSummary:
    mean: float
    std: float
    values: tuple


@dataclass
class EvalReport:
    metrics: Dict[str, MetricSummary]
    point: Dict[str, float]             # 全部测试就诊上的指标
    n_patients: int
    n_visits: int
    subsets: List[List[str]] = field(default_factory=list, repr=False)

    def mean(self, metric: str) -> float:
        return self.metrics[metric].mean

    def to_frame(self, arm: str = "", seed: int = 0) -> pd.DataFrame:
        rows = [{"arm": arm, "seed": seed, "metric": m, "mean": s.mean, "std": s.std}
                for m, s in self.metrics.items()]
        return pd.DataFrame(rows, columns=["arm", "seed", "metric", "mean", "std"])


def bootstrap_subsets(patient_ids: Sequence[str], seed: int, iterations: int = 10,
                      fraction: float = 0.8) -> List[List[str]]:
    ids = sorted(patient_ids)
    size = int(math.floor(fraction * len(ids)))
    if len(ids) < 2 or size < 1:
        raise EvaluationError(f"bootstrap needs at least 2 test patients, got {len(ids)}")
    rng = RngStreams(seed).fresh("bootstrap")
    return [[ids[i] for i in sorted(rng.choice(len(ids), size=size, replace=False))] for _ in range(iterations)]


def bootstrap_eval(predictions: Dict[str, List[VisitPrediction]], ddi: DdiGraph, seed: int,
                   iterations: int = 10, fraction: float = 0.8) -> EvalReport:
    """predictions 按患者分组；std 为总体标准差 (ddof=0)"""
    subsets = bootstrap_subsets(list(predictions), seed, iterations, fraction)
    per_iter = [compute_metrics([v for pid in subset for v in predictions[pid]], ddi) for subset in subsets]
    summaries = {}
    for m in METRICS:
        values = np.array([it[m] for it in per_iter])
        summaries[m] = MetricSummary(mean=float(values.mean()), std=float(values.std(ddof=0)),
                                     values=tuple(values.tolist()))
    all_visits = [v for pid in sorted(predictions) for v in predictions[pid]]
    return EvalReport(metrics=summaries, point=compute_metrics(all_visits, ddi),
                      n_patients=len(predictions), n_visits=len(all_visits), subsets=subsets)
