"""
种子级显著性检验：双侧 Welch t 检验
"""
import math
from dataclasses import asdict, dataclass
from typing import Dict, List, Sequence

import numpy as np
import pandas as pd
from scipy import stats

from ..errors import EvaluationError


@dataclass(frozen=True)
class SignificanceResult:
    statistic: float
    p_value: float
    df: float
    degenerate: bool = False     # 两组组内方差均为 0
    identical: bool = False      # 两组样本逐元素相等


def welch_df(a: np.ndarray, b: np.ndarray) -> float:
    va, vb = a.var(ddof=1) / a.size, b.var(ddof=1) / b.size
    denom = va ** 2 / (a.size - 1) + vb ** 2 / (b.size - 1)
    return float((va + vb) ** 2 / denom) if denom > 0 else float(a.size + b.size - 2)


def significance_test(values_a: Sequence[float], values_b: Sequence[float]) -> SignificanceResult:
    a = np.asarray(values_a, dtype=np.float64)
    b = np.asarray(values_b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise EvaluationError(f"Welch test needs at least 2 values per group, got {a.size} and {b.size}")
    identical = a.shape == b.shape and bool(np.array_equal(a, b))

    if a.var() == 0 and b.var() == 0:
        diff = a.mean() - b.mean()
        if diff == 0:
            return SignificanceResult(0.0, 1.0, float(a.size + b.size - 2), degenerate=True, identical=identical)
        return SignificanceResult(math.copysign(math.inf, diff), 0.0, float(a.size + b.size - 2),
                                  degenerate=True, identical=identical)

    res = stats.ttest_ind(a, b, equal_var=False)
    return SignificanceResult(float(res.statistic), float(res.pvalue), welch_df(a, b), identical=identical)


def compare_arms(per_seed: Dict[str, Dict[str, List[float]]], baseline: str,
                 metrics: Sequence[str]) -> pd.DataFrame:
    """每个分支对基线，每个指标一行"""
    columns = ["arm", "baseline", "metric", "statistic", "p_value", "df", "degenerate", "identical"]
    if baseline not in per_seed:
        return pd.DataFrame(columns=columns)
    rows = []
    for arm, values in per_seed.items():
        if arm == baseline:
            continue
        for metric in metrics:
            a, b = values.get(metric, []), per_seed[baseline].get(metric, [])
            if len(a) < 2 or len(b) < 2:
                continue
            res = significance_test(a, b)
            rows.append({"arm": arm, "baseline": baseline, "metric": metric, **asdict(res)})
    return pd.DataFrame(rows, columns=columns)
