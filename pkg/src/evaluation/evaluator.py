"""
Evaluator - 在某个划分上做逐就诊预测并汇总成 EvalReport
"""
from typing import Dict, List, Sequence

import numpy as np

from ..data.corpus import Corpus
from ..data.vocab import EncodedPatient
from ..utils.logger import evaluator_logger as logger
from .bootstrap import EvalReport, bootstrap_eval
from .metrics import VisitPrediction, compute_metrics

Predictions = Dict[str, List[VisitPrediction]]


def predictions_from_probs(patient: EncodedPatient, probs: np.ndarray, threshold: float) -> List[VisitPrediction]:
    return [VisitPrediction.from_probs(patient.patient_id, k, probs[k], visit.med, threshold)
            for k, visit in enumerate(patient.visits)]


class Evaluator:
    """模型在验证 / 测试集上的预测、指标与 bootstrap 报告"""

    def __init__(self, model, corpus: Corpus, threshold: float = 0.5):
        self.model = model
        self.corpus = corpus
        self.threshold = threshold

    def predict(self, patients: Sequence[EncodedPatient]) -> Predictions:
        return {p.patient_id: predictions_from_probs(p, self.model.predict_patient(p), self.threshold)
                for p in patients}

    def metrics(self, part: str = "validation") -> Dict[str, float]:
        preds = self.predict(self.corpus.patients(part))
        return compute_metrics([v for pid in sorted(preds) for v in preds[pid]], self.corpus.ddi)

    def evaluate(self, part: str = "test", seed: int = 1, iterations: int = 10,
                 fraction: float = 0.8) -> EvalReport:
        preds = self.predict(self.corpus.patients(part))
        report = bootstrap_eval(preds, self.corpus.ddi, seed, iterations, fraction)
        logger.info(f"📊 [{part}] Jaccard {report.mean('jaccard'):.4f} ± {report.metrics['jaccard'].std:.4f}, "
                    f"DDI {report.mean('ddi_rate'):.4f}, F1 {report.mean('f1'):.4f}, "
                    f"PRAUC {report.mean('prauc'):.4f}, Avg meds {report.mean('avg_meds'):.2f}")
        return report


def frequency_baseline(train: Sequence[EncodedPatient], patients: Sequence[EncodedPatient],
                       n_med: int, threshold: float = 0.5) -> Predictions:
    """
    预测训练集中最常见的 k 种用药，k = 训练就诊真值集合大小均值（四舍五入）。
    概率取训练集出现频率，供 PRAUC 使用。
    """
    counts = np.zeros(n_med)
    sizes = []
    for p in train:
        for v in p.visits:
            counts[v.med] += 1
            sizes.append(len(v.med))
    n_visits = max(len(sizes), 1)
    k = int(round(float(np.mean(sizes)))) if sizes else 0
    order = np.lexsort((np.arange(n_med), -counts))
    top = frozenset(order[:k].tolist())
    freq = counts / n_visits
    out: Predictions = {}
    for p in patients:
        out[p.patient_id] = [VisitPrediction(p.patient_id, k_, freq.copy(), frozenset(int(m) for m in v.med), top)
                             for k_, v in enumerate(p.visits)]
    return out
