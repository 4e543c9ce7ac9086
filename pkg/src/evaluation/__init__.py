# Evaluation module
from .metrics import (METRICS, VisitPrediction, avg_meds, compute_metrics, ddi_rate, f1_set, jaccard,
                      prauc_sample)
from .bootstrap import EvalReport, MetricSummary, bootstrap_eval, bootstrap_subsets
from .significance import SignificanceResult, compare_arms, significance_test
from .evaluator import Evaluator, frequency_baseline, predictions_from_probs
