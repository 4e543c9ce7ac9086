"""
Bootstrap 评估、Welch 显著性检验、频率基线与 Evaluator
"""
import math

import numpy as np
import pandas as pd
import pytest

from src.data.graphs import DdiGraph
from src.errors import EvaluationError
from src.evaluation import (Evaluator, VisitPrediction, bootstrap_eval, bootstrap_subsets, compare_arms,
                            compute_metrics, frequency_baseline, significance_test)
from src.evaluation.significance import welch_df


def _visit(pid, k, probs, true):
    return VisitPrediction.from_probs(pid, k, np.asarray(probs, dtype=float), true)


# =============================================================================
# Bootstrap
# =============================================================================

class TestBootstrap:

    def test_subsets_are_deterministic_and_sized(self):
        ids = [f"p{i:02d}" for i in range(11)]
        a = bootstrap_subsets(ids, seed=4, iterations=6)
        b = bootstrap_subsets(list(reversed(ids)), seed=4, iterations=6)
        assert a == b
        assert len(a) == 6
        for subset in a:
            assert len(subset) == 8
            assert subset == sorted(set(subset))
            assert set(subset) <= set(ids)

    def test_seed_changes_subsets(self):
        ids = [f"p{i:02d}" for i in range(20)]
        assert bootstrap_subsets(ids, seed=1) != bootstrap_subsets(ids, seed=2)

    def test_too_few_patients(self):
        with pytest.raises(EvaluationError):
            bootstrap_subsets(["only"], seed=1)

    def test_replays_subsets(self):
        ddi = DdiGraph.from_pairs(3, [(0, 1)])
        preds = {
            "a": [_visit("a", 0, [0.9, 0.8, 0.1], [0, 1])],
            "b": [_visit("b", 0, [0.9, 0.1, 0.1], [0, 2]), _visit("b", 1, [0.1, 0.1, 0.7], [2])],
            "c": [_visit("c", 0, [0.2, 0.6, 0.6], [1])],
        }
        report = bootstrap_eval(preds, ddi, seed=5, iterations=4, fraction=0.67)
        assert report.n_patients == 3 and report.n_visits == 4
        expected = [compute_metrics([v for pid in s for v in preds[pid]], ddi)["jaccard"] for s in report.subsets]
        assert all(len(s) == 2 for s in report.subsets)
        assert report.metrics["jaccard"].values == pytest.approx(tuple(expected))
        assert report.mean("jaccard") == pytest.approx(np.mean(expected))
        assert report.metrics["jaccard"].std == pytest.approx(np.std(expected, ddof=0))
        assert report.point == compute_metrics([v for pid in "abc" for v in preds[pid]], ddi)

    def test_constant_statistic_has_zero_std(self):
        ddi = DdiGraph.empty(2)
        preds = {f"p{i}": [_visit(f"p{i}", 0, [0.9, 0.1], [0])] for i in range(5)}
        report = bootstrap_eval(preds, ddi, seed=1, iterations=5)
        assert report.metrics["jaccard"].mean == 1.0
        assert report.metrics["jaccard"].std == 0.0

    def test_report_frame(self):
        preds = {f"p{i}": [_visit(f"p{i}", 0, [0.9, 0.1], [0])] for i in range(3)}
        frame = bootstrap_eval(preds, DdiGraph.empty(2), seed=1, iterations=2).to_frame("dual_v2", 3)
        assert list(frame.columns) == ["arm", "seed", "metric", "mean", "std"]
        assert list(frame["metric"]) == ["jaccard", "f1", "prauc", "ddi_rate", "avg_meds"]
        assert (frame["seed"] == 3).all()


# =============================================================================
# 显著性检验
# =============================================================================

class TestSignificance:

    def test_welch_fixture(self):
        res = significance_test([1, 2, 3, 4, 5], [2, 4, 6, 8, 10])
        assert res.statistic == pytest.approx(-1.8973666, abs=1e-6)
        assert res.df == pytest.approx(5.882352941, abs=1e-8)
        assert 0.05 < res.p_value < 0.2
        assert not res.degenerate and not res.identical

    def test_welch_df_helper(self):
        assert welch_df(np.array([1.0, 2, 3, 4, 5]), np.array([2.0, 4, 6, 8, 10])) == pytest.approx(100 / 17)

    def test_identical_samples(self):
        res = significance_test([0.4, 0.5, 0.6], [0.4, 0.5, 0.6])
        assert res.identical
        assert res.p_value == pytest.approx(1.0)

    def test_zero_variance_equal_means(self):
        res = significance_test([0.3] * 4, [0.3] * 4)
        assert res.p_value == 1.0 and res.degenerate and res.identical

    def test_zero_variance_different_means(self):
        res = significance_test([1.0] * 5, [2.0] * 5)
        assert res.p_value == 0.0
        assert res.degenerate and not res.identical
        assert res.statistic == -math.inf

    def test_needs_two_values(self):
        with pytest.raises(EvaluationError):
            significance_test([1.0], [1.0, 2.0])

    def test_compare_arms(self):
        per_seed = {
            "dual_v2": {"jaccard": [0.5, 0.52, 0.51], "f1": [0.6, 0.61, 0.62]},
            "lambda_graph_0": {"jaccard": [0.5, 0.52, 0.51], "f1": [0.5, 0.52, 0.53]},
            "single_seed": {"jaccard": [0.4]},
        }
        frame = compare_arms(per_seed, "dual_v2", ["jaccard", "f1"])
        assert set(frame["arm"]) == {"lambda_graph_0"}
        row = frame[frame["metric"] == "jaccard"].iloc[0]
        assert bool(row["identical"])
        assert compare_arms(per_seed, "missing", ["jaccard"]).empty


# =============================================================================
# 基线与 Evaluator
# =============================================================================

class TestEvaluator:

    def test_frequency_baseline(self, corpus):
        train = corpus.patients("train")
        preds = frequency_baseline(train, corpus.patients("test"), corpus.vocab.n_med)
        sizes = [len(v.med) for p in train for v in p.visits]
        counts = np.zeros(corpus.vocab.n_med)
        for p in train:
            for v in p.visits:
                counts[v.med] += 1
        k = int(round(float(np.mean(sizes))))
        for visits in preds.values():
            for v in visits:
                assert len(v.predicted) == k
                assert min(counts[list(v.predicted)]) >= np.sort(counts)[::-1][k - 1]
                np.testing.assert_allclose(v.probs, counts / len(sizes))

    def test_evaluator_is_deterministic(self, model_factory, corpus):
        evaluator = Evaluator(model_factory(), corpus)
        a = evaluator.evaluate("test", seed=2, iterations=3)
        b = evaluator.evaluate("test", seed=2, iterations=3)
        pd.testing.assert_frame_equal(a.to_frame(), b.to_frame())
        assert a.n_patients == len(corpus.patients("test"))

    def test_metrics_cover_all_visits(self, model_factory, corpus):
        metrics = Evaluator(model_factory(), corpus).metrics("validation")
        assert set(metrics) == {"jaccard", "f1", "prauc", "ddi_rate", "avg_meds"}
        assert 0.0 <= metrics["jaccard"] <= metrics["f1"] + 1e-12 <= 1.0 + 1e-12
