"""
GraphDiffMed 模型测试：信息泄漏、图偏置开关、端到端梯度、检查点
"""
import numpy as np
import pytest

from src.autodiff import Tensor, grad_check_params
from src.config import LossConfig
from src.data.corpus import corpus_from_synthetic
from src.data.graphs import CausalEffectMatrices, DdiGraph
from src.data.synthetic import generate_synthetic
from src.data.vocab import EncodedVisit
from src.errors import CheckpointError, ConfigError, ShapeError
from src.model.checkpoint import load_checkpoint, save_checkpoint
from src.model.diffattn import DiffAttnV1Params
from src.model.graphdiffmed import (GraphDiffMed, ModalityConfig, ModelHyper, causal_review,
                                    predict_logits)
from src.training.trainer import Trainer


def _random_visit(gen, vocab, like: EncodedVisit) -> EncodedVisit:
    def pick(n, k):
        return np.sort(gen.choice(n, size=k, replace=False)).astype(np.int64)
    return EncodedVisit(diag=pick(vocab.n_diag, 2), proc=pick(vocab.n_proc, 1), med=pick(vocab.n_med, 3),
                        labs=gen.uniform(size=(2, 2)), gender=1 - like.gender, age=like.age + 7.0)


def _probs(model, patient, k):
    return model.forward_patient(patient)[k].probs.data


# =============================================================================
# 结构
# =============================================================================

class TestStructure:

    def test_modality_names(self):
        assert ModalityConfig.from_name("LGY").n_extra == 3
        assert ModalityConfig.from_name("-").name == "base"
        with pytest.raises(ConfigError):
            ModalityConfig.from_name("XYZ")

    def test_initial_probabilities_are_not_saturated(self, model_factory, corpus):
        model = model_factory(modality="LGY", causal_eta=0.0)
        for patient in corpus.patients("test"):
            probs = model.predict_patient(patient)
            assert probs.shape == (len(patient), corpus.vocab.n_med)
            assert ((probs > 0.05) & (probs < 0.95)).all()

    def test_same_seed_same_parameters(self, model_factory):
        a, b = model_factory(seed=9), model_factory(seed=9)
        for (na, ta), (nb, tb) in zip(a.state.named_parameters(), b.state.named_parameters()):
            assert na == nb
            np.testing.assert_array_equal(ta.data, tb.data)

    def test_v1_arm_uses_scalar_gates(self, model_factory):
        model = model_factory(attn_variant="v1", graph_bias=False)
        assert isinstance(model.state.inter, DiffAttnV1Params)
        assert isinstance(model.state.intra, DiffAttnV1Params)

    def test_lab_channel_has_its_own_gru(self, model_factory):
        assert set(model_factory(modality="L").state.grus) == {"diag", "proc", "med", "lab"}
        assert set(model_factory().state.grus) == {"diag", "proc", "med"}

    def test_hyper_rejects_bias_on_v1(self):
        with pytest.raises(ValueError):
            ModelHyper(n_diag=2, n_proc=2, n_med=2, d=4, n_heads=2, attn_variant="v1", graph_bias=True)

    def test_visit_index_range(self, model_factory, corpus):
        patient = corpus.patients("test")[0]
        with pytest.raises(ShapeError):
            model_factory().model_forward(patient, len(patient) + 1)


# =============================================================================
# 前向语义
# =============================================================================

class TestForward:

    def test_model_forward_matches_full_sequence(self, model_factory, corpus):
        model = model_factory(modality="LGY")
        patient = max(corpus.patients("train"), key=len)
        full = model.forward_patient(patient)
        for t in range(1, len(patient) + 1):
            np.testing.assert_array_equal(model.model_forward(patient, t), full[t - 1].probs.data.reshape(-1))

    def test_no_leakage_from_current_meds_or_future_visits(self, small_gen_cfg, run_factory):
        cfg = small_gen_cfg.model_copy(update={"n_patients": 60})
        corpus = corpus_from_synthetic(generate_synthetic(cfg, seed=13))
        model = GraphDiffMed.create(run_factory(modality="LGY"), corpus.vocab, corpus.ddi, corpus.causal)
        gen = np.random.default_rng(17)
        patients = [p for part in ("train", "validation", "test") for p in corpus.patients(part)]
        assert len(patients) >= 50
        for patient in patients:
            k = int(gen.integers(0, len(patient)))
            before = _probs(model, patient, k)

            visit = patient.visits[k]
            other_meds = np.setdiff1d(np.arange(corpus.vocab.n_med), visit.med)[:2]
            perturbed = patient.replace_visit(k, EncodedVisit(visit.diag, visit.proc, other_meds, visit.labs,
                                                              visit.gender, visit.age))
            for j in range(k + 1, len(patient)):
                perturbed = perturbed.replace_visit(j, _random_visit(gen, corpus.vocab, patient.visits[j]))
            np.testing.assert_array_equal(_probs(model, perturbed, k), before)

    def test_previous_meds_do_change_the_prediction(self, model_factory, corpus):
        model = model_factory()
        patient = next(p for p in corpus.patients("train") if len(p) >= 2)
        visit = patient.visits[0]
        other = np.setdiff1d(np.arange(corpus.vocab.n_med), visit.med)[:3]
        perturbed = patient.replace_visit(0, EncodedVisit(visit.diag, visit.proc, other, visit.labs,
                                                          visit.gender, visit.age))
        assert not np.array_equal(_probs(model, patient, 1), _probs(model, perturbed, 1))

    def test_zero_lambda_graph_equals_bias_off(self, model_factory, corpus):
        on = model_factory(graph_bias=True, lambda_graph=0.0)
        off = model_factory(graph_bias=False)
        for patient in corpus.patients("test"):
            np.testing.assert_array_equal(on.predict_patient(patient), off.predict_patient(patient))

    def test_all_zero_bias_equals_bias_off(self, run_factory, corpus):
        empty = DdiGraph.empty(corpus.vocab.n_med)
        on = GraphDiffMed.create(run_factory(graph_bias=True, lambda_graph=5.0), corpus.vocab, empty, corpus.causal)
        off = GraphDiffMed.create(run_factory(graph_bias=False), corpus.vocab, empty, corpus.causal)
        patients = [p for p in corpus.patients("test") if len(p) >= 2]
        assert patients
        for patient in patients:
            np.testing.assert_array_equal(on.predict_patient(patient), off.predict_patient(patient))

    def test_graph_bias_changes_outputs(self, model_factory, corpus):
        on = model_factory(graph_bias=True, lambda_graph=5.0)
        off = model_factory(graph_bias=False)
        patients = [p for part in ("train", "validation", "test") for p in corpus.patients(part)]
        assert any(not np.array_equal(on.predict_patient(p), off.predict_patient(p)) for p in patients)

    def test_explain_visit(self, model_factory, corpus):
        model = model_factory(modality="L")
        patient = max(corpus.patients("test"), key=len)
        first = model.explain_visit(patient, 1)
        assert first["layout"] == [(-1, "null")]
        last = model.explain_visit(patient, len(patient))
        assert last["weights"].shape == (4, 4 * (len(patient) - 1))
        np.testing.assert_allclose(last["weights"].sum(axis=1), 1.0, atol=1e-12)
        assert last["gates"].shape == (2,)


class TestHead:

    def test_predict_logits(self, rng):
        r, w, b = rng.normal(size=(1, 3)), rng.normal(size=(3, 2)), rng.normal(size=(1, 2))
        z = predict_logits(Tensor(r), Tensor(w), Tensor(b))
        np.testing.assert_allclose(z.data, np.maximum(r, 0) @ w + b, atol=1e-15)

    def test_causal_review_takes_row_maxima(self):
        causal = CausalEffectMatrices(np.array([[0.1, 0.0], [0.4, 0.2]]), np.array([[0.0, 0.3]]))
        z = causal_review(Tensor(np.zeros((1, 2))), [0, 1], [0], causal, eta=2.0)
        np.testing.assert_allclose(z.data, [[0.8, 1.0]])

    def test_causal_review_disabled(self):
        z = Tensor(np.ones((1, 2)))
        causal = CausalEffectMatrices(np.ones((1, 2)), np.ones((1, 2)))
        assert causal_review(z, [0], [0], causal, eta=0.0) is z


# =============================================================================
# 端到端梯度
# =============================================================================

class TestEndToEndGradient:

    @pytest.mark.parametrize("overrides", [
        {"modality": "base"},
        {"modality": "LGY", "lambda_graph": 0.5},
        {"attn_variant": "v1", "graph_bias": False},
    ])
    def test_full_loss_matches_central_differences(self, corpus, run_factory, overrides):
        run = run_factory(loss=LossConfig(alpha=0.05), **overrides)
        model = GraphDiffMed.create(run, corpus.vocab, corpus.ddi, corpus.causal)
        patient = next(p for p in corpus.patients("train") if len(p) >= 2).truncated(2)
        trainer = Trainer(model, corpus, run)

        def loss_fn():
            return trainer.patient_loss(patient, training=False)[0]
        assert grad_check_params(loss_fn, model.parameters(), h=1e-5) < 1e-4


# =============================================================================
# 检查点
# =============================================================================

class TestCheckpoint:

    def test_save_then_load_predicts_identically(self, tmp_path, model_factory, corpus):
        model = model_factory(modality="GY")
        path = str(tmp_path / "checkpoint.npz")
        save_checkpoint(path, model.state, run_config={"seed": 3}, extra={"best_epoch": 2})
        state, meta = load_checkpoint(path)
        assert meta["extra"]["best_epoch"] == 2
        assert state.hyper == model.hyper
        restored = GraphDiffMed(state, corpus.ddi, corpus.causal)
        for patient in corpus.patients("test"):
            np.testing.assert_array_equal(restored.predict_patient(patient), model.predict_patient(patient))

    def test_missing_file(self, tmp_path):
        with pytest.raises(CheckpointError):
            load_checkpoint(str(tmp_path / "nope.npz"))

    def test_corrupted_file(self, tmp_path):
        path = tmp_path / "checkpoint.npz"
        path.write_bytes(b"not a zip archive at all")
        with pytest.raises(CheckpointError):
            load_checkpoint(str(path))

    def test_missing_parameter(self, tmp_path, model_factory):
        model = model_factory()
        path = str(tmp_path / "checkpoint.npz")
        save_checkpoint(path, model.state)
        with np.load(path) as data:
            arrays = {k: data[k] for k in data.files if k != "head.b_out"}
        with open(path, "wb") as f:
            np.savez(f, **arrays)
        with pytest.raises(CheckpointError):
            load_checkpoint(path)
