"""
合成语料生成器测试
"""
import json

import numpy as np
import pytest
from pydantic import ValidationError

from src.config import GeneratorConfig
from src.data.corpus import load_corpus
from src.data.synthetic import CORPUS_FILES, generate_synthetic, med_code, write_corpus


def _diag_index(code: str) -> int:
    return int(code[1:])


class TestGenerator:

    def test_default_vocabulary_sizes(self):
        corpus = generate_synthetic(GeneratorConfig(), seed=1)
        assert corpus.manifest["vocab_sizes"]["diag"] == 40
        assert corpus.manifest["vocab_sizes"]["proc"] == 20
        assert corpus.manifest["vocab_sizes"]["med"] == 25
        assert corpus.manifest["n_patients"] == 200

    def test_same_seed_same_corpus(self, small_gen_cfg):
        a = generate_synthetic(small_gen_cfg, seed=11)
        b = generate_synthetic(small_gen_cfg, seed=11)
        assert a.records == b.records
        np.testing.assert_array_equal(a.ddi.adjacency, b.ddi.adjacency)
        assert a.manifest == b.manifest

    def test_different_seed_different_corpus(self, small_gen_cfg):
        assert generate_synthetic(small_gen_cfg, seed=1).records != generate_synthetic(small_gen_cfg, seed=2).records

    def test_every_patient_has_at_least_two_visits(self, synthetic):
        assert all(len(r.visits) >= 2 for r in synthetic.records)

    def test_noiseless_meds_follow_diagnoses(self, small_gen_cfg):
        cfg = small_gen_cfg.model_copy(update={"noise_rate": 0.0, "confounder_rate": 0.0})
        corpus = generate_synthetic(cfg, seed=5)
        for record in corpus.records:
            for visit in record.visits:
                implied = corpus.planted.implied_meds(_diag_index(c) for c in visit.diag)
                assert set(visit.med) == {med_code(m) for m in implied}

    def test_planted_pair_is_a_ddi_edge(self, synthetic):
        i, j = synthetic.planted.planted_pair
        assert synthetic.ddi.adjacency[i, j] == 1.0
        assert len(synthetic.ddi.edges()) == 5

    def test_causal_effects_are_probabilities(self, synthetic):
        for m in (synthetic.causal.diag_to_med, synthetic.causal.proc_to_med):
            assert ((m >= 0) & (m <= 1)).all()

    def test_invalid_config(self):
        with pytest.raises(ValidationError):
            GeneratorConfig(n_med=4, n_ddi_pairs=10)


class TestCorpusFiles:

    def test_write_then_load(self, tmp_path, synthetic):
        paths = write_corpus(str(tmp_path / "corpus"), synthetic)
        assert set(paths) == set(CORPUS_FILES)
        corpus = load_corpus(str(tmp_path / "corpus"))
        assert corpus.split == synthetic.split
        assert corpus.vocab.med == synthetic.vocab.med
        np.testing.assert_array_equal(corpus.ddi.adjacency, synthetic.ddi.adjacency)
        np.testing.assert_allclose(corpus.causal.diag_to_med, synthetic.causal.diag_to_med)

    def test_manifest_on_disk(self, tmp_path, synthetic):
        paths = write_corpus(str(tmp_path / "corpus"), synthetic)
        manifest = json.loads(open(paths["manifest"], encoding="utf-8").read())
        assert manifest["planted_ddi_pair"] == synthetic.manifest["planted_ddi_pair"]
        assert 0.0 <= manifest["ground_truth_ddi_rate"] <= 1.0
