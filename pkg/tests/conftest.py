"""
共享测试夹具：小规模合成语料、微型运行配置、模型工厂
"""
import numpy as np
import pytest

from src.config import GeneratorConfig, LossConfig, RunConfig
from src.data.corpus import corpus_from_synthetic
from src.data.synthetic import generate_synthetic
from src.model.graphdiffmed import GraphDiffMed


# =============================================================================
# 语料
# =============================================================================

@pytest.fixture(scope="session")
def small_gen_cfg():
    return GeneratorConfig(n_patients=30, n_diag=12, n_proc=6, n_med=10, n_lab_tests=4,
                           max_diags_per_visit=3, n_ddi_pairs=5)


@pytest.fixture(scope="session")
def synthetic(small_gen_cfg):
    return generate_synthetic(small_gen_cfg, seed=7)


@pytest.fixture(scope="session")
def corpus(synthetic):
    return corpus_from_synthetic(synthetic)


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)


# =============================================================================
# 模型
# =============================================================================

def tiny_run(**overrides) -> RunConfig:
    """d=4, H=2, 无 dropout，训练轮数很少"""
    values = dict(seed=3, d=4, n_heads=2, dropout=0.0, epochs=1, bootstrap_iterations=3,
                  loss=LossConfig())
    values.update(overrides)
    return RunConfig(**values)


@pytest.fixture
def run_factory():
    return tiny_run


@pytest.fixture
def model_factory(corpus):
    def make(**overrides) -> GraphDiffMed:
        return GraphDiffMed.create(tiny_run(**overrides), corpus.vocab, corpus.ddi, corpus.causal)
    return make


@pytest.fixture
def out_dir(tmp_path):
    return tmp_path / "out"
