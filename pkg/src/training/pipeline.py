"""
单次运行流水线：建模 -> 训练 -> 保存检查点 -> 测试集 bootstrap 评估 -> 写产物
命令行 train/eval 与消融工作流的 run_arm 节点共用
"""
from dataclasses import asdict, dataclass
from typing import Optional

from ..config import RunConfig
from ..data.corpus import Corpus, load_corpus
from ..errors import ConfigError
from ..evaluation.bootstrap import EvalReport
from ..evaluation.evaluator import Evaluator
from ..model.checkpoint import load_checkpoint, save_checkpoint
from ..model.graphdiffmed import GraphDiffMed, ModelHyper
from ..reporting.artifacts import RunArtifacts
from ..reporting.report_writer import plot_history, write_eval_csv
from ..utils.logger import trainer_logger as logger
from .trainer import Trainer, TrainResult


@dataclass
class RunOutcome:
    artifacts: RunArtifacts
    train: TrainResult
    report: EvalReport


def train_run(run: RunConfig, corpus: Corpus, artifacts: RunArtifacts, arm: str = "") -> TrainResult:
    artifacts.ensure()
    artifacts.write_config(run, arm)
    model = GraphDiffMed.create(run, corpus.vocab, corpus.ddi, corpus.causal)
    result = Trainer(model, corpus, run).fit(log_path=str(artifacts.train_log))
    save_checkpoint(str(artifacts.checkpoint), model.state, run_config=run.model_dump(mode="json"),
                    extra={"arm": arm, "config_hash": run.config_hash(), "best_epoch": result.best_epoch,
                           "best_val_jaccard": result.best_val_jaccard})
    if result.history:
        plot_history([asdict(h) for h in result.history], str(artifacts.plot), title=arm or run.config_hash())
    return result


def load_model(checkpoint_path: str, corpus: Corpus) -> GraphDiffMed:
    """检查点 + 语料的图数据还原模型；词表规模必须一致"""
    state, _ = load_checkpoint(checkpoint_path)
    expected = ModelHyper.model_validate({**state.hyper.model_dump(), "n_diag": corpus.vocab.n_diag,
                                          "n_proc": corpus.vocab.n_proc, "n_med": corpus.vocab.n_med})
    if expected != state.hyper:
        raise ConfigError(f"{checkpoint_path}: vocabulary sizes "
                          f"{state.hyper.n_diag}/{state.hyper.n_proc}/{state.hyper.n_med} do not match the corpus "
                          f"{corpus.vocab.n_diag}/{corpus.vocab.n_proc}/{corpus.vocab.n_med}")
    return GraphDiffMed(state, corpus.ddi, corpus.causal)


def evaluate_run(run: RunConfig, corpus: Corpus, artifacts: RunArtifacts, arm: str = "",
                 model: Optional[GraphDiffMed] = None, part: str = "test") -> EvalReport:
    if model is None:
        model = load_model(str(artifacts.checkpoint), corpus)
    evaluator = Evaluator(model, corpus, threshold=run.loss.threshold)
    report = evaluator.evaluate(part, seed=run.seed, iterations=run.bootstrap_iterations,
                                fraction=run.bootstrap_fraction)
    write_eval_csv(str(artifacts.eval_report), report, arm=arm, seed=run.seed)
    return report


def train_and_evaluate(run: RunConfig, corpus: Corpus, artifacts: RunArtifacts, arm: str = "") -> RunOutcome:
    logger.info(f"🚀 运行 {arm or '-'} seed={run.seed} hash={run.config_hash()} -> {artifacts.root}")
    result = train_run(run, corpus, artifacts, arm)
    report = evaluate_run(run, corpus, artifacts, arm)
    return RunOutcome(artifacts=artifacts, train=result, report=report)


def corpus_for_run(run: RunConfig) -> Corpus:
    """按运行配置中的数据路径加载语料"""
    return load_corpus(run.corpus_dir, run.records, run.ddi, seed=run.split_seed)
