"""
完整报告：训练曲线重绘、注意力导出、消融表、运行明细与 HTML
report 子命令与消融工作流的 write_report 节点共用
"""
import json
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import pandas as pd

from ..config import GridConfig, build_config
from ..data.corpus import Corpus
from ..errors import ArtifactError
from ..model.checkpoint import load_checkpoint
from ..training.pipeline import corpus_for_run, load_model
from ..utils.logger import report_logger as logger
from ..utils.report_server import write_html_reports
from .ablation import (arm_order, collect_eval_frames, write_ablation_report, write_attention_markdown,
                       write_runs_markdown)
from .artifacts import CHECKPOINT_FILE, CONFIG_FILE, EVAL_FILE, TRAIN_LOG_FILE, RunArtifacts, find_runs
from .report_writer import attention_rows, plot_history, write_attention_dump

REQUIRED_FILES = (CONFIG_FILE, CHECKPOINT_FILE, TRAIN_LOG_FILE, EVAL_FILE)
GRID_FILE = "grid.json"
REPORT_DIR = "report"


def discover_runs(artifacts_dir: str) -> List[RunArtifacts]:
    """找出目录下的运行并检查产物齐全，缺失时一次性列出"""
    runs = find_runs(artifacts_dir)
    if not runs:
        raise ArtifactError([Path(artifacts_dir) / "**" / CONFIG_FILE])
    missing = [p for r in runs for p in r.missing(REQUIRED_FILES)]
    if missing:
        raise ArtifactError(missing)
    return runs


def read_grid(artifacts_dir: str) -> Optional[GridConfig]:
    path = Path(artifacts_dir) / GRID_FILE
    if not path.exists():
        return None
    return build_config(GridConfig, json.loads(path.read_text(encoding="utf-8")))


def write_grid(out_dir: str, grid: GridConfig) -> str:
    path = Path(out_dir) / GRID_FILE
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(grid.model_dump(mode="json"), indent=2, sort_keys=True), encoding="utf-8")
    return str(path)


def run_summary(run: RunArtifacts) -> dict:
    cfg = run.read_config()
    _, meta = load_checkpoint(str(run.checkpoint))
    df = pd.read_csv(run.eval_report)
    return {
        "arm": cfg.get("arm", ""),
        "seed": cfg["run_config"]["seed"],
        "config_hash": cfg["config_hash"],
        "best_epoch": meta.get("extra", {}).get("best_epoch", 0),
        "metrics": {r["metric"]: (float(r["mean"]), float(r["std"])) for _, r in df.iterrows()},
    }


def explain_patients(run: RunArtifacts, corpus: Corpus, n_patients: int) -> List[dict]:
    """前 n 个测试患者每次就诊的跨就诊注意力"""
    model = load_model(str(run.checkpoint), corpus)
    explanations = []
    for patient in corpus.patients("test")[:n_patients]:
        for t in range(1, len(patient) + 1):
            explanations.append(model.explain_visit(patient, t))
    return explanations


def build_report(runs: Sequence[RunArtifacts], report_dir: str, corpus_dir: Optional[str] = None,
                 n_patients: int = 3, preferred_order: Optional[Sequence[str]] = None,
                 baseline: str = "Baseline (v1)", failed: Optional[Dict[str, str]] = None) -> Dict[str, str]:
    """
    对给定运行生成全部报告文件，返回 {角色: 路径}
    corpus_dir 覆盖运行配置中记录的语料目录
    """
    corpora: Dict[Tuple, Corpus] = {}
    summaries, rows_by_run = [], {}
    for run in runs:
        rc = run.run_config()
        if corpus_dir:
            rc = rc.model_copy(update={"corpus_dir": corpus_dir, "records": None, "ddi": None})
        key = (rc.corpus_dir, rc.records, rc.ddi, rc.split_seed)
        if key not in corpora:
            corpora[key] = corpus_for_run(rc)

        history = run.read_train_log()
        summary = run_summary(run)
        if history:
            plot_history(history, str(run.plot), title=summary["arm"] or summary["config_hash"])
        explanations = explain_patients(run, corpora[key], n_patients)
        write_attention_dump(str(run.attention), explanations)
        rows_by_run[f"{summary['arm'] or '-'} / seed {summary['seed']}"] = [
            row for e in explanations for row in attention_rows(e)]
        summaries.append(summary)

    long_df = collect_eval_frames(runs)
    order = arm_order(long_df, preferred_order)
    paths = write_ablation_report(report_dir, long_df, order, baseline, failed)
    paths["runs"] = write_runs_markdown(report_dir, runs, summaries)
    paths["attention"] = write_attention_markdown(report_dir, rows_by_run)
    paths["html"] = ",".join(write_html_reports(report_dir))
    logger.info(f"✅ 报告完成: {len(runs)} 个运行 -> {report_dir}")
    return paths


def report_from_artifacts(artifacts_dir: str, corpus_dir: Optional[str] = None,
                          n_patients: int = 3) -> Dict[str, str]:
    runs = discover_runs(artifacts_dir)
    grid = read_grid(artifacts_dir)
    return build_report(runs, str(Path(artifacts_dir) / REPORT_DIR), corpus_dir=corpus_dir, n_patients=n_patients,
                        preferred_order=[a.name for a in grid.arms] if grid else None,
                        baseline=grid.baseline_arm if grid else "Baseline (v1)")
