"""
消融汇总：读取已完成运行的 eval_report.csv，按分支聚合跨种子结果，
对基线做 Welch t 检验，标出指标逐种子完全相同的分支对，写 CSV / Markdown / HTML
"""
import itertools
import shutil
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..errors import ArtifactError
from ..evaluation.metrics import METRICS
from ..evaluation.significance import compare_arms
from ..utils.logger import report_logger as logger
from .artifacts import RunArtifacts
from .report_writer import ablation_markdown, ablation_table

LONG_FILE = "ablation_long.csv"
TABLE_FILE = "ablation.csv"
SIGNIFICANCE_FILE = "significance.csv"
MARKDOWN_FILE = "ablation.md"
RUNS_MARKDOWN_FILE = "runs.md"
ATTENTION_MARKDOWN_FILE = "attention.md"

PerSeed = Dict[str, Dict[str, List[float]]]


def collect_eval_frames(runs: Sequence[RunArtifacts]) -> pd.DataFrame:
    """拼接各运行的 eval_report.csv，按 (arm, seed, metric) 排序"""
    missing = [r.eval_report for r in runs if not r.eval_report.exists()]
    if missing:
        raise ArtifactError(missing)
    if not runs:
        return pd.DataFrame(columns=["arm", "seed", "metric", "mean", "std"])
    df = pd.concat([pd.read_csv(r.eval_report) for r in runs], ignore_index=True)
    df["arm"] = df["arm"].fillna("").astype(str)
    return df.sort_values(["arm", "seed", "metric"], kind="mergesort").reset_index(drop=True)


def arm_order(long_df: pd.DataFrame, preferred: Optional[Sequence[str]] = None) -> List[str]:
    """网格中的分支顺序优先，其余分支按名称排在后面"""
    present = sorted(set(long_df["arm"]))
    ordered = [a for a in (preferred or []) if a in present]
    return ordered + [a for a in present if a not in ordered]


def per_seed_values(long_df: pd.DataFrame) -> PerSeed:
    out: PerSeed = {}
    for (arm, metric), group in long_df.groupby(["arm", "metric"], sort=True):
        out.setdefault(arm, {})[metric] = group.sort_values("seed")["mean"].astype(float).tolist()
    return out


def identical_arm_pairs(per_seed: PerSeed, order: Sequence[str]) -> List[Tuple[str, str]]:
    """所有指标在每个种子上都逐位相等的分支对"""
    pairs = []
    for a, b in itertools.combinations(order, 2):
        va, vb = per_seed.get(a, {}), per_seed.get(b, {})
        if va and set(va) == set(vb) and all(
                len(va[m]) == len(vb[m]) and np.array_equal(np.asarray(va[m]), np.asarray(vb[m])) for m in va):
            pairs.append((a, b))
    return pairs


def write_ablation_report(report_dir: str, long_df: pd.DataFrame, order: Sequence[str], baseline: str,
                          failed: Optional[Dict[str, str]] = None) -> Dict[str, str]:
    """返回 {角色: 路径}"""
    root = Path(report_dir)
    root.mkdir(parents=True, exist_ok=True)
    table = ablation_table(long_df, order)
    per_seed = per_seed_values(long_df)
    significance = compare_arms({a: per_seed[a] for a in order if a in per_seed}, baseline, METRICS)
    pairs = identical_arm_pairs(per_seed, order)

    paths = {"long": str(root / LONG_FILE), "table": str(root / TABLE_FILE),
             "significance": str(root / SIGNIFICANCE_FILE), "markdown": str(root / MARKDOWN_FILE)}
    long_df.to_csv(paths["long"], index=False, float_format="%.10g")
    table.to_csv(paths["table"], index=False, float_format="%.10g")
    significance.to_csv(paths["significance"], index=False, float_format="%.10g")

    text = ablation_markdown(table, significance, failed)
    if pairs:
        text += "\n## Identical arms (all metrics equal at every seed)\n\n"
        text += "\n".join(f"- `{a}` == `{b}`" for a, b in pairs) + "\n"
    Path(paths["markdown"]).write_text(text, encoding="utf-8")
    logger.info(f"📝 消融报告: {len(table)} 个分支, {len(significance)} 条显著性检验, "
                f"{len(pairs)} 对相同分支 -> {root}")
    return paths


def write_runs_markdown(report_dir: str, runs: Sequence[RunArtifacts], summaries: Sequence[dict]) -> str:
    """
    每个运行一节：配置哈希、选中轮次、测试指标；训练曲线复制到 plots/ 下
    summaries 与 runs 一一对应，字段 arm / seed / config_hash / best_epoch / metrics
    """
    root = Path(report_dir)
    plots = root / "plots"
    lines = ["# Runs", ""]
    for run, s in zip(runs, summaries):
        lines += [f"## {s['arm'] or '-'} / seed {s['seed']}", "",
                  f"- config hash: `{s['config_hash']}`", f"- selected epoch: {s['best_epoch']}",
                  f"- artifacts: `{run.root}`", ""]
        lines += ["| metric | mean | std |", "|---|---|---|"]
        lines += [f"| {m} | {v[0]:.4f} | {v[1]:.4f} |" for m, v in s["metrics"].items()]
        if run.plot.exists():
            plots.mkdir(parents=True, exist_ok=True)
            name = f"{run.root.parent.name}_{run.root.name}.png"
            shutil.copyfile(run.plot, plots / name)
            lines += ["", f"![training curves](plots/{name})"]
        lines.append("")
    path = root / RUNS_MARKDOWN_FILE
    path.write_text("\n".join(lines), encoding="utf-8")
    return str(path)


def attention_summary(rows: List[dict], top: int = 3) -> List[str]:
    """每个 (患者, 就诊) 取头平均权重最高的 kv 位置"""
    if not rows:
        return []
    df = pd.DataFrame(rows)
    lines = []
    for (pid, visit), g in df.groupby(["patient_id", "visit"], sort=True):
        mean_w = g.groupby(["kv_position", "kv_visit", "modality"], sort=True)["weight"].mean()
        best = mean_w.sort_values(ascending=False, kind="mergesort").head(top)
        parts = [f"visit {kv}/{tag} {w:.3f}" for (_, kv, tag), w in best.items()]
        gate = g.drop_duplicates("head")["gate"].mean()
        lines.append(f"| {pid} | {visit} | {', '.join(parts)} | {gate:.3f} |")
    return lines


def write_attention_markdown(report_dir: str, rows_by_run: Dict[str, List[dict]]) -> str:
    lines = ["# Inter-visit attention", "",
             "Head-averaged attention of the current visit over the history slots "
             "(kv visit 0 is the null slot), with the mean λ gate.", ""]
    for name, rows in rows_by_run.items():
        lines += [f"## {name}", "", "| patient | visit | top kv slots | mean λ |", "|---|---|---|---|"]
        lines += attention_summary(rows)
        lines.append("")
    path = Path(report_dir) / ATTENTION_MARKDOWN_FILE
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines), encoding="utf-8")
    return str(path)
