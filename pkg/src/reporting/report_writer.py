"""
报告输出：评估 CSV、消融表（CSV + Markdown）、显著性表、训练曲线图、注意力导出
"""
import json
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd
from matplotlib.figure import Figure

from ..evaluation.bootstrap import EvalReport
from ..utils.logger import report_logger as logger

# (指标键, 表头)；列顺序与消融表一致
TABLE_COLUMNS = [("jaccard", "Jaccard"), ("ddi_rate", "DDI"), ("f1", "F1"),
                 ("prauc", "PRAUC"), ("avg_meds", "Avg #Meds")]


def write_eval_csv(path: str, report: EvalReport, arm: str = "", seed: int = 0) -> pd.DataFrame:
    df = report.to_frame(arm, seed)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, float_format="%.10g")
    return df


def read_eval_csv(path: str) -> pd.DataFrame:
    return pd.read_csv(path)


def ablation_table(long_df: pd.DataFrame, arm_order: Sequence[str]) -> pd.DataFrame:
    """
    long_df: (arm, seed, metric, mean, std) 每个种子的 bootstrap 均值。
    返回每个分支一行，每个指标取种子间 mean 与 std (ddof=0)。
    """
    rows = []
    for arm in arm_order:
        sub = long_df[long_df["arm"] == arm]
        if sub.empty:
            continue
        row = {"arm": arm, "n_seeds": int(sub["seed"].nunique())}
        for key, _ in TABLE_COLUMNS:
            values = sub[sub["metric"] == key].sort_values("seed")["mean"].to_numpy(dtype=np.float64)
            row[f"{key}_mean"] = float(values.mean()) if values.size else float("nan")
            row[f"{key}_std"] = float(values.std(ddof=0)) if values.size else float("nan")
        rows.append(row)
    columns = ["arm", "n_seeds"] + [f"{k}_{s}" for k, _ in TABLE_COLUMNS for s in ("mean", "std")]
    return pd.DataFrame(rows, columns=columns)


def _markdown_table(header: List[str], rows: Iterable[List[str]]) -> str:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join(["---"] * len(header)) + "|"]
    lines += ["| " + " | ".join(r) + " |" for r in rows]
    return "\n".join(lines)


def ablation_markdown(table: pd.DataFrame, significance: Optional[pd.DataFrame] = None,
                      failed: Optional[Dict[str, str]] = None, title: str = "Ablation") -> str:
    parts = [f"# {title}", ""]
    header = ["Variant"] + [label for _, label in TABLE_COLUMNS]
    rows = []
    for _, r in table.iterrows():
        rows.append([str(r["arm"])] + [f"{r[f'{k}_mean']:.4f} ± {r[f'{k}_std']:.4f}" for k, _ in TABLE_COLUMNS])
    parts.append(_markdown_table(header, rows))

    if significance is not None and not significance.empty:
        parts += ["", "## Significance (Welch t-test vs baseline, per-seed values)", ""]
        sig_rows = []
        for _, r in significance.iterrows():
            flag = "identical" if r["identical"] else ("zero variance" if r["degenerate"] else "")
            sig_rows.append([str(r["arm"]), str(r["metric"]), f"{r['statistic']:.4f}", f"{r['p_value']:.4g}",
                             f"{r['df']:.3f}", flag])
        parts.append(_markdown_table(["Variant", "Metric", "t", "p", "df", "note"], sig_rows))

    if failed:
        parts += ["", "## Failed runs", ""]
        parts += [f"- `{name}`: {msg}" for name, msg in sorted(failed.items())]
    return "\n".join(parts) + "\n"


def plot_history(history: List[dict], path: str, title: str = "") -> None:
    """训练损失与验证指标随轮次变化；不经过 pyplot，可在并行 Worker 中调用"""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    fig = Figure(figsize=(10, 4))
    ax_loss, ax_val = fig.subplots(1, 2)
    epochs = [h["epoch"] for h in history]
    ax_loss.plot(epochs, [h["train_loss"] for h in history], marker="o", label="train loss")
    ax_loss.plot(epochs, [h["train_bce"] for h in history], marker="s", label="train BCE / visit")
    ax_loss.set_xlabel("epoch")
    ax_loss.legend()
    ax_val.plot(epochs, [h["val_jaccard"] for h in history], marker="o", label="val Jaccard")
    ax_val.plot(epochs, [h["val_f1"] for h in history], marker="^", label="val F1")
    ax_val.plot(epochs, [h["val_ddi_rate"] for h in history], marker="s", label="val DDI rate")
    ax_val.set_xlabel("epoch")
    ax_val.legend()
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata={"Software": None})


def attention_rows(explanation: dict) -> List[dict]:
    """一次就诊的跨就诊注意力展开为 (patient, visit, head, kv 位置, 模态, 权重) 行"""
    rows = []
    weights = explanation["weights"]
    gates = explanation["gates"]
    # 第 2i 与 2i+1 行是第 i 个差分头的两张注意力图，共用门控 λ_i
    for head in range(weights.shape[0]):
        for pos, (kv_visit, tag) in enumerate(explanation["layout"]):
            rows.append({
                "patient_id": explanation["patient_id"],
                "visit": explanation["visit"],
                "head": head,
                "kv_position": pos,
                "kv_visit": kv_visit + 1 if kv_visit >= 0 else 0,
                "modality": tag,
                "weight": float(weights[head, pos]),
                "gate": float(gates[head // 2]),
            })
    return rows


def write_attention_dump(path: str, explanations: Iterable[dict]) -> int:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with open(path, "w", encoding="utf-8") as f:
        for explanation in explanations:
            for row in attention_rows(explanation):
                f.write(json.dumps(row, sort_keys=True) + "\n")
                n += 1
    logger.info(f"🔎 注意力导出 {n} 行: {path}")
    return n
