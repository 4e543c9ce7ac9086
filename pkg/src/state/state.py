from typing import TypedDict, List, Dict, Any
import operator
from typing import Annotated


class ArmTask(TypedDict):
    """消融网格中的一个 (分支, 种子) 任务"""
    arm: str
    arm_index: int
    seed: int
    run_config: Dict[str, Any]  # RunConfig.model_dump(mode="json")
    run_dir: str


class ArmResult(TypedDict):
    """单个任务的结果"""
    arm: str
    arm_index: int
    seed: int
    status: str  # "ok" | "failed"
    run_dir: str
    config_hash: str
    best_epoch: int
    metrics: Dict[str, float]  # bootstrap 均值
    stds: Dict[str, float]
    error: str


class OverallState(TypedDict):
    """全局状态"""
    # GridConfig.model_dump(mode="json")
    grid: Dict[str, Any]

    # 输出根目录（runs/、report/、grid.json）
    out_dir: str

    # 报告中导出注意力的测试患者数
    attention_patients: int

    # 语料概况（词表大小、划分大小）
    corpus_summary: Dict[str, Any]

    # 展开后的任务列表
    tasks: List[ArmTask]

    # 收集的运行结果 (Reduce 阶段使用)
    # 使用 operator.add 来合并并行分支的结果
    results: Annotated[List[ArmResult], operator.add]

    # 汇总表 (records 形式) 与显著性检验
    ablation_rows: List[Dict[str, Any]]
    significance_rows: List[Dict[str, Any]]

    # 输出文件
    report_paths: Dict[str, str]

    # 最终 markdown 报告
    final_report: str


class WorkerState(TypedDict):
    """并行 Worker 的子状态"""
    task: ArmTask
