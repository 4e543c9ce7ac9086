from functools import lru_cache
from pathlib import Path
from typing import Optional

from langgraph.graph import StateGraph, START, END
from langgraph.constants import Send

from ..config import GridConfig, RunConfig, build_config
from ..data.corpus import Corpus, load_corpus
from ..errors import GraphDiffMedError
from ..evaluation.metrics import METRICS
from ..evaluation.significance import compare_arms
from ..reporting.ablation import arm_order, collect_eval_frames, per_seed_values
from ..reporting.artifacts import RunArtifacts, run_dir
from ..reporting.report_writer import ablation_table
from ..reporting.summary import REPORT_DIR, build_report, write_grid
from ..state.state import ArmResult, OverallState, WorkerState
from ..training.pipeline import train_and_evaluate
from ..utils.logger import workflow_logger as logger
from ..utils.rich_renderer import (
    render_markdown, render_section_header, render_task_list, render_run_result, render_metrics,
    render_config
)


@lru_cache(maxsize=4)
def _cached_corpus(corpus_dir: Optional[str], records: Optional[str], ddi: Optional[str],
                   split_seed: int) -> Corpus:
    """同一语料只加载一次，各 Worker 只读共享"""
    return load_corpus(corpus_dir, records, ddi, seed=split_seed)


def _corpus_for(run: RunConfig) -> Corpus:
    return _cached_corpus(run.corpus_dir, run.records, run.ddi, run.split_seed)


def load_corpus_node(state: OverallState):
    logger.info("📦 [节点] 开始执行: load_corpus (加载语料)")
    grid = build_config(GridConfig, state["grid"])
    corpus = _corpus_for(grid.base)
    summary = {
        "patients": len(corpus.records),
        "vocab D/P/M": f"{corpus.vocab.n_diag}/{corpus.vocab.n_proc}/{corpus.vocab.n_med}",
        "split train/val/test": "/".join(str(n) for n in corpus.split.sizes()),
        "DDI edges": len(corpus.ddi.edges()),
    }
    render_section_header("语料概况", "📦")
    render_config(summary, title="📦 语料")
    logger.info("✅ [节点] 完成: load_corpus")
    return {"corpus_summary": summary}


def plan_arms(state: OverallState):
    logger.info("📋 [节点] 开始执行: plan_arms (展开消融网格)")
    grid = build_config(GridConfig, state["grid"])
    out_dir = state["out_dir"]
    write_grid(out_dir, grid)
    tasks = []
    for i, arm in enumerate(grid.arms):
        for seed in grid.seeds:
            run = grid.run_config(arm, seed)
            tasks.append({"arm": arm.name, "arm_index": i, "seed": seed,
                          "run_config": run.model_dump(mode="json"),
                          "run_dir": str(run_dir(out_dir, arm.name, seed).root)})

    render_section_header("消融任务规划", "📋")
    render_task_list(tasks)
    logger.info(f"✅ [节点] 完成: plan_arms - {len(grid.arms)} 个分支 x {len(grid.seeds)} 个种子 = {len(tasks)} 个任务")
    return {"tasks": tasks}


# Map step: Distribute tasks
def continue_to_runs(state: OverallState):
    tasks = state["tasks"]
    logger.info(f"🚀 [Map] 分发 {len(tasks)} 个并行任务到 Worker 节点")
    for i, task in enumerate(tasks):
        logger.info(f"   └─ Task {i+1}: {task['arm']} seed={task['seed']}")
    return [Send("run_arm", {"task": task}) for task in tasks]


def run_arm(state: WorkerState):
    task = state["task"]
    name = f"{task['arm']} seed={task['seed']}"
    logger.info(f"👷 [Worker] 开始处理任务: {name}")
    base: ArmResult = {"arm": task["arm"], "arm_index": task["arm_index"], "seed": task["seed"],
                       "run_dir": task["run_dir"], "status": "failed", "config_hash": "", "best_epoch": 0,
                       "metrics": {}, "stds": {}, "error": ""}
    try:
        run = build_config(RunConfig, task["run_config"])
        base["config_hash"] = run.config_hash()
        outcome = train_and_evaluate(run, _corpus_for(run), RunArtifacts(Path(task["run_dir"])), task["arm"])
    except GraphDiffMedError as e:
        logger.warning(f"❌ [Worker] 任务失败: {name}: {e}")
        result = {**base, "error": str(e)}
    except Exception as e:  # noqa: BLE001  网格继续运行，失败原因写入报告
        logger.exception(f"❌ [Worker] 任务异常: {name}")
        result = {**base, "error": f"{type(e).__name__}: {e}"}
    else:
        result = {**base, "status": "ok", "best_epoch": outcome.train.best_epoch,
                  "metrics": {m: s.mean for m, s in outcome.report.metrics.items()},
                  "stds": {m: s.std for m, s in outcome.report.metrics.items()}}
        logger.info(f"✅ [Worker] 任务完成: {name}")

    render_run_result(result)
    return {"results": [result]}


def _sorted_results(state: OverallState):
    return sorted(state.get("results", []), key=lambda r: (r["arm_index"], r["seed"]))


def aggregate(state: OverallState):
    logger.info("📊 [节点] 开始执行: aggregate (跨种子汇总)")
    grid = build_config(GridConfig, state["grid"])
    results = _sorted_results(state)
    ok = [r for r in results if r["status"] == "ok"]
    failed = [r for r in results if r["status"] != "ok"]
    logger.info(f"   └─ 成功 {len(ok)} 个, 失败 {len(failed)} 个")

    long_df = collect_eval_frames([RunArtifacts(Path(r["run_dir"])) for r in ok])
    order = arm_order(long_df, [a.name for a in grid.arms])
    table = ablation_table(long_df, order)
    per_seed = per_seed_values(long_df)
    significance = compare_arms({a: per_seed[a] for a in order if a in per_seed}, grid.baseline_arm, METRICS)

    render_section_header("消融汇总", "📊")
    render_metrics({row["arm"]: {m: (row[f"{m}_mean"], row[f"{m}_std"]) for m in METRICS}
                    for row in table.to_dict("records")}, title=f"📊 消融结果 ({len(grid.seeds)} 个种子)")
    logger.info("✅ [节点] 完成: aggregate")
    return {"ablation_rows": table.to_dict("records"), "significance_rows": significance.to_dict("records")}


def write_report(state: OverallState):
    logger.info("📝 [节点] 开始执行: write_report (生成消融报告)")
    grid = build_config(GridConfig, state["grid"])
    results = _sorted_results(state)
    runs = [RunArtifacts(Path(r["run_dir"])) for r in results if r["status"] == "ok"]
    failed = {f"{r['arm']} / seed {r['seed']}": r["error"] for r in results if r["status"] != "ok"}
    report_dir = str(Path(state["out_dir"]) / REPORT_DIR)

    paths = build_report(runs, report_dir, n_patients=state.get("attention_patients", 3),
                         preferred_order=[a.name for a in grid.arms], baseline=grid.baseline_arm, failed=failed)
    final_report = Path(paths["markdown"]).read_text(encoding="utf-8")

    render_section_header("最终消融报告", "📝")
    render_markdown(final_report, title="📝 最终消融报告", border_style="green")
    logger.info("✅ [节点] 完成: write_report")
    return {"report_paths": paths, "final_report": final_report}


def create_workflow():
    workflow = StateGraph(OverallState)

    # Add Nodes
    workflow.add_node("load_corpus", load_corpus_node)
    workflow.add_node("plan_arms", plan_arms)
    workflow.add_node("run_arm", run_arm)
    workflow.add_node("aggregate", aggregate)
    workflow.add_node("write_report", write_report)

    # Define Edges
    workflow.add_edge(START, "load_corpus")
    workflow.add_edge("load_corpus", "plan_arms")

    # Conditional Edge for Map-Reduce
    # From plan_arms, we "map" to run_arm using Send
    workflow.add_conditional_edges("plan_arms", continue_to_runs, ["run_arm"])

    # After workers finish, aggregate then write the report
    workflow.add_edge("run_arm", "aggregate")
    workflow.add_edge("aggregate", "write_report")
    workflow.add_edge("write_report", END)

    return workflow.compile()


def run_ablation(grid: GridConfig, out_dir: str, attention_patients: int = 3) -> OverallState:
    """执行整个消融网格；并行度由 grid.max_concurrency 控制"""
    app = create_workflow()
    initial_state = {
        "grid": grid.model_dump(mode="json"),
        "out_dir": out_dir,
        "attention_patients": attention_patients,
        "corpus_summary": {},
        "tasks": [],
        "results": [],
        "ablation_rows": [],
        "significance_rows": [],
        "report_paths": {},
        "final_report": "",
    }
    return app.invoke(initial_state, config={"max_concurrency": grid.max_concurrency})
