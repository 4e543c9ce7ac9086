import sys
import os
import argparse
import traceback
from pathlib import Path
from typing import List, Optional

from src.config import (GeneratorConfig, GridConfig, RunConfig, build_config, default_out_dir, load_config,
                        MODALITIES)
from src.errors import GraphDiffMedError, ConfigError
from src.utils.rich_renderer import (
    print_banner, render_success, render_error, render_config, render_history, render_metrics,
    render_section_header, console
)


def _on_off(value: Optional[str]) -> Optional[bool]:
    return None if value is None else value == "on"


def _run_overrides(args) -> dict:
    """命令行覆盖 RunConfig 字段；未给出的保持配置文件 / 默认值"""
    overrides = {
        "seed": args.seed,
        "attn_variant": args.attn,
        "graph_bias": _on_off(args.graph_bias),
        "modality": args.modality,
        "epochs": args.epochs,
        "records": args.records,
        "ddi": args.ddi,
        "corpus_dir": args.corpus,
        "lambda_graph": args.lambda_graph,
    }
    # v1 分支没有偏置通路：只给 --attn v1 时默认关闭图偏置，显式 --graph-bias on 仍会校验失败
    if args.attn == "v1" and args.graph_bias is None:
        overrides["graph_bias"] = False
    return {k: v for k, v in overrides.items() if v is not None}


def _load_run_config(args) -> RunConfig:
    overrides = _run_overrides(args)
    if args.out:
        overrides["out_dir"] = args.out
    return load_config(args.config, RunConfig, overrides)


def _artifacts_for(run: RunConfig, run_path: Optional[str]):
    from src.reporting.artifacts import RunArtifacts, run_dir
    return RunArtifacts(Path(run_path)) if run_path else run_dir(run.out_dir, run.arm_name, run.seed)


def cmd_generate(args) -> int:
    from src.data.synthetic import generate_synthetic, write_corpus

    cfg = load_config(args.config, GeneratorConfig)
    seed = args.seed if args.seed is not None else 1
    out_dir = args.out or os.path.join(default_out_dir(), "corpus")
    corpus = generate_synthetic(cfg, seed)
    paths = write_corpus(out_dir, corpus)

    m = corpus.manifest
    render_config({
        "seed": seed,
        "patients / visits": f"{m['n_patients']} / {m['n_visits']}",
        "vocab D/P/M/Lab": "/".join(str(m["vocab_sizes"][k]) for k in ("diag", "proc", "med", "lab")),
        "split train/val/test": "/".join(str(m["split_sizes"][k]) for k in ("train", "validation", "test")),
        "DDI pairs": len(m["ddi_pairs"]),
        "planted DDI pair": " - ".join(m["planted_ddi_pair"]),
        "ground-truth DDI rate": f"{m['ground_truth_ddi_rate']:.4f}",
    }, title="📦 合成语料")
    render_success(f"语料已写入 {out_dir}（{len(paths)} 个文件）")
    return 0


def cmd_train(args) -> int:
    from dataclasses import asdict
    from src.training.pipeline import corpus_for_run, train_and_evaluate

    run = _load_run_config(args)
    render_config({"arm": run.arm_name, "config hash": run.config_hash(), "seed": run.seed,
                   "epochs": run.epochs, "d / heads": f"{run.d} / {run.n_heads}",
                   "corpus": run.corpus_dir or run.records})
    corpus = corpus_for_run(run)
    artifacts = _artifacts_for(run, args.run_dir)
    outcome = train_and_evaluate(run, corpus, artifacts, run.arm_name)

    if outcome.train.history:
        render_history([asdict(h) for h in outcome.train.history], best_epoch=outcome.train.best_epoch)
    render_metrics({run.arm_name: {m: (s.mean, s.std) for m, s in outcome.report.metrics.items()}},
                   title="📊 测试集 (bootstrap)")
    render_success(f"训练完成，选中第 {outcome.train.best_epoch} 轮；产物目录 {artifacts.root}")
    return 0


def cmd_eval(args) -> int:
    from src.data.corpus import load_corpus
    from src.evaluation.bootstrap import bootstrap_eval
    from src.evaluation.evaluator import Evaluator, frequency_baseline
    from src.model.checkpoint import load_checkpoint
    from src.reporting.report_writer import write_eval_csv
    from src.training.pipeline import load_model

    if not args.checkpoint:
        raise ConfigError("eval needs --checkpoint")
    _, meta = load_checkpoint(args.checkpoint)
    stored = dict(meta.get("run_config") or {})
    stored.update(_run_overrides(args))
    run = build_config(RunConfig, stored)
    arm = meta.get("extra", {}).get("arm", "") or run.arm_name

    corpus = load_corpus(run.corpus_dir, run.records, run.ddi, seed=run.split_seed)
    model = load_model(args.checkpoint, corpus)
    report = Evaluator(model, corpus, threshold=run.loss.threshold).evaluate(
        "test", seed=run.seed, iterations=run.bootstrap_iterations, fraction=run.bootstrap_fraction)
    csv_path = args.csv or str(Path(args.checkpoint).parent / "eval_report.csv")
    write_eval_csv(csv_path, report, arm=arm, seed=run.seed)

    baseline_preds = frequency_baseline(corpus.patients("train"), corpus.patients("test"), corpus.vocab.n_med,
                                        threshold=run.loss.threshold)
    baseline = bootstrap_eval(baseline_preds, corpus.ddi, run.seed, run.bootstrap_iterations,
                              run.bootstrap_fraction)
    render_metrics({
        arm: {m: (s.mean, s.std) for m, s in report.metrics.items()},
        "frequency baseline": {m: (s.mean, s.std) for m, s in baseline.metrics.items()},
    }, title=f"📊 测试集 ({report.n_patients} 患者 / {report.n_visits} 次就诊)")
    render_success(f"评估报告已写入 {csv_path}")
    return 0


def cmd_ablate(args) -> int:
    from src.graph.workflow import run_ablation
    from src.reporting.summary import REPORT_DIR

    grid = load_config(args.config, GridConfig)
    base = grid.base.model_dump()
    base.update(_run_overrides(args))
    base.pop("seed", None)
    out_dir = args.out or grid.base.out_dir
    base["out_dir"] = out_dir
    values = {**grid.model_dump(), "base": base}
    if args.seeds:
        values["seeds"] = args.seeds
    elif args.seed is not None:
        values["seeds"] = [args.seed]
    if args.arms:
        unknown = sorted(set(args.arms) - {a.name for a in grid.arms})
        if unknown:
            raise ConfigError(f"unknown arm(s): {unknown}")
        values["arms"] = [a.model_dump() for a in grid.arms if a.name in args.arms]
    if args.max_concurrency:
        values["max_concurrency"] = args.max_concurrency
    grid = build_config(GridConfig, values)

    final_state = run_ablation(grid, out_dir, attention_patients=args.patients)
    results = final_state.get("results", [])
    n_failed = sum(1 for r in results if r["status"] != "ok")
    report_dir = os.path.join(out_dir, REPORT_DIR)
    if results and n_failed == len(results):
        render_error(f"全部 {n_failed} 个运行失败，详见 {report_dir}/ablation.md")
        return 1
    render_success(f"消融完成: {len(results) - n_failed}/{len(results)} 个运行成功；报告目录 {report_dir}")
    if args.serve:
        from src.utils.report_server import start_server
        console.print(f"[bold cyan]🌐 启动 Web 服务器，端口: {args.port}[/bold cyan]")
        start_server(reports_dir=report_dir, port=args.port, open_browser=True)
    return 0


def cmd_report(args) -> int:
    from src.reporting.summary import REPORT_DIR, report_from_artifacts

    artifacts_dir = args.artifacts_dir or args.out or default_out_dir()
    paths = report_from_artifacts(artifacts_dir, corpus_dir=args.corpus, n_patients=args.patients)
    render_section_header("报告文件", "📁")
    for role, path in paths.items():
        if path:
            console.print(f"  • {role}: {path}")
    report_dir = os.path.join(artifacts_dir, REPORT_DIR)
    render_success(f"报告已生成: {report_dir}")
    if args.serve:
        from src.utils.report_server import start_server
        console.print(f"[bold cyan]🌐 启动 Web 服务器，端口: {args.port}[/bold cyan]")
        start_server(reports_dir=report_dir, port=args.port, open_browser=True)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="GraphDiffMed Desk Lab - 图偏置差分注意力用药推荐（合成数据消融实验台）",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
示例用法:
  # 生成默认合成语料（200 患者，词表 40/20/25）
  python main.py generate --out runs/corpus --seed 1

  # 训练一个 GraphDiffMed (LGY) 分支
  python main.py train --corpus runs/corpus --modality LGY --epochs 20

  # 训练 v1 基线（自动关闭图偏置）
  python main.py train --corpus runs/corpus --attn v1

  # 用检查点在测试集上评估，并给出频率基线
  python main.py eval --checkpoint runs/runs/graphdiffmed/seed_1/checkpoint.npz

  # 跑完整 9 分支 x 5 种子消融网格，并启动报告服务器
  python main.py ablate --corpus runs/corpus --out runs --serve

  # 从已有产物重新生成表格、曲线与注意力导出
  python main.py report runs --patients 5
        """
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="JSON 配置文件")
    common.add_argument("--seed", type=int, default=None, help="随机种子")
    common.add_argument("--out", default=None, help="输出目录")

    run_flags = argparse.ArgumentParser(add_help=False)
    run_flags.add_argument("--modality", choices=MODALITIES, default=None, help="附加模态")
    run_flags.add_argument("--attn", choices=("v1", "dual_v2"), default=None, help="注意力变体")
    run_flags.add_argument("--graph-bias", choices=("on", "off"), default=None, help="DDI 图偏置开关")
    run_flags.add_argument("--lambda-graph", type=float, default=None, help="图偏置强度 λ_graph")
    run_flags.add_argument("--epochs", type=int, default=None, help="训练轮数")
    run_flags.add_argument("--corpus", default=None, help="generate 输出的语料目录")
    run_flags.add_argument("--records", default=None, help="就诊记录文件 (JSON Lines)")
    run_flags.add_argument("--ddi", default=None, help="DDI 边文件")

    serve_flags = argparse.ArgumentParser(add_help=False)
    serve_flags.add_argument("--serve", action="store_true", help="完成后启动 Web 服务器查看报告")
    serve_flags.add_argument("--port", type=int, default=8080, help="Web 服务器端口 (默认: 8080)")
    serve_flags.add_argument("--patients", type=int, default=3, help="导出注意力的测试患者数 (默认: 3)")

    p = sub.add_parser("generate", parents=[common], help="生成合成 EHR 语料")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", parents=[common, run_flags], help="训练单个分支")
    p.add_argument("--run-dir", default=None, help="产物目录（默认 <out>/runs/<分支>/seed_<n>）")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common, run_flags], help="用检查点评估测试集")
    p.add_argument("--checkpoint", default=None, help="checkpoint.npz 路径")
    p.add_argument("--csv", default=None, help="评估 CSV 输出路径（默认与检查点同目录）")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", parents=[common, run_flags, serve_flags], help="运行消融网格")
    p.add_argument("--seeds", type=int, nargs="+", default=None, help="覆盖种子列表")
    p.add_argument("--arm", dest="arms", action="append", default=None, help="只运行指定分支（可多次使用）")
    p.add_argument("--max-concurrency", type=int, default=None, help="并行运行的分支数")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("report", parents=[common, serve_flags], help="从产物生成报告")
    p.add_argument("artifacts_dir", nargs="?", default=None, help="产物目录（默认 --out 或 runs）")
    p.add_argument("--corpus", default=None, help="覆盖运行配置中的语料目录")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)

    # 打印启动 Banner
    print_banner()

    try:
        return args.func(args)
    except GraphDiffMedError as e:
        render_error(str(e))
        return 1
    except Exception as e:
        render_error(f"执行过程中发生错误: {e}")
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
