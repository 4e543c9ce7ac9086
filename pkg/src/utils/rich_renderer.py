"""
Rich 终端渲染工具
用于在终端中展示配置、训练历史、评估指标与消融表
"""
from rich.console import Console
from rich.markdown import Markdown
from rich.panel import Panel
from rich.text import Text
from rich.rule import Rule
from rich.table import Table
from typing import Dict, List, Optional

# 全局 Console 实例；错误输出走标准错误
console = Console()
err_console = Console(stderr=True)

METRIC_LABELS = {
    "jaccard": "Jaccard",
    "ddi_rate": "DDI",
    "f1": "F1",
    "prauc": "PRAUC",
    "avg_meds": "Avg #Meds",
}


def render_markdown(content: str, title: Optional[str] = None, border_style: str = "blue") -> None:
    """Markdown 报告；给出 title 时套一层面板"""
    if not content or not content.strip():
        console.print("[dim]（无内容）[/dim]")
        return

    md = Markdown(content)
    if title:
        console.print(Panel(md, title=title, title_align="left", border_style=border_style, padding=(1, 2)))
    else:
        console.print(md)


def render_section_header(title: str, icon: str = "📌") -> None:
    """渲染分节标题"""
    console.print()
    console.print(Rule(f"[bold cyan]{icon} {title}[/bold cyan]", style="cyan"))
    console.print()


def render_config(values: Dict[str, object], title: str = "⚙️ 运行配置") -> None:
    """键值对配置面板"""
    table = Table(show_header=False, box=None)
    table.add_column("字段", style="bold")
    table.add_column("值", style="cyan")
    for key, value in values.items():
        table.add_row(str(key), str(value))
    console.print(Panel(table, title=title, title_align="left", border_style="blue"))


def render_task_list(tasks: list) -> None:
    """渲染消融任务列表"""
    if not tasks:
        console.print("[dim]无任务[/dim]")
        return

    table = Table(title="📋 消融任务列表", show_header=True, header_style="bold magenta")
    table.add_column("#", style="cyan", justify="right")
    table.add_column("分支", style="green")
    table.add_column("种子", justify="center", style="yellow")
    table.add_column("注意力", style="blue")
    table.add_column("图偏置", justify="center")
    table.add_column("模态", justify="center")

    for i, task in enumerate(tasks, 1):
        rc = task["run_config"]
        table.add_row(str(i), task["arm"], str(task["seed"]), rc["attn_variant"],
                      "on" if rc["graph_bias"] else "off", rc["modality"])
    console.print(table)
    console.print()


def render_history(history: List[dict], best_epoch: Optional[int] = None) -> None:
    """训练历史表，选中轮次加 ⭐"""
    table = Table(title="📈 训练历史", show_header=True, header_style="bold magenta")
    for col in ("epoch", "loss", "BCE/visit", "β", "val Jaccard", "val DDI", "val F1"):
        table.add_column(col, justify="right")
    for h in history:
        mark = " ⭐" if h["epoch"] == best_epoch else ""
        table.add_row(f"{h['epoch']}{mark}", f"{h['train_loss']:.4f}", f"{h['train_bce']:.4f}", f"{h['beta']:.3f}",
                      f"{h['val_jaccard']:.4f}", f"{h['val_ddi_rate']:.4f}", f"{h['val_f1']:.4f}")
    console.print(table)


def render_metrics(rows: Dict[str, Dict[str, float]], title: str = "📊 评估指标") -> None:
    """
    rows: 预测器名 -> {指标: 值}；值为 (mean, std) 元组时显示 mean ± std
    """
    table = Table(title=title, show_header=True, header_style="bold magenta")
    table.add_column("预测器", style="green")
    for label in METRIC_LABELS.values():
        table.add_column(label, justify="right")
    for name, values in rows.items():
        cells = []
        for key in METRIC_LABELS:
            v = values.get(key)
            if v is None:
                cells.append("-")
            elif isinstance(v, tuple):
                cells.append(f"{v[0]:.4f} ± {v[1]:.4f}")
            else:
                cells.append(f"{v:.4f}")
        table.add_row(name, *cells)
    console.print(table)


def render_run_result(result: dict) -> None:
    """渲染单个分支运行结果"""
    if result["status"] != "ok":
        console.print(f"  ❌ [red]{result['arm']} seed={result['seed']}: {result['error']}[/red]")
        return
    m = result["metrics"]
    console.print(f"  ✅ {result['arm']} seed={result['seed']}: Jaccard {m['jaccard']:.4f}, "
                  f"DDI {m['ddi_rate']:.4f}, F1 {m['f1']:.4f} (epoch {result['best_epoch']})")


def render_error(message: str) -> None:
    """渲染错误信息（标准错误）"""
    err_console.print(Panel(
        f"[red]{message}[/red]",
        title="❌ 错误",
        border_style="red"
    ))


def render_success(message: str) -> None:
    """渲染成功信息"""
    console.print(Panel(
        f"[green]{message}[/green]",
        title="✅ 成功",
        border_style="green"
    ))


def print_banner() -> None:
    """打印程序启动 Banner"""
    banner = """
╔══════════════════════════════════════════════════════════════╗
║              💊 GraphDiffMed Desk Lab V1.0 💊                ║
║            图偏置差分注意力 · 用药推荐消融实验台              ║
╚══════════════════════════════════════════════════════════════╝
    """
    console.print(Text(banner, style="bold cyan"))
