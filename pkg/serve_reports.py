#!/usr/bin/env python3
"""
单独启动报告 Web 服务器
查看 ablate / report 已生成的消融报告，无需重新训练；启动前先把 .md 离线渲染为 .html
"""
import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

from src.utils.report_server import start_server, write_html_reports  # noqa: E402


def main() -> int:
    parser = argparse.ArgumentParser(description="启动 GraphDiffMed 报告 Web 服务器")
    parser.add_argument("-p", "--port", type=int, default=8080, help="服务器端口 (默认: 8080)")
    parser.add_argument("-d", "--dir", default="runs/report", help="报告目录 (默认: runs/report)")
    parser.add_argument("--no-browser", action="store_true", help="不自动打开浏览器")
    args = parser.parse_args()

    report_dir = Path(args.dir)
    if not (report_dir / "ablation.md").exists():
        print(f"❌ 报告目录中没有 ablation.md: {report_dir}")
        print("   请先运行 main.py ablate 或 main.py report <产物目录>")
        return 1

    write_html_reports(str(report_dir))
    start_server(reports_dir=str(report_dir), port=args.port, open_browser=not args.no_browser)
    return 0


if __name__ == "__main__":
    sys.exit(main())
