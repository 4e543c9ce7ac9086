"""
报告 Web 服务器
将消融 / 运行的 Markdown 报告渲染为网页，图表 (png) 与 CSV 直接按静态文件提供
"""

import functools
import http.server
import os
import webbrowser
from pathlib import Path
from typing import Dict, List, Optional
from urllib.parse import unquote

import markdown
from pygments.formatters import HtmlFormatter

from .logger import report_logger as logger

# HTML 模板
HTML_TEMPLATE = """<!DOCTYPE html>
<html lang="zh-CN">
<head>
    <meta charset="UTF-8">
    <meta name="viewport" content="width=device-width, initial-scale=1.0">
    <title>{title} - GraphDiffMed Reports</title>
    <style>
        body {{ font-family: -apple-system, 'Segoe UI', 'Noto Sans', Helvetica, Arial, sans-serif;
               background: #0d1117; color: #c9d1d9; margin: 0; line-height: 1.6; }}
        .header {{ background: #161b22; border-bottom: 1px solid #30363d; padding: 16px 32px; }}
        .header h1 {{ font-size: 20px; color: #fff; margin: 0; }}
        .header nav {{ margin-top: 10px; display: flex; gap: 8px; flex-wrap: wrap; }}
        .header nav a {{ color: #c9d1d9; text-decoration: none; padding: 4px 10px; border-radius: 6px;
                         border: 1px solid #30363d; font-size: 14px; }}
        .header nav a.active {{ background: #238636; border-color: #238636; color: #fff; }}
        .container {{ max-width: 1200px; margin: 0 auto; padding: 32px; }}
        .markdown-body {{ background: #161b22; border: 1px solid #30363d; border-radius: 6px; padding: 32px; }}
        .markdown-body h1, .markdown-body h2 {{ color: #fff; border-bottom: 1px solid #30363d; }}
        .markdown-body a {{ color: #58a6ff; }}
        .markdown-body img {{ max-width: 100%; background: #fff; border-radius: 4px; }}
        .markdown-body table {{ border-collapse: collapse; width: 100%; }}
        .markdown-body th, .markdown-body td {{ border: 1px solid #30363d; padding: 6px 10px; text-align: right; }}
        .markdown-body th:first-child, .markdown-body td:first-child {{ text-align: left; }}
        .markdown-body pre {{ border: 1px solid #30363d; border-radius: 6px; padding: 12px; overflow-x: auto; }}
        .cards {{ display: grid; grid-template-columns: repeat(auto-fit, minmax(280px, 1fr)); gap: 20px;
                  max-width: 1200px; margin: 0 auto; padding: 32px; }}
        .report-card {{ background: #161b22; border: 1px solid #30363d; border-radius: 8px; padding: 20px; }}
        .report-card h3 {{ color: #fff; margin: 0 0 8px 0; }}
        .report-card p {{ color: #8b949e; font-size: 14px; }}
        .report-card a {{ color: #58a6ff; text-decoration: none; }}
        {pygments_css}
    </style>
</head>
<body>
    <div class="header">
        <h1>💊 GraphDiffMed Reports</h1>
        <nav>
            <a href="/" {index_active}>首页</a>
            {nav_links}
        </nav>
    </div>
    {content}
</body>
</html>
"""

CARD_TEMPLATE = """
<div class="report-card">
    <h3>{icon} {title}</h3>
    <p>{description}</p>
    <a href="{link}">查看报告 →</a>
</div>
"""

REPORT_INFO = {
    "ablation.md": {
        "title": "消融实验结果",
        "icon": "📊",
        "description": "各分支跨种子的 Jaccard / DDI / F1 / PRAUC / 平均用药数，以及对基线的 Welch t 检验",
    },
    "runs.md": {
        "title": "运行明细",
        "icon": "🏃",
        "description": "每个 (分支, 种子) 的配置哈希、选中轮次、测试指标与训练曲线",
    },
    "attention.md": {
        "title": "跨就诊注意力",
        "icon": "🔎",
        "description": "选定患者的逐头注意力权重与 λ 门控摘要",
    },
}


def _pygments_css() -> str:
    return HtmlFormatter(style="monokai").get_style_defs(".highlight")


def render_markdown_to_html(md_content: str, title: str = "Report", nav_links: str = "",
                            index_active: str = "") -> str:
    """Markdown -> 完整 HTML 页面（表格 + 代码高亮）"""
    md = markdown.Markdown(extensions=["fenced_code", "codehilite", "tables", "toc"],
                           extension_configs={"codehilite": {"css_class": "highlight", "guess_lang": False}})
    body = md.convert(md_content)
    content = f'<div class="container"><div class="markdown-body">{body}</div></div>'
    return HTML_TEMPLATE.format(title=title, content=content, nav_links=nav_links,
                                index_active=index_active, pygments_css=_pygments_css())


def _nav_links(reports_dir: str, current: str = "") -> str:
    links = []
    for fname, info in REPORT_INFO.items():
        if os.path.exists(os.path.join(reports_dir, fname)):
            active = 'class="active"' if fname == current else ""
            links.append(f'<a href="/{fname}" {active}>{info["icon"]} {info["title"]}</a>')
    return "\n".join(links)


def write_html_reports(reports_dir: str) -> List[str]:
    """把目录下已知的 .md 报告离线渲染为同名 .html"""
    written = []
    for fname, info in REPORT_INFO.items():
        src = Path(reports_dir) / fname
        if not src.exists():
            continue
        html = render_markdown_to_html(src.read_text(encoding="utf-8"), title=info["title"],
                                       nav_links=_nav_links(reports_dir, fname))
        dst = src.with_suffix(".html")
        dst.write_text(html, encoding="utf-8")
        written.append(str(dst))
    logger.info(f"🌐 生成 {len(written)} 个 HTML 报告")
    return written


def resolve_report(reports_dir: str, name: str) -> Optional[Path]:
    """报告目录内存在的文件；越出目录（如 ../）或不存在时返回 None"""
    root = Path(reports_dir).resolve()
    source = (root / name).resolve()
    if not source.is_relative_to(root) or not source.is_file():
        return None
    return source


class ReportHandler(http.server.SimpleHTTPRequestHandler):
    """首页列出报告卡片；/<name>.md 现场渲染，其余（html / png / csv）按静态文件返回"""

    def __init__(self, *args, reports_dir: str, **kwargs):
        self.reports_dir = reports_dir
        super().__init__(*args, directory=reports_dir, **kwargs)

    def do_GET(self):
        route = unquote(self.path).split("?", 1)[0]
        if route in ("/", "/index.html"):
            self._reply(self._index_page())
        elif route.endswith(".md"):
            self._reply_markdown(route.lstrip("/"))
        else:
            super().do_GET()

    def _index_page(self) -> str:
        present = [(f, info) for f, info in REPORT_INFO.items()
                   if (Path(self.reports_dir) / f).exists()]
        cards = "".join(CARD_TEMPLATE.format(icon=info["icon"], title=info["title"],
                                             description=info["description"], link=f"/{f}")
                        for f, info in present)
        if not present:
            cards = '<div class="report-card"><h3>暂无报告</h3><p>请先运行 ablate / report 生成报告</p></div>'
        return HTML_TEMPLATE.format(title="首页", content=f'<div class="cards">{cards}</div>',
                                    nav_links=_nav_links(self.reports_dir), index_active='class="active"',
                                    pygments_css=_pygments_css())

    def _reply_markdown(self, name: str):
        source = resolve_report(self.reports_dir, name)
        if source is None:
            self.send_error(404, f"report not found: {name}")
            return
        info: Dict[str, str] = REPORT_INFO.get(name, {"title": name, "icon": "📄"})
        self._reply(render_markdown_to_html(source.read_text(encoding="utf-8"), title=info["title"],
                                            nav_links=_nav_links(self.reports_dir, name)))

    def _reply(self, page: str):
        body = page.encode("utf-8")
        self.send_response(200)
        self.send_header("Content-Type", "text/html; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, format, *args):
        logger.debug("🌐 " + format % args)


def start_server(reports_dir: str = "runs/report", port: int = 8080, open_browser: bool = True) -> None:
    """阻塞运行，Ctrl+C 退出"""
    handler = functools.partial(ReportHandler, reports_dir=os.path.abspath(reports_dir))
    with http.server.ThreadingHTTPServer(("", port), handler) as httpd:
        url = f"http://localhost:{port}"
        logger.info(f"🌐 报告服务器: {url} (Ctrl+C 停止)")
        if open_browser:
            webbrowser.open(url)
        try:
            httpd.serve_forever()
        except KeyboardInterrupt:
            logger.info("🛑 报告服务器已停止")
