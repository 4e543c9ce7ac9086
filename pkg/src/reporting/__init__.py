# Reporting module
from .artifacts import RunArtifacts, find_runs, run_dir, slugify
from .report_writer import (TABLE_COLUMNS, ablation_markdown, ablation_table, attention_rows, plot_history,
                            read_eval_csv, write_attention_dump, write_eval_csv)
