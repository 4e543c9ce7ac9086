from .workflow import create_workflow, run_ablation
