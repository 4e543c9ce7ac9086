"""
运行产物目录
<run_dir>/config.json, checkpoint.npz, train_log.jsonl, eval_report.csv (, metrics.png, attention.jsonl)
"""
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

from ..config import RunConfig, build_config
from ..errors import ArtifactError

CONFIG_FILE = "config.json"
CHECKPOINT_FILE = "checkpoint.npz"
TRAIN_LOG_FILE = "train_log.jsonl"
EVAL_FILE = "eval_report.csv"
PLOT_FILE = "metrics.png"
ATTENTION_FILE = "attention.jsonl"


def slugify(name: str) -> str:
    """"GraphDiffMed (LGY)" -> "graphdiffmed_lgy" """
    return re.sub(r"[^a-z0-9]+", "_", name.lower()).strip("_") or "arm"


@dataclass(frozen=True)
class RunArtifacts:
    root: Path

    @property
    def config(self) -> Path:
        return self.root / CONFIG_FILE

    @property
    def checkpoint(self) -> Path:
        return self.root / CHECKPOINT_FILE

    @property
    def train_log(self) -> Path:
        return self.root / TRAIN_LOG_FILE

    @property
    def eval_report(self) -> Path:
        return self.root / EVAL_FILE

    @property
    def plot(self) -> Path:
        return self.root / PLOT_FILE

    @property
    def attention(self) -> Path:
        return self.root / ATTENTION_FILE

    def ensure(self) -> "RunArtifacts":
        self.root.mkdir(parents=True, exist_ok=True)
        return self

    def write_config(self, run: RunConfig, arm: str = "") -> None:
        payload = {"arm": arm, "config_hash": run.config_hash(), "run_config": run.model_dump(mode="json")}
        self.config.write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")

    def read_config(self) -> dict:
        if not self.config.exists():
            raise ArtifactError([self.config])
        return json.loads(self.config.read_text(encoding="utf-8"))

    def run_config(self) -> RunConfig:
        return build_config(RunConfig, self.read_config()["run_config"])

    def read_train_log(self) -> List[dict]:
        if not self.train_log.exists():
            return []
        with self.train_log.open("r", encoding="utf-8") as f:
            return [json.loads(line) for line in f if line.strip()]

    def missing(self, required=(CONFIG_FILE, CHECKPOINT_FILE)) -> List[Path]:
        return [self.root / name for name in required if not (self.root / name).exists()]


def run_dir(out_dir: str, arm: Optional[str], seed: int) -> RunArtifacts:
    """消融网格中一个 (分支, 种子) 的目录"""
    return RunArtifacts(Path(out_dir) / "runs" / slugify(arm or "run") / f"seed_{seed}")


def find_runs(artifacts_dir: str) -> List[RunArtifacts]:
    """目录下所有包含 config.json 的运行目录（按路径排序）"""
    root = Path(artifacts_dir)
    if not root.exists():
        raise ArtifactError([root])
    return [RunArtifacts(p.parent) for p in sorted(root.rglob(CONFIG_FILE))]
