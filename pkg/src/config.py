"""
配置定义 (pydantic)
生成器 / 损失 / 单次运行 / 消融网格 四类配置，JSON 文件 + 命令行覆盖
"""
import hashlib
import json
import os
from pathlib import Path
from typing import List, Literal, Optional, Tuple, Type, TypeVar

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError

load_dotenv()

DEFAULT_SEEDS: Tuple[int, ...] = (1, 3, 16, 18, 1234)
MODALITIES = ("base", "G", "GY", "L", "LGY")
MODALITY_LABELS = {"base": "-", "G": "G", "GY": "GY", "L": "L", "LGY": "LGY"}

ModalityName = Literal["base", "G", "GY", "L", "LGY"]
AttnVariant = Literal["v1", "dual_v2"]

C = TypeVar("C", bound=BaseModel)


def default_out_dir() -> str:
    return os.getenv("GRAPHDIFFMED_OUT_DIR", "runs")


class GeneratorConfig(BaseModel):
    """合成 EHR 生成器配置"""
    model_config = ConfigDict(extra="forbid")

    n_patients: int = Field(200, ge=3)
    n_diag: int = Field(40, ge=1)
    n_proc: int = Field(20, ge=1)
    n_med: int = Field(25, ge=2)
    n_lab_tests: int = Field(10, ge=1)
    mean_visits: float = Field(2.4, ge=2.0)
    min_diags_per_visit: int = Field(1, ge=1)
    max_diags_per_visit: int = Field(5, ge=1)
    max_meds_per_diag: int = Field(2, ge=1)
    noise_rate: float = Field(0.03, ge=0.0, le=1.0)
    confounder_rate: float = Field(0.3, ge=0.0, le=1.0)
    n_confounders: int = Field(3, ge=1)
    n_ddi_pairs: int = Field(10, ge=1)
    split_fractions: Tuple[float, float, float] = (0.8, 0.1, 0.1)

    @model_validator(mode="after")
    def _check_consistency(self) -> "GeneratorConfig":
        possible = self.n_med * (self.n_med - 1) // 2
        if self.n_ddi_pairs > possible:
            raise ValueError(f"n_ddi_pairs={self.n_ddi_pairs} exceeds the {possible} possible medication pairs")
        if self.max_diags_per_visit < self.min_diags_per_visit:
            raise ValueError("max_diags_per_visit < min_diags_per_visit")
        if self.max_diags_per_visit > self.n_diag:
            raise ValueError("max_diags_per_visit exceeds the diagnosis vocabulary")
        if self.n_confounders > self.n_med:
            raise ValueError("n_confounders exceeds the medication vocabulary")
        # 每个诊断至少出现在一个患者的首诊里，手术通过 d % n_proc 覆盖
        if self.n_patients < self.n_diag:
            raise ValueError(f"n_patients={self.n_patients} is smaller than n_diag={self.n_diag}")
        if self.n_diag < self.n_proc:
            raise ValueError(f"n_diag={self.n_diag} is smaller than n_proc={self.n_proc}")
        if abs(sum(self.split_fractions) - 1.0) > 1e-9:
            raise ValueError("split_fractions must sum to 1")
        return self


class LossConfig(BaseModel):
    """训练目标配置"""
    model_config = ConfigDict(extra="forbid")

    beta0: float = Field(1.0, ge=0.0)
    gamma: float = Field(2.5, gt=0.0)
    ddi_target: float = Field(0.06, gt=0.0)
    alpha: float = Field(0.005, ge=0.0)
    ddi_coeff: float = Field(0.0005, ge=0.0)
    clamp_beta_nonnegative: bool = True
    ddi_ema_decay: float = Field(0.9, ge=0.0, lt=1.0)
    threshold: float = Field(0.5, gt=0.0, lt=1.0)


class RunConfig(BaseModel):
    """单次训练/评估运行配置"""
    model_config = ConfigDict(extra="forbid")

    seed: int = 1
    attn_variant: AttnVariant = "dual_v2"
    graph_bias: bool = True
    modality: ModalityName = "base"
    epochs: int = Field(20, ge=0)
    learning_rate: float = Field(5e-4, gt=0.0)
    d: int = Field(64, ge=1)
    n_heads: int = Field(8, ge=1)
    dropout: float = Field(0.7, ge=0.0, lt=1.0)
    lambda_graph: float = 0.1
    causal_eta: float = Field(1.0, ge=0.0)
    bootstrap_iterations: int = Field(10, ge=1)
    bootstrap_fraction: float = Field(0.8, gt=0.0, le=1.0)
    # 没有 split.json 的记录文件按此种子划分，与训练种子无关
    split_seed: int = 1
    loss: LossConfig = Field(default_factory=LossConfig)

    # 路径不参与配置哈希
    corpus_dir: Optional[str] = None
    records: Optional[str] = None
    ddi: Optional[str] = None
    out_dir: str = Field(default_factory=default_out_dir)

    @model_validator(mode="after")
    def _check_arm(self) -> "RunConfig":
        if self.graph_bias and self.attn_variant != "dual_v2":
            raise ValueError("graph_bias requires attn_variant='dual_v2' (the v1 arm has no bias path)")
        if self.d % self.n_heads != 0:
            raise ValueError(f"d={self.d} is not divisible by n_heads={self.n_heads}")
        return self

    def config_hash(self) -> str:
        payload = self.model_dump(mode="json", exclude={"corpus_dir", "records", "ddi", "out_dir"})
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]

    @property
    def arm_name(self) -> str:
        """与消融表相同的分支名，例如 "GraphDiffMed (LGY)" """
        label = MODALITY_LABELS[self.modality]
        if self.attn_variant == "v1":
            return "Baseline (v1)" if self.modality == "base" else f"Baseline (v1, {label})"
        return f"{'GraphDiffMed' if self.graph_bias else 'Dual v2'} ({label})"


class ArmSpec(BaseModel):
    """消融网格中的一个分支"""
    model_config = ConfigDict(extra="forbid")

    name: str
    attn_variant: AttnVariant
    graph_bias: bool
    modality: ModalityName = "base"
    lambda_graph: Optional[float] = None


def default_arms() -> List[ArmSpec]:
    """Baseline (v1) + Dual v2 x {-, L, GY, LGY} + GraphDiffMed x {-, L, GY, LGY}"""
    arms = [ArmSpec(name="Baseline (v1)", attn_variant="v1", graph_bias=False)]
    for family, bias in (("Dual v2", False), ("GraphDiffMed", True)):
        for modality in ("base", "L", "GY", "LGY"):
            label = MODALITY_LABELS[modality]
            arms.append(ArmSpec(name=f"{family} ({label})", attn_variant="dual_v2",
                                graph_bias=bias, modality=modality))
    return arms


class GridConfig(BaseModel):
    """消融网格配置"""
    model_config = ConfigDict(extra="forbid")

    arms: List[ArmSpec] = Field(default_factory=default_arms)
    seeds: List[int] = Field(default_factory=lambda: list(DEFAULT_SEEDS))
    baseline_arm: str = "Baseline (v1)"
    max_concurrency: int = Field(1, ge=1)
    base: RunConfig = Field(default_factory=RunConfig)

    @model_validator(mode="after")
    def _check_arms(self) -> "GridConfig":
        names = [a.name for a in self.arms]
        if len(set(names)) != len(names):
            raise ValueError("arm names must be unique")
        if not self.arms or not self.seeds:
            raise ValueError("grid needs at least one arm and one seed")
        for arm in self.arms:
            self.run_config(arm, self.seeds[0])
        return self

    def run_config(self, arm: ArmSpec, seed: int) -> RunConfig:
        updates = {"seed": seed, "attn_variant": arm.attn_variant,
                   "graph_bias": arm.graph_bias, "modality": arm.modality}
        if arm.lambda_graph is not None:
            updates["lambda_graph"] = arm.lambda_graph
        merged = self.base.model_dump()
        merged.update(updates)
        return build_config(RunConfig, merged)


def build_config(model_cls: Type[C], values: dict) -> C:
    """校验字典并把 pydantic 错误转换为 ConfigError"""
    try:
        return model_cls.model_validate(values)
    except ValidationError as e:
        raise ConfigError(f"invalid {model_cls.__name__}: {e}") from e


def load_config(path: Optional[str], model_cls: Type[C], overrides: Optional[dict] = None) -> C:
    """读取 JSON 配置文件，再叠加命令行覆盖项"""
    values: dict = {}
    if path:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            values = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: not valid JSON ({e})") from e
        if not isinstance(values, dict):
            raise ConfigError(f"{path}: top level must be an object")
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    return build_config(model_cls, values)
