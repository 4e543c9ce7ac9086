"""
异常定义
库代码只抛出这里的异常，由 main.py 统一渲染并返回非零退出码
"""
from typing import Iterable, Sequence


class GraphDiffMedError(Exception):
    """所有领域异常的基类"""


class ShapeError(GraphDiffMedError):
    """张量形状不匹配"""

    def __init__(self, op: str, *shapes: Sequence[int], detail: str = ""):
        shown = " vs ".join(str(tuple(s)) for s in shapes)
        msg = f"{op}: shape mismatch {shown}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)
        self.op = op
        self.shapes = [tuple(s) for s in shapes]


class NonFiniteError(GraphDiffMedError):
    """出现 NaN / Inf"""

    def __init__(self, stage: str):
        super().__init__(f"non-finite values at stage '{stage}'")
        self.stage = stage


class GraphStateError(GraphDiffMedError):
    """反向传播调用方式错误（非标量、重复 backward 等）"""


class DataFormatError(GraphDiffMedError):
    """输入文件格式错误，带行号和字段"""

    def __init__(self, path: str, line: int, field: str, detail: str):
        super().__init__(f"{path}:{line}: field '{field}': {detail}")
        self.path = path
        self.line = line
        self.field = field


class UnknownCodeError(GraphDiffMedError):
    """编码不在词表中"""

    def __init__(self, kind: str, codes: Iterable[str]):
        self.codes = sorted(set(str(c) for c in codes))
        super().__init__(f"unknown {kind} code(s): {', '.join(self.codes)}")


class ConfigError(GraphDiffMedError):
    """配置非法"""


class CheckpointError(GraphDiffMedError):
    """检查点读写失败"""


class TrainingDivergedError(GraphDiffMedError):
    """训练损失出现 NaN"""

    def __init__(self, epoch: int, patient_id: str):
        super().__init__(f"non-finite loss at epoch {epoch}, patient '{patient_id}'")
        self.epoch = epoch
        self.patient_id = patient_id


class LayoutError(GraphDiffMedError):
    """kv 布局与历史就诊不一致"""


class EvaluationError(GraphDiffMedError):
    """评估输入不足或不一致（例如 bootstrap 的测试患者太少）"""


class ArtifactError(GraphDiffMedError):
    """运行产物缺失或不完整"""

    def __init__(self, missing):
        self.missing = sorted(str(m) for m in missing)
        super().__init__("missing artifacts: " + ", ".join(self.missing))
