"""
患者记录与文件读写
每行一个患者的 JSON；单次就诊患者被过滤掉
"""
import json
import math
from pathlib import Path
from typing import List, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from ..errors import DataFormatError, UnknownCodeError
from ..utils.logger import data_logger as logger


class Visit(BaseModel):
    """一次就诊：诊断 / 手术 / 用药 集合，化验 (test_id, value)，性别，年龄"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    diag: List[str]
    proc: List[str]
    med: List[str]
    labs: List[Tuple[int, float]] = Field(default_factory=list)
    gender: int
    age: float = Field(ge=0.0)

    @field_validator("diag", "proc", "med")
    @classmethod
    def _as_set(cls, codes: List[str]) -> List[str]:
        # 集合语义：去重并排序
        return sorted(set(codes))

    @field_validator("gender")
    @classmethod
    def _binary_gender(cls, g: int) -> int:
        if g not in (0, 1):
            raise ValueError("gender must be 0 or 1")
        return g

    @field_validator("labs")
    @classmethod
    def _finite_labs(cls, labs: List[Tuple[int, float]]) -> List[Tuple[int, float]]:
        for test_id, value in labs:
            if not math.isfinite(value):
                raise ValueError(f"lab value for test {test_id} is not finite")
        return labs

    @field_validator("age")
    @classmethod
    def _finite_age(cls, age: float) -> float:
        if not math.isfinite(age):
            raise ValueError("age is not finite")
        return age


class PatientRecord(BaseModel):
    """按时间排序的就诊序列"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    patient_id: str
    visits: List[Visit] = Field(min_length=1)

    @field_validator("visits")
    @classmethod
    def _chronological(cls, visits: List[Visit]) -> List[Visit]:
        for k in range(1, len(visits)):
            if visits[k].age < visits[k - 1].age:
                raise ValueError(f"visit {k} (age {visits[k].age}) precedes visit {k - 1} (age {visits[k - 1].age})")
        return visits


def _format_loc(loc) -> str:
    return ".".join(str(part) for part in loc) or "<record>"


def _check_codes(record: PatientRecord, vocab, line_no: int) -> None:
    for kind, attr, table in (("diagnosis", "diag", vocab.diag),
                              ("procedure", "proc", vocab.proc),
                              ("medication", "med", vocab.med)):
        unknown = [c for v in record.visits for c in getattr(v, attr) if c not in table]
        if unknown:
            raise UnknownCodeError(f"{kind} (line {line_no})", unknown)


def read_records(path: str, vocab=None) -> Tuple[List[PatientRecord], int]:
    """解析记录文件，返回 (保留的记录, 被过滤的单次就诊患者数)"""
    p = Path(path)
    if not p.exists():
        raise DataFormatError(str(path), 0, "<file>", "file does not exist")

    records: List[PatientRecord] = []
    excluded = 0
    seen = set()
    with p.open("r", encoding="utf-8") as f:
        for line_no, raw in enumerate(f, start=1):
            if not raw.strip():
                continue
            try:
                payload = json.loads(raw)
            except json.JSONDecodeError as e:
                raise DataFormatError(str(path), line_no, "<json>", e.msg) from e
            try:
                record = PatientRecord.model_validate(payload)
            except ValidationError as e:
                first = e.errors()[0]
                raise DataFormatError(str(path), line_no, _format_loc(first["loc"]), first["msg"]) from e
            if record.patient_id in seen:
                raise DataFormatError(str(path), line_no, "patient_id",
                                      f"duplicate patient '{record.patient_id}'")
            seen.add(record.patient_id)
            if vocab is not None:
                _check_codes(record, vocab, line_no)
            if len(record.visits) < 2:
                excluded += 1
                continue
            records.append(record)

    if excluded:
        logger.warning(f"⚠️ {path}: 过滤掉 {excluded} 个单次就诊患者")
    logger.info(f"读取 {len(records)} 个患者记录: {path}")
    return records, excluded


def load_records(path: str, vocab=None) -> List[PatientRecord]:
    records, _ = read_records(path, vocab)
    return records


def write_records(path: str, records: List[PatientRecord]) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with p.open("w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(record.model_dump(mode="json"), separators=(",", ":")) + "\n")
