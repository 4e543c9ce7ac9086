"""
词表构建与编码
编码按字典序分配稠密索引；化验值按训练集 min/max 归一化，未见过的化验项走保留的 unknown 槽位
"""
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from ..errors import DataFormatError, UnknownCodeError
from .records import PatientRecord, Visit


@dataclass(frozen=True)
class LabStat:
    index: int
    min: float
    max: float


@dataclass(frozen=True)
class Vocabularies:
    diag: Dict[str, int]
    proc: Dict[str, int]
    med: Dict[str, int]
    lab: Dict[int, LabStat]

    @property
    def n_diag(self) -> int:
        return len(self.diag)

    @property
    def n_proc(self) -> int:
        return len(self.proc)

    @property
    def n_med(self) -> int:
        return len(self.med)

    @property
    def n_lab(self) -> int:
        return len(self.lab)

    def med_codes(self) -> List[str]:
        return sorted(self.med, key=self.med.__getitem__)

    def normalize_lab(self, test_id: int, value: float) -> Tuple[float, float]:
        """(ID_norm, value_norm)；未知化验项映射到 id_norm = 1.0, value = 0.5"""
        stat = self.lab.get(int(test_id))
        n = max(self.n_lab, 1)
        if stat is None:
            return float(self.n_lab) / n, 0.5
        if stat.max == stat.min:
            return stat.index / n, 0.5
        v = (value - stat.min) / (stat.max - stat.min)
        return stat.index / n, float(min(max(v, 0.0), 1.0))

    def with_lab_stats(self, lab: Dict[int, LabStat]) -> "Vocabularies":
        return Vocabularies(diag=self.diag, proc=self.proc, med=self.med, lab=lab)


def _dense(codes: Iterable[str]) -> Dict[str, int]:
    return {c: i for i, c in enumerate(sorted(set(codes)))}


def _lab_stats(records: List[PatientRecord]) -> Dict[int, LabStat]:
    lo: Dict[int, float] = {}
    hi: Dict[int, float] = {}
    for r in records:
        for v in r.visits:
            for test_id, value in v.labs:
                lo[test_id] = min(lo.get(test_id, value), value)
                hi[test_id] = max(hi.get(test_id, value), value)
    return {tid: LabStat(index=i, min=lo[tid], max=hi[tid]) for i, tid in enumerate(sorted(lo))}


def build_vocabularies(records: List[PatientRecord],
                       lab_records: Optional[List[PatientRecord]] = None) -> Vocabularies:
    """
    所有出现过的编码 -> 稠密索引。
    lab_records 给出时，化验 min/max 只用这些记录统计（训练集）。
    """
    if not records:
        raise DataFormatError("<records>", 0, "records", "cannot build vocabularies from an empty record list")
    visits = [v for r in records for v in r.visits]
    return Vocabularies(
        diag=_dense(c for v in visits for c in v.diag),
        proc=_dense(c for v in visits for c in v.proc),
        med=_dense(c for v in visits for c in v.med),
        lab=_lab_stats(lab_records if lab_records is not None else records),
    )


@dataclass(frozen=True)
class EncodedVisit:
    diag: np.ndarray
    proc: np.ndarray
    med: np.ndarray
    labs: np.ndarray          # (k, 2) 归一化后的 (id, value)
    gender: int
    age: float

    def med_set(self) -> frozenset:
        return frozenset(int(m) for m in self.med)


@dataclass(frozen=True)
class EncodedPatient:
    patient_id: str
    visits: Tuple[EncodedVisit, ...]

    def __len__(self) -> int:
        return len(self.visits)

    def truncated(self, n_visits: int) -> "EncodedPatient":
        return EncodedPatient(self.patient_id, self.visits[:n_visits])

    def replace_visit(self, index: int, visit: EncodedVisit) -> "EncodedPatient":
        visits = list(self.visits)
        visits[index] = visit
        return EncodedPatient(self.patient_id, tuple(visits))


def _indices(codes: List[str], table: Dict[str, int], kind: str) -> np.ndarray:
    missing = [c for c in codes if c not in table]
    if missing:
        raise UnknownCodeError(kind, missing)
    return np.array(sorted(table[c] for c in codes), dtype=np.int64)


def encode_visit(visit: Visit, vocab: Vocabularies) -> EncodedVisit:
    labs = np.array([vocab.normalize_lab(t, x) for t, x in visit.labs], dtype=np.float64).reshape(-1, 2)
    return EncodedVisit(
        diag=_indices(visit.diag, vocab.diag, "diagnosis"),
        proc=_indices(visit.proc, vocab.proc, "procedure"),
        med=_indices(visit.med, vocab.med, "medication"),
        labs=labs,
        gender=visit.gender,
        age=visit.age,
    )


def encode_patient(record: PatientRecord, vocab: Vocabularies) -> EncodedPatient:
    return EncodedPatient(record.patient_id, tuple(encode_visit(v, vocab) for v in record.visits))


def multi_hot(indices: np.ndarray, size: int) -> np.ndarray:
    y = np.zeros(size)
    y[np.asarray(indices, dtype=np.int64)] = 1.0
    return y
