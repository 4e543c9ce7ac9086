"""
语料包：记录 + 词表 + DDI 图 + 因果矩阵 + 划分 + 编码后的患者
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

from ..errors import DataFormatError
from ..utils.logger import data_logger as logger
from .graphs import CausalEffectMatrices, DdiGraph, load_causal_matrix, load_ddi_edges
from .records import PatientRecord, load_records
from .split import DatasetSplit, load_split, split_patients
from .synthetic import CORPUS_FILES
from .vocab import EncodedPatient, Vocabularies, build_vocabularies, encode_patient


@dataclass(frozen=True)
class Corpus:
    records: List[PatientRecord]
    vocab: Vocabularies
    ddi: DdiGraph
    causal: CausalEffectMatrices
    split: DatasetSplit
    encoded: Dict[str, EncodedPatient] = field(repr=False)

    def patients(self, part: str) -> List[EncodedPatient]:
        ids = getattr(self.split, part)
        return [self.encoded[pid] for pid in ids]


def build_corpus(records: List[PatientRecord], ddi_path: Optional[str] = None,
                 causal_diag_path: Optional[str] = None, causal_proc_path: Optional[str] = None,
                 split: Optional[DatasetSplit] = None, seed: int = 1) -> Corpus:
    """词表覆盖所有记录；化验 min/max 只用训练集"""
    if split is None:
        split = split_patients([r.patient_id for r in records], seed=seed)
    known = {r.patient_id for r in records}
    missing = [pid for part in (split.train, split.validation, split.test) for pid in part if pid not in known]
    if missing:
        raise DataFormatError("<split>", 0, "patient_id", f"split names unknown patients: {sorted(missing)[:5]}")

    train_ids = set(split.train)
    vocab = build_vocabularies(records, lab_records=[r for r in records if r.patient_id in train_ids])
    ddi = load_ddi_edges(ddi_path, vocab.med) if ddi_path else DdiGraph.empty(vocab.n_med)
    diag_to_med = (load_causal_matrix(causal_diag_path, vocab.diag, vocab.med) if causal_diag_path
                   else CausalEffectMatrices.zeros(vocab.n_diag, vocab.n_proc, vocab.n_med).diag_to_med)
    proc_to_med = (load_causal_matrix(causal_proc_path, vocab.proc, vocab.med) if causal_proc_path
                   else CausalEffectMatrices.zeros(vocab.n_diag, vocab.n_proc, vocab.n_med).proc_to_med)
    causal = CausalEffectMatrices(diag_to_med, proc_to_med)
    encoded = {r.patient_id: encode_patient(r, vocab) for r in records}
    logger.info(f"📦 语料: {len(records)} 患者, 词表 D/P/M = {vocab.n_diag}/{vocab.n_proc}/{vocab.n_med}, "
                f"DDI 边 {len(ddi.edges())}, 划分 {split.sizes()}")
    return Corpus(records, vocab, ddi, causal, split, encoded)


def load_corpus(corpus_dir: Optional[str] = None, records_path: Optional[str] = None,
                ddi_path: Optional[str] = None, seed: int = 1) -> Corpus:
    """
    从生成器输出目录加载；--records / --ddi 可以覆盖对应文件。
    目录外的记录文件没有 split.json 时按种子重新划分。
    """
    root = Path(corpus_dir) if corpus_dir else None

    def in_dir(role: str) -> Optional[str]:
        if root is None:
            return None
        p = root / CORPUS_FILES[role]
        return str(p) if p.exists() else None

    records_path = records_path or in_dir("records")
    if records_path is None:
        raise DataFormatError(str(corpus_dir), 0, "<records>", "no records file given or found in corpus directory")
    records = load_records(records_path)

    split = None
    split_path = in_dir("split")
    if split_path and records_path == in_dir("records"):
        split = load_split(split_path)
    return build_corpus(
        records,
        ddi_path=ddi_path or in_dir("ddi"),
        causal_diag_path=in_dir("causal_diag"),
        causal_proc_path=in_dir("causal_proc"),
        split=split,
        seed=seed,
    )


def corpus_from_synthetic(synthetic) -> Corpus:
    """直接把生成器结果包装成语料（测试与内存中的流程用）"""
    encoded = {r.patient_id: encode_patient(r, synthetic.vocab) for r in synthetic.records}
    return Corpus(synthetic.records, synthetic.vocab, synthetic.ddi, synthetic.causal, synthetic.split, encoded)
