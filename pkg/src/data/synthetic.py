"""
合成 EHR 生成器
植入结构：诊断 d 确定性地蕴含用药子集 Med(d)；噪声翻转、混杂用药注入、植入的高频共现 DDI 对
"""
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Tuple

import numpy as np

from ..autodiff.rng import RngStreams
from ..config import GeneratorConfig
from ..utils.logger import generator_logger as logger
from .graphs import CausalEffectMatrices, DdiGraph, write_causal_matrix, write_ddi_edges
from .records import PatientRecord, Visit, write_records
from .split import DatasetSplit, split_patients, write_split
from .vocab import Vocabularies, build_vocabularies


def diag_code(i: int) -> str:
    return f"D{i:03d}"


def proc_code(i: int) -> str:
    return f"P{i:03d}"


def med_code(i: int) -> str:
    return f"M{i:03d}"


@dataclass(frozen=True)
class PlantedStructure:
    """生成器的真值：诊断 -> 用药、诊断 -> 手术、混杂用药池、植入 DDI 对"""
    med_of_diag: Dict[int, FrozenSet[int]]
    proc_of_diag: Dict[int, FrozenSet[int]]
    lab_mean: Dict[int, float]
    confounders: Tuple[int, ...]
    planted_pair: Tuple[int, int]

    def implied_meds(self, diag_indices: Iterable[int]) -> FrozenSet[int]:
        out = set()
        for d in diag_indices:
            out |= self.med_of_diag[int(d)]
        return frozenset(out)

    def to_json(self) -> dict:
        return {
            "med_of_diag": {diag_code(d): sorted(med_code(m) for m in ms) for d, ms in sorted(self.med_of_diag.items())},
            "proc_of_diag": {diag_code(d): sorted(proc_code(p) for p in ps) for d, ps in sorted(self.proc_of_diag.items())},
            "confounders": [med_code(m) for m in self.confounders],
            "planted_ddi_pair": [med_code(m) for m in self.planted_pair],
        }


@dataclass(frozen=True)
class SyntheticCorpus:
    records: List[PatientRecord]
    vocab: Vocabularies
    ddi: DdiGraph
    causal: CausalEffectMatrices
    split: DatasetSplit
    planted: PlantedStructure
    manifest: dict


def _plant_structure(cfg: GeneratorConfig, rng: np.random.Generator) -> Tuple[PlantedStructure, np.ndarray]:
    med_of_diag: Dict[int, set] = {d: set() for d in range(cfg.n_diag)}
    for m in range(cfg.n_med):
        med_of_diag[m % cfg.n_diag].add(m)
    for d in range(cfg.n_diag):
        target = int(rng.integers(1, cfg.max_meds_per_diag + 1))
        while len(med_of_diag[d]) < target:
            med_of_diag[d].add(int(rng.integers(0, cfg.n_med)))

    proc_of_diag: Dict[int, set] = {}
    for d in range(cfg.n_diag):
        procs = {d % cfg.n_proc}
        if rng.random() < 0.3:
            procs.add(int(rng.integers(0, cfg.n_proc)))
        proc_of_diag[d] = procs

    lab_mean = {d: float(rng.uniform(0.0, 10.0)) for d in range(cfg.n_diag)}
    confounders = tuple(sorted(int(m) for m in rng.choice(cfg.n_med, size=cfg.n_confounders, replace=False)))

    # 诊断流行度：打乱后的幂律权重
    weights = 1.0 / np.sqrt(np.arange(1, cfg.n_diag + 1))
    popularity = rng.permutation(weights)
    popularity = popularity / popularity.sum()

    planted = PlantedStructure(
        med_of_diag={d: frozenset(ms) for d, ms in med_of_diag.items()},
        proc_of_diag={d: frozenset(ps) for d, ps in proc_of_diag.items()},
        lab_mean=lab_mean,
        confounders=confounders,
        planted_pair=(0, 1),
    )
    return planted, popularity


def _sample_patient(i: int, cfg: GeneratorConfig, planted: PlantedStructure,
                    popularity: np.ndarray, rng: np.random.Generator) -> PatientRecord:
    n_visits = 2 + int(rng.poisson(cfg.mean_visits - 2.0))
    gender = int(rng.integers(0, 2))
    age = float(rng.uniform(20.0, 90.0))
    visits = []
    for t in range(n_visits):
        k = int(rng.integers(cfg.min_diags_per_visit, cfg.max_diags_per_visit + 1))
        diags = [int(d) for d in rng.choice(cfg.n_diag, size=k, replace=False, p=popularity)]
        # 覆盖就诊：患者 i 的首诊强制包含诊断 i，且不加噪声
        coverage = t == 0 and i < cfg.n_diag
        if coverage and i not in diags:
            diags[0] = i
        procs = set()
        for d in diags:
            procs |= planted.proc_of_diag[d]
        meds = set(planted.implied_meds(diags))

        flips = rng.random(cfg.n_med) < cfg.noise_rate
        add_confounder = rng.random() < cfg.confounder_rate
        confounder = int(rng.choice(planted.confounders))
        if not coverage:
            for m in np.nonzero(flips)[0].tolist():
                meds.symmetric_difference_update({m})
            if add_confounder:
                meds.add(confounder)

        labs = [(d % cfg.n_lab_tests, round(float(rng.normal(planted.lab_mean[d], 0.5)), 4))
                for d in sorted(diags)]
        visits.append(Visit(
            diag=[diag_code(d) for d in diags],
            proc=[proc_code(p) for p in procs],
            med=[med_code(m) for m in meds],
            labs=labs,
            gender=gender,
            age=round(age, 4),
        ))
        age += float(rng.uniform(0.1, 2.0))
    return PatientRecord(patient_id=f"p{i:04d}", visits=visits)


def _most_co_occurring_pair(med_sets: List[FrozenSet[int]], n_med: int) -> Tuple[int, int]:
    counts = np.zeros((n_med, n_med))
    for meds in med_sets:
        idx = sorted(meds)
        if len(idx) > 1:
            counts[np.ix_(idx, idx)] += 1
    counts = np.triu(counts, k=1)
    flat = int(np.argmax(counts))
    i, j = divmod(flat, n_med)
    if counts[i, j] == 0:
        return 0, 1
    return i, j


def _ddi_pairs(planted_pair: Tuple[int, int], n_pairs: int, n_med: int,
               rng: np.random.Generator) -> List[Tuple[int, int]]:
    pairs = {planted_pair}
    while len(pairs) < n_pairs:
        a, b = sorted(int(x) for x in rng.choice(n_med, size=2, replace=False))
        pairs.add((a, b))
    return sorted(pairs)


def empirical_effects(records: List[PatientRecord], vocab: Vocabularies,
                      attr: str, row_table: Dict[str, int]) -> np.ndarray:
    """P(m | code)：含该编码的就诊中出现用药 m 的比例"""
    seen = np.zeros(len(row_table))
    joint = np.zeros((len(row_table), vocab.n_med))
    for r in records:
        for v in r.visits:
            rows = [row_table[c] for c in getattr(v, attr)]
            meds = [vocab.med[c] for c in v.med]
            seen[rows] += 1
            if meds:
                joint[np.ix_(rows, meds)] += 1
    return np.round(joint / np.maximum(seen[:, None], 1.0), 6)


def ground_truth_ddi_rate(records: List[PatientRecord], vocab: Vocabularies, ddi: DdiGraph) -> float:
    hit, total = 0, 0
    for r in records:
        for v in r.visits:
            a, b = ddi.pair_count(vocab.med[c] for c in v.med)
            hit += a
            total += b
    return hit / total if total else 0.0


def generate_synthetic(cfg: GeneratorConfig, seed: int) -> SyntheticCorpus:
    """按 (配置, 种子) 确定性地生成语料"""
    streams = RngStreams(seed)
    struct_rng = streams.fresh("struct")
    visit_rng = streams.fresh("visits")

    planted, popularity = _plant_structure(cfg, struct_rng)
    records = [_sample_patient(i, cfg, planted, popularity, visit_rng) for i in range(cfg.n_patients)]

    split = split_patients([r.patient_id for r in records], cfg.split_fractions, seed)
    train_ids = set(split.train)
    train_records = [r for r in records if r.patient_id in train_ids]
    vocab = build_vocabularies(records, lab_records=train_records)

    med_sets = [frozenset(vocab.med[c] for c in v.med) for r in records for v in r.visits]
    planted_pair = _most_co_occurring_pair(med_sets, vocab.n_med)
    planted = PlantedStructure(planted.med_of_diag, planted.proc_of_diag, planted.lab_mean,
                               planted.confounders, planted_pair)
    ddi = DdiGraph.from_pairs(vocab.n_med, _ddi_pairs(planted_pair, cfg.n_ddi_pairs, vocab.n_med, struct_rng))

    causal = CausalEffectMatrices(
        diag_to_med=empirical_effects(train_records, vocab, "diag", vocab.diag),
        proc_to_med=empirical_effects(train_records, vocab, "proc", vocab.proc),
    )

    n_visits = sum(len(r.visits) for r in records)
    med_codes = vocab.med_codes()
    manifest = {
        "seed": seed,
        "config": cfg.model_dump(mode="json"),
        "n_patients": len(records),
        "n_visits": n_visits,
        "mean_visits": n_visits / len(records),
        "vocab_sizes": {"diag": vocab.n_diag, "proc": vocab.n_proc, "med": vocab.n_med, "lab": vocab.n_lab},
        "split_sizes": dict(zip(("train", "validation", "test"), split.sizes())),
        "ddi_pairs": [[med_codes[i], med_codes[j]] for i, j in ddi.edges()],
        "planted_ddi_pair": [med_codes[i] for i in planted_pair],
        "confounders": [med_code(m) for m in planted.confounders],
        "ground_truth_ddi_rate": ground_truth_ddi_rate(records, vocab, ddi),
    }
    logger.info(f"🧪 生成 {len(records)} 个患者 / {n_visits} 次就诊，"
                f"真值 DDI rate = {manifest['ground_truth_ddi_rate']:.4f}")
    return SyntheticCorpus(records, vocab, ddi, causal, split, planted, manifest)


CORPUS_FILES = {
    "records": "records.jsonl",
    "ddi": "ddi.tsv",
    "causal_diag": "causal_diag.tsv",
    "causal_proc": "causal_proc.tsv",
    "split": "split.json",
    "planted": "planted.json",
    "manifest": "manifest.json",
}


def write_corpus(out_dir: str, corpus: SyntheticCorpus) -> Dict[str, str]:
    """写出语料文件，返回 {角色: 路径}"""
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    paths = {k: str(root / v) for k, v in CORPUS_FILES.items()}
    vocab = corpus.vocab
    diag_codes = sorted(vocab.diag, key=vocab.diag.__getitem__)
    proc_codes = sorted(vocab.proc, key=vocab.proc.__getitem__)
    med_codes = vocab.med_codes()

    write_records(paths["records"], corpus.records)
    write_ddi_edges(paths["ddi"], corpus.ddi, med_codes)
    write_causal_matrix(paths["causal_diag"], corpus.causal.diag_to_med, diag_codes, med_codes)
    write_causal_matrix(paths["causal_proc"], corpus.causal.proc_to_med, proc_codes, med_codes)
    write_split(paths["split"], corpus.split)
    Path(paths["planted"]).write_text(json.dumps(corpus.planted.to_json(), indent=2, sort_keys=True),
                                      encoding="utf-8")
    Path(paths["manifest"]).write_text(json.dumps(corpus.manifest, indent=2, sort_keys=True),
                                       encoding="utf-8")
    logger.info(f"💾 语料已写入: {root}")
    return paths
