"""
数据层测试：记录解析、词表编码、DDI / 因果矩阵文件、患者划分
"""
import json

import numpy as np
import pytest

from src.data.graphs import (CausalEffectMatrices, DdiGraph, co_support_graph, load_causal_matrix,
                             load_ddi_edges, write_ddi_edges)
from src.data.records import PatientRecord, Visit, read_records, write_records
from src.data.split import DatasetSplit, load_split, split_patients, write_split
from src.data.vocab import build_vocabularies, encode_patient, multi_hot
from src.errors import ConfigError, DataFormatError, ShapeError, UnknownCodeError


def _visit(diag, proc, med, labs=(), gender=0, age=40.0):
    return {"diag": list(diag), "proc": list(proc), "med": list(med), "labs": [list(x) for x in labs],
            "gender": gender, "age": age}


def _write_jsonl(path, rows):
    path.write_text("".join(json.dumps(r) + "\n" for r in rows), encoding="utf-8")
    return str(path)


@pytest.fixture
def two_patients():
    return [
        PatientRecord(patient_id="a", visits=[Visit(**_visit(["D2", "D1"], ["P1"], ["M1", "M2"], [(3, 5.0)])),
                                              Visit(**_visit(["D1"], ["P2"], ["M2"], [(3, 7.0)]))]),
        PatientRecord(patient_id="b", visits=[Visit(**_visit(["D3"], ["P1"], ["M3"], [(4, 1.0)], gender=1)),
                                              Visit(**_visit(["D3"], [], ["M1", "M3"]))]),
    ]


# =============================================================================
# 记录
# =============================================================================

class TestRecords:

    def test_code_lists_are_sets(self):
        v = Visit(**_visit(["D2", "D1", "D2"], [], ["M1"]))
        assert v.diag == ["D1", "D2"]

    def test_single_visit_patients_are_excluded(self, tmp_path):
        path = _write_jsonl(tmp_path / "r.jsonl", [
            {"patient_id": "a", "visits": [_visit(["D1"], ["P1"], ["M1"]), _visit(["D1"], ["P1"], ["M2"])]},
            {"patient_id": "b", "visits": [_visit(["D1"], ["P1"], ["M1"])]},
        ])
        records, excluded = read_records(path)
        assert [r.patient_id for r in records] == ["a"]
        assert excluded == 1

    def test_duplicate_patient_id(self, tmp_path):
        row = {"patient_id": "a", "visits": [_visit(["D1"], [], ["M1"]), _visit(["D1"], [], ["M1"])]}
        path = _write_jsonl(tmp_path / "r.jsonl", [row, row])
        with pytest.raises(DataFormatError):
            read_records(path)

    @pytest.mark.parametrize("bad", [{"gender": 2}, {"age": -1.0}])
    def test_invalid_demographics(self, tmp_path, bad):
        visit = {**_visit(["D1"], [], ["M1"]), **bad}
        path = _write_jsonl(tmp_path / "r.jsonl", [{"patient_id": "a", "visits": [visit, visit]}])
        with pytest.raises(DataFormatError) as exc:
            read_records(path)
        assert exc.value.line == 1

    def test_visits_out_of_order(self, tmp_path):
        visits = [_visit(["D1"], [], ["M1"], age=50.0), _visit(["D1"], [], ["M2"], age=49.5)]
        path = _write_jsonl(tmp_path / "r.jsonl", [{"patient_id": "a", "visits": visits}])
        with pytest.raises(DataFormatError) as exc:
            read_records(path)
        assert exc.value.line == 1
        assert exc.value.field == "visits"

    def test_same_age_visits_are_kept(self, tmp_path):
        visits = [_visit(["D1"], [], ["M1"], age=50.0), _visit(["D1"], [], ["M2"], age=50.0)]
        records, _ = read_records(_write_jsonl(tmp_path / "r.jsonl", [{"patient_id": "a", "visits": visits}]))
        assert len(records[0].visits) == 2

    def test_malformed_json_reports_line(self, tmp_path):
        good = json.dumps({"patient_id": "a", "visits": [_visit(["D1"], [], ["M1"]), _visit(["D1"], [], ["M1"])]})
        (tmp_path / "r.jsonl").write_text(good + "\n{not json\n", encoding="utf-8")
        with pytest.raises(DataFormatError) as exc:
            read_records(str(tmp_path / "r.jsonl"))
        assert exc.value.line == 2

    def test_write_then_read(self, tmp_path, two_patients):
        write_records(str(tmp_path / "r.jsonl"), two_patients)
        records, _ = read_records(str(tmp_path / "r.jsonl"))
        assert records == two_patients


# =============================================================================
# 词表
# =============================================================================

class TestVocabularies:

    def test_dense_lexicographic_indices(self, two_patients):
        vocab = build_vocabularies(two_patients)
        assert vocab.diag == {"D1": 0, "D2": 1, "D3": 2}
        assert vocab.med_codes() == ["M1", "M2", "M3"]

    def test_lab_normalization(self, two_patients):
        vocab = build_vocabularies(two_patients)
        assert vocab.normalize_lab(3, 6.0) == (0.0, 0.5)
        assert vocab.normalize_lab(3, 100.0)[1] == 1.0
        # 单一取值的化验项
        assert vocab.normalize_lab(4, 1.0) == (0.5, 0.5)
        # 未见过的化验项
        assert vocab.normalize_lab(99, 3.0) == (1.0, 0.5)

    def test_lab_stats_from_training_records_only(self, two_patients):
        vocab = build_vocabularies(two_patients, lab_records=two_patients[:1])
        assert set(vocab.lab) == {3}

    def test_encode_patient(self, two_patients):
        vocab = build_vocabularies(two_patients)
        enc = encode_patient(two_patients[0], vocab)
        np.testing.assert_array_equal(enc.visits[0].diag, [0, 1])
        assert enc.visits[0].labs.shape == (1, 2)
        assert len(enc.truncated(1)) == 1

    def test_unknown_code(self, two_patients):
        vocab = build_vocabularies(two_patients[1:])
        with pytest.raises(UnknownCodeError):
            encode_patient(two_patients[0], vocab)

    def test_multi_hot(self):
        np.testing.assert_array_equal(multi_hot(np.array([0, 2]), 4), [1, 0, 1, 0])


# =============================================================================
# 图文件
# =============================================================================

class TestGraphs:

    def test_ddi_edges_symmetric_and_self_loops_ignored(self, tmp_path):
        (tmp_path / "ddi.tsv").write_text("M1\tM2\nM2\tM1\nM3\tM3\n", encoding="utf-8")
        ddi = load_ddi_edges(str(tmp_path / "ddi.tsv"), {"M1": 0, "M2": 1, "M3": 2})
        assert ddi.edges() == [(0, 1)]
        assert ddi.adjacency[1, 0] == 1.0

    def test_ddi_unknown_code(self, tmp_path):
        (tmp_path / "ddi.tsv").write_text("M1\tM9\n", encoding="utf-8")
        with pytest.raises(UnknownCodeError):
            load_ddi_edges(str(tmp_path / "ddi.tsv"), {"M1": 0, "M2": 1})

    def test_ddi_write_then_load(self, tmp_path):
        ddi = DdiGraph.from_pairs(3, [(0, 2)])
        write_ddi_edges(str(tmp_path / "ddi.tsv"), ddi, ["M1", "M2", "M3"])
        again = load_ddi_edges(str(tmp_path / "ddi.tsv"), {"M1": 0, "M2": 1, "M3": 2})
        np.testing.assert_array_equal(again.adjacency, ddi.adjacency)

    def test_asymmetric_adjacency_rejected(self):
        with pytest.raises(DataFormatError):
            DdiGraph(np.array([[0.0, 1.0], [0.0, 0.0]]))

    def test_pair_count(self):
        ddi = DdiGraph.from_pairs(4, [(0, 1), (1, 2)])
        assert ddi.pair_count([0, 1, 2]) == (2, 3)
        assert ddi.pair_count([3]) == (0, 0)

    def test_causal_matrix_conflicting_duplicate(self, tmp_path):
        (tmp_path / "c.tsv").write_text("D1\tM1\t0.5\nD1\tM1\t0.7\n", encoding="utf-8")
        with pytest.raises(DataFormatError):
            load_causal_matrix(str(tmp_path / "c.tsv"), {"D1": 0}, {"M1": 0})

    def test_causal_matrix_negative_value(self, tmp_path):
        (tmp_path / "c.tsv").write_text("D1\tM1\t-0.1\n", encoding="utf-8")
        with pytest.raises(DataFormatError):
            load_causal_matrix(str(tmp_path / "c.tsv"), {"D1": 0}, {"M1": 0})

    def test_causal_shapes_must_agree(self):
        with pytest.raises(ShapeError):
            CausalEffectMatrices(np.zeros((2, 3)), np.zeros((2, 4)))

    def test_co_support_graph(self):
        effects = np.array([[0.5, 0.0], [0.2, 0.0], [0.0, 0.9]])
        np.testing.assert_array_equal(co_support_graph(effects), [[0, 1, 0], [1, 0, 0], [0, 0, 0]])


# =============================================================================
# 划分
# =============================================================================

class TestSplit:

    def test_sizes_round_and_remainder_goes_to_train(self):
        split = split_patients([f"p{i}" for i in range(25)], seed=1)
        assert split.sizes() == (21, 2, 2)

    def test_disjoint_and_complete(self):
        ids = [f"p{i}" for i in range(30)]
        split = split_patients(ids, seed=4)
        parts = [set(split.train), set(split.validation), set(split.test)]
        assert set.union(*parts) == set(ids)
        assert sum(len(p) for p in parts) == len(ids)

    def test_deterministic_per_seed(self):
        ids = [f"p{i}" for i in range(30)]
        assert split_patients(ids, seed=2) == split_patients(ids, seed=2)
        assert split_patients(ids, seed=2) != split_patients(ids, seed=3)

    def test_empty_part_rejected(self):
        with pytest.raises(ConfigError):
            split_patients(["a", "b", "c"], fractions=(0.8, 0.1, 0.1))

    def test_write_then_load(self, tmp_path):
        split = DatasetSplit(("a", "b"), ("c",), ("d",))
        write_split(str(tmp_path / "split.json"), split)
        assert load_split(str(tmp_path / "split.json")) == split

    def test_overlapping_split_file(self, tmp_path):
        (tmp_path / "split.json").write_text(json.dumps({"train": ["a"], "validation": ["a"], "test": ["b"]}))
        with pytest.raises(DataFormatError):
            load_split(str(tmp_path / "split.json"))
