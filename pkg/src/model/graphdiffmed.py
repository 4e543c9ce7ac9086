"""
GraphDiffMed 模型组装
嵌入 -> 同构图细化 -> 模态 GRU -> 就诊内差分注意力 -> 跨就诊图偏置差分注意力 -> 患者聚合 -> 预测 + 因果复核

对第 k 次就诊的预测只读取 visits[:k+1] 的非用药模态和 visits[:k] 的用药；
GRU 在整条序列上跑一遍，第 k 步的输出只依赖前 k 步的输入。
"""
import math
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..autodiff import RngStreams, Tensor, ops
from ..config import AttnVariant, ModalityName, RunConfig
from ..data.graphs import CausalEffectMatrices, DdiGraph, co_support_graph
from ..data.vocab import EncodedPatient, EncodedVisit, Vocabularies
from ..errors import ConfigError, ShapeError
from ..utils.logger import model_logger as logger
from .diffattn import AttentionTrace, AttnParams, DiffAttnParams, DiffAttnV1Params, diffattn
from .embedding import (EmbeddingTables, embed_codes_pooled, encode_demographics, encode_labs,
                        homograph_refine)
from .graph_prior import KvSlot, assemble_inter_bias, build_kv_layout
from .gru import GruParams, gru_sequence


@dataclass(frozen=True)
class ModalityConfig:
    """D/P/M 恒开；性别 (G)、年龄 (Y)、化验 (L) 可选"""
    use_gender: bool = False
    use_age: bool = False
    use_labs: bool = False

    @classmethod
    def from_name(cls, name: str) -> "ModalityConfig":
        table = {
            "base": cls(), "-": cls(),
            "G": cls(use_gender=True),
            "GY": cls(use_gender=True, use_age=True),
            "L": cls(use_labs=True),
            "LGY": cls(use_gender=True, use_age=True, use_labs=True),
        }
        if name not in table:
            raise ConfigError(f"unknown modality config '{name}'")
        return table[name]

    @property
    def name(self) -> str:
        label = ("L" if self.use_labs else "") + ("G" if self.use_gender else "") + ("Y" if self.use_age else "")
        return label or "base"

    @property
    def n_extra(self) -> int:
        return int(self.use_gender) + int(self.use_age) + int(self.use_labs)

    def query_width(self, d: int) -> int:
        return (3 + self.n_extra) * d

    def patient_width(self, d: int) -> int:
        return (8 + self.n_extra) * d


class ModelHyper(BaseModel):
    """模型结构超参数（随检查点保存）"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    n_diag: int = Field(ge=1)
    n_proc: int = Field(ge=1)
    n_med: int = Field(ge=1)
    d: int = Field(64, ge=1)
    n_heads: int = Field(8, ge=1)
    attn_variant: AttnVariant = "dual_v2"
    graph_bias: bool = True
    lambda_graph: float = 0.1
    dropout: float = Field(0.7, ge=0.0, lt=1.0)
    causal_eta: float = Field(1.0, ge=0.0)
    modality: ModalityName = "base"

    @model_validator(mode="after")
    def _check(self) -> "ModelHyper":
        if self.d % self.n_heads != 0:
            raise ValueError(f"d={self.d} is not divisible by n_heads={self.n_heads}")
        if self.graph_bias and self.attn_variant != "dual_v2":
            raise ValueError("graph_bias requires attn_variant='dual_v2'")
        return self

    @classmethod
    def from_run(cls, run: RunConfig, vocab: Vocabularies) -> "ModelHyper":
        return cls(n_diag=vocab.n_diag, n_proc=vocab.n_proc, n_med=vocab.n_med, d=run.d, n_heads=run.n_heads,
                   attn_variant=run.attn_variant, graph_bias=run.graph_bias, lambda_graph=run.lambda_graph,
                   dropout=run.dropout, causal_eta=run.causal_eta, modality=run.modality)

    @property
    def modalities(self) -> ModalityConfig:
        return ModalityConfig.from_name(self.modality)


def _init_attn(hyper: ModelHyper, rng: np.random.Generator, prefix: str) -> AttnParams:
    if hyper.attn_variant == "v1":
        return DiffAttnV1Params.init(hyper.d, hyper.n_heads, rng, prefix=prefix)
    return DiffAttnParams.init(hyper.d, hyper.n_heads, rng, prefix=prefix, lambda_graph=hyper.lambda_graph)


class ModelState:
    """全部可训练参数 + 结构超参数"""

    def __init__(self, hyper: ModelHyper, embeddings: EmbeddingTables, grus: Dict[str, GruParams],
                 intra: AttnParams, inter: AttnParams, query_proj: Tensor, w_out: Tensor, b_out: Tensor):
        self.hyper = hyper
        self.embeddings = embeddings
        self.grus = grus
        self.intra = intra
        self.inter = inter
        self.query_proj = query_proj
        self.w_out = w_out
        self.b_out = b_out

    @classmethod
    def init(cls, hyper: ModelHyper, seed: int) -> "ModelState":
        """参数从 "init" 随机流按固定顺序抽取"""
        rng = RngStreams(seed).fresh("init")
        d = hyper.d
        mods = hyper.modalities
        embeddings = EmbeddingTables.init(hyper.n_diag, hyper.n_proc, hyper.n_med, d, rng)
        channels = ["diag", "proc", "med"] + (["lab"] if mods.use_labs else [])
        grus = {c: GruParams.init(d, rng, prefix=f"gru.{c}") for c in channels}
        intra = _init_attn(hyper, rng, "intra")
        inter = _init_attn(hyper, rng, "inter")
        qw = mods.query_width(d)
        rw = mods.patient_width(d)
        query_proj = Tensor(rng.uniform(-1 / math.sqrt(qw), 1 / math.sqrt(qw), size=(qw, d)),
                            requires_grad=True, name="query.w")
        w_out = Tensor(rng.uniform(-1 / math.sqrt(rw), 1 / math.sqrt(rw), size=(rw, hyper.n_med)),
                       requires_grad=True, name="head.w_out")
        b_out = Tensor(np.zeros((1, hyper.n_med)), requires_grad=True, name="head.b_out")
        return cls(hyper, embeddings, grus, intra, inter, query_proj, w_out, b_out)

    def named_parameters(self) -> List[Tuple[str, Tensor]]:
        out = list(self.embeddings.named_parameters())
        for gru in self.grus.values():
            out.extend(gru.named_parameters())
        out.extend(self.intra.named_parameters())
        out.extend(self.inter.named_parameters())
        out.extend([(t.name, t) for t in (self.query_proj, self.w_out, self.b_out)])
        return out

    def parameters(self) -> List[Tensor]:
        return [t for _, t in self.named_parameters()]

    def to_arrays(self) -> Dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.named_parameters()}

    def load_arrays(self, arrays: Dict[str, np.ndarray]) -> None:
        params = dict(self.named_parameters())
        missing = sorted(set(params) - set(arrays))
        if missing:
            raise ShapeError("load_arrays", (len(params),), (len(arrays),), detail=f"missing {missing[:5]}")
        for name, t in params.items():
            t.assign(arrays[name])

    def n_parameters(self) -> int:
        return int(sum(t.size for t in self.parameters()))


@dataclass
class VisitVectors:
    h_diag: Tensor
    h_proc: Tensor
    h_med: Tensor                 # 由上一次就诊的用药构造
    h_lab: Optional[Tensor] = None


@dataclass
class VisitOutput:
    logits: Tensor                # (1, n_M)，因果复核之后
    probs: Tensor                 # (1, n_M)
    layout: List[KvSlot] = field(default_factory=list)
    trace: Optional[AttentionTrace] = None


# ---------- 流水线各步 ----------

def intra_visit_attention(h_med: Tensor, h_diag: Tensor, h_proc: Tensor, params: AttnParams,
                          scalar_bias: Optional[float] = None) -> Tensor:
    """两个 1x1 差分注意力：(h_med → h_diag) + (h_med → h_proc)"""
    bias = None if scalar_bias is None else np.full((1, 1), float(scalar_bias))
    return ops.add(diffattn(h_med, h_diag, bias, params), diffattn(h_med, h_proc, bias, params))


def build_query_kv(outputs: Dict[str, List[Tensor]], current: VisitVectors, k: int,
                   demographics: Sequence[Tensor], mods: ModalityConfig,
                   query_proj: Tensor) -> Tuple[Tensor, Tensor, List[KvSlot]]:
    """
    q_visit = [O_D[k]; O_P[k]; h_med(k); G_e?; A_e?; h_lab(k)?] · W_q
    kv_prev = 每个历史就诊 j < k 的 (O_D[j], O_P[j], O_M[j], O_L[j]?)；无历史时为单个零 token
    """
    parts = [outputs["diag"][k], outputs["proc"][k], current.h_med, *demographics]
    if mods.use_labs:
        parts.append(current.h_lab)
    q_input = ops.concat(parts, axis=1)
    if q_input.shape[1] != query_proj.shape[0]:
        raise ShapeError("build_query_kv", q_input.shape, query_proj.shape)
    q_visit = ops.matmul(q_input, query_proj)

    layout = build_kv_layout(k, mods.use_labs)
    d = query_proj.shape[1]
    if k == 0:
        return q_visit, Tensor(np.zeros((1, d)), name="kv_null"), layout
    tokens = [outputs[tag][j] for j, tag in layout]
    return q_visit, ops.concat(tokens, axis=0), layout


def inter_visit_attention(q_visit: Tensor, kv_prev: Tensor, bias: Optional[np.ndarray], params: AttnParams,
                          trace: Optional[AttentionTrace] = None) -> Tensor:
    if bias is not None and np.asarray(bias).shape != (1, kv_prev.shape[0]):
        raise ShapeError("inter_visit_attention", np.asarray(bias).shape, (1, kv_prev.shape[0]))
    return diffattn(q_visit, kv_prev, bias, params, trace=trace)


def aggregate_patient(finals: Sequence[Tensor], demographics: Sequence[Tensor], o_intra: Tensor,
                      o_inter: Tensor, last_visit: Sequence[Tensor], dropout: float,
                      rng: Optional[np.random.Generator], training: bool) -> Tensor:
    """固定顺序拼接：末态 | 人口学 | o_intra | o_inter | 当前就诊向量，训练时 dropout"""
    r = ops.concat([*finals, *demographics, o_intra, o_inter, *last_visit], axis=1)
    return ops.dropout(r, dropout, rng, training)


def predict_logits(r_patient: Tensor, w_out: Tensor, b_out: Tensor) -> Tensor:
    """z = ReLU(r) · W_out + b"""
    if r_patient.ndim != 2 or r_patient.shape[1] != w_out.shape[0]:
        raise ShapeError("predict_logits", r_patient.shape, w_out.shape)
    return ops.add(ops.matmul(ops.relu(r_patient), w_out), b_out)


def causal_review(z: Tensor, diags: Sequence[int], procs: Sequence[int],
                  causal: CausalEffectMatrices, eta: float) -> Tensor:
    """z'_m = z_m + eta · (max_d C_D[d, m] + max_p C_P[p, m])"""
    if eta < 0:
        raise ConfigError(f"causal review weight must be >= 0, got {eta}")
    diags = np.asarray(diags, dtype=np.int64)
    procs = np.asarray(procs, dtype=np.int64)
    n_med = z.shape[-1]
    c_d = causal.diag_to_med[diags].max(axis=0) if diags.size else np.zeros(n_med)
    c_p = causal.proc_to_med[procs].max(axis=0) if procs.size else np.zeros(n_med)
    adjust = eta * (c_d + c_p)
    if not adjust.any():
        return z
    return ops.add(z, Tensor(adjust.reshape(1, n_med), name="causal_review"))


# ---------- 模型 ----------

class GraphDiffMed:
    """把参数与固定的图数据（DDI、因果矩阵及其同构图）组合成可前向的模型"""

    def __init__(self, state: ModelState, ddi: DdiGraph, causal: CausalEffectMatrices):
        h = state.hyper
        if ddi.n_med != h.n_med:
            raise ShapeError("GraphDiffMed", ddi.adjacency.shape, (h.n_med, h.n_med), detail="DDI graph")
        if causal.diag_to_med.shape != (h.n_diag, h.n_med) or causal.proc_to_med.shape != (h.n_proc, h.n_med):
            raise ShapeError("GraphDiffMed", causal.diag_to_med.shape, causal.proc_to_med.shape,
                             detail="causal matrices")
        self.state = state
        self.hyper = h
        self.mods = h.modalities
        self.ddi = ddi
        self.causal = causal
        self.diag_adjacency = co_support_graph(causal.diag_to_med)
        self.proc_adjacency = co_support_graph(causal.proc_to_med)

    @classmethod
    def create(cls, run: RunConfig, vocab: Vocabularies, ddi: DdiGraph,
               causal: CausalEffectMatrices) -> "GraphDiffMed":
        hyper = ModelHyper.from_run(run, vocab)
        state = ModelState.init(hyper, run.seed)
        logger.info(f"🧠 初始化模型 {hyper.attn_variant}/{'bias' if hyper.graph_bias else 'no-bias'}/"
                    f"{hyper.modality}: {state.n_parameters()} 个参数")
        return cls(state, ddi, causal)

    def parameters(self) -> List[Tensor]:
        return self.state.parameters()

    def visit_vectors(self, patient: EncodedPatient) -> List[VisitVectors]:
        emb = self.state.embeddings
        vectors = []
        prev_meds = np.zeros(0, dtype=np.int64)
        for v in patient.visits:
            h_diag = homograph_refine(embed_codes_pooled(v.diag, emb.diag_table), v.diag,
                                      self.diag_adjacency, emb.diag_table, emb.refine_diag)
            h_proc = homograph_refine(embed_codes_pooled(v.proc, emb.proc_table), v.proc,
                                      self.proc_adjacency, emb.proc_table, emb.refine_proc)
            h_med = homograph_refine(embed_codes_pooled(prev_meds, emb.med_table), prev_meds,
                                     self.ddi.adjacency, emb.med_table, emb.refine_med)
            h_lab = encode_labs(v.labs, emb.lab_projection) if self.mods.use_labs else None
            vectors.append(VisitVectors(h_diag, h_proc, h_med, h_lab))
            prev_meds = v.med
        return vectors

    def _demographics(self, visit: EncodedVisit) -> List[Tensor]:
        if not (self.mods.use_gender or self.mods.use_age):
            return []
        emb = self.state.embeddings
        g_e, a_e = encode_demographics(visit.gender, visit.age, emb.gender_table, emb.age_projection)
        return ([g_e] if self.mods.use_gender else []) + ([a_e] if self.mods.use_age else [])

    def forward_patient(self, patient: EncodedPatient, training: bool = False,
                        rng: Optional[np.random.Generator] = None,
                        trace_visits: Sequence[int] = ()) -> List[VisitOutput]:
        """对每次就诊 k = 0..T-1 给出预测"""
        s = self.state
        vectors = self.visit_vectors(patient)
        outputs: Dict[str, List[Tensor]] = {}
        for channel, gru in s.grus.items():
            attr = {"diag": "h_diag", "proc": "h_proc", "med": "h_med", "lab": "h_lab"}[channel]
            outputs[channel], _ = gru_sequence([getattr(vv, attr) for vv in vectors], gru)

        results = []
        for k, visit in enumerate(patient.visits):
            current = vectors[k]
            demographics = self._demographics(visit)
            o_intra = intra_visit_attention(current.h_med, current.h_diag, current.h_proc, s.intra)
            q_visit, kv_prev, layout = build_query_kv(outputs, current, k, demographics, self.mods, s.query_proj)

            bias = None
            if self.hyper.graph_bias:
                prev_meds = patient.visits[k - 1].med if k > 0 else []
                bias = assemble_inter_bias(prev_meds, [patient.visits[j].med for j in range(k)],
                                           layout, self.ddi).matrix
            trace = AttentionTrace() if k in trace_visits else None
            o_inter = inter_visit_attention(q_visit, kv_prev, bias, s.inter, trace=trace)

            finals = [outputs[c][k] for c in ("diag", "proc", "med")]
            if self.mods.use_labs:
                finals.append(outputs["lab"][k])
            r = aggregate_patient(finals, demographics, o_intra, o_inter,
                                  [current.h_diag, current.h_proc, current.h_med],
                                  self.hyper.dropout, rng, training)
            z = predict_logits(r, s.w_out, s.b_out)
            z = causal_review(z, visit.diag, visit.proc, self.causal, self.hyper.causal_eta)
            results.append(VisitOutput(logits=z, probs=ops.sigmoid(z), layout=layout, trace=trace))
        return results

    def model_forward(self, patient: EncodedPatient, t: int) -> np.ndarray:
        """第 t 次就诊（从 1 开始）的用药概率；只把前 t 次就诊交给前向"""
        if not 1 <= t <= len(patient):
            raise ShapeError("model_forward", (t,), (len(patient),), detail="visit index out of range")
        out = self.forward_patient(patient.truncated(t))
        return out[-1].probs.data.reshape(-1).copy()

    def predict_patient(self, patient: EncodedPatient) -> np.ndarray:
        """评估模式下每次就诊的概率，形状 (T, n_M)"""
        return np.vstack([o.probs.data for o in self.forward_patient(patient)])

    def explain_visit(self, patient: EncodedPatient, t: int) -> dict:
        """第 t 次就诊（从 1 开始）跨就诊注意力的逐头权重、门控与 kv 布局"""
        if not 1 <= t <= len(patient):
            raise ShapeError("explain_visit", (t,), (len(patient),), detail="visit index out of range")
        out = self.forward_patient(patient.truncated(t), trace_visits=(t - 1,))[-1]
        return {
            "patient_id": patient.patient_id,
            "visit": t,
            "layout": out.layout,
            "weights": out.trace.weights[:, 0, :],      # (2H, L_kv)
            "gates": np.asarray(out.trace.gates).reshape(-1),
            "probs": out.probs.data.reshape(-1).copy(),
        }


def model_forward(patient: EncodedPatient, t: int, model: GraphDiffMed) -> np.ndarray:
    return model.model_forward(patient, t)
