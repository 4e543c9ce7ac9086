"""
Trainer - 每个患者一个 batch、一次 Adam 更新；按验证集 Jaccard 选模型
"""
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from ..autodiff import Adam, RngStreams, backward, ops
from ..config import RunConfig
from ..data.corpus import Corpus
from ..data.vocab import EncodedPatient, multi_hot
from ..errors import NonFiniteError, TrainingDivergedError
from ..evaluation.evaluator import Evaluator
from ..model.graphdiffmed import GraphDiffMed
from ..utils.logger import trainer_logger as logger
from .objective import DdiTracker, bce_loss, l2_regularization, visit_loss


@dataclass
class EpochLog:
    epoch: int
    train_loss: float
    train_bce: float
    beta: float
    ddi_ema: float
    val_jaccard: float
    val_ddi_rate: float
    val_f1: float


@dataclass
class TrainResult:
    best_epoch: int
    best_val_jaccard: float
    history: List[EpochLog] = field(default_factory=list)
    initial_train_bce: float = 0.0


class Trainer:
    def __init__(self, model: GraphDiffMed, corpus: Corpus, run: RunConfig):
        self.model = model
        self.corpus = corpus
        self.run = run
        self.cfg = run.loss
        self.params = model.parameters()
        self.optimizer = Adam(self.params, learning_rate=run.learning_rate)
        self.tracker = DdiTracker(self.cfg)
        streams = RngStreams(run.seed)
        self.dropout_rng = streams.generator("dropout")
        self.order_rng = streams.generator("order")
        self.evaluator = Evaluator(model, corpus, threshold=self.cfg.threshold)

    def patient_loss(self, patient: EncodedPatient, training: bool = True):
        """Σ_k [BCE_k + β·DDI_k] + α·‖θ‖²，以及该患者预测集合的 DDI 对计数"""
        beta = self.tracker.beta
        outputs = self.model.forward_patient(patient, training=training,
                                             rng=self.dropout_rng if training else None)
        n_med = self.model.hyper.n_med
        bce_terms, hit, total = [], 0, 0
        loss = None
        for out, visit in zip(outputs, patient.visits):
            probs = out.probs.data.reshape(-1)
            predicted = np.nonzero(probs >= self.cfg.threshold)[0]
            y = multi_hot(visit.med, n_med)
            bce_terms.append(bce_loss(y, out.logits).item())
            term = visit_loss(y, out.logits, out.probs, predicted, self.corpus.ddi, self.cfg, beta)
            loss = term if loss is None else ops.add(loss, term)
            a, b = self.corpus.ddi.pair_count(predicted)
            hit += a
            total += b
        loss = ops.add(loss, ops.scale(l2_regularization(self.params), self.cfg.alpha))
        return loss, float(np.sum(bce_terms)), hit, total

    def train_patient(self, patient: EncodedPatient, epoch: int) -> Dict[str, float]:
        self.optimizer.zero_grad()
        try:
            loss, bce, hit, total = self.patient_loss(patient)
            if not np.isfinite(loss.item()):
                raise TrainingDivergedError(epoch, patient.patient_id)
            backward(loss)
            self.optimizer.step()
        except NonFiniteError as e:
            raise TrainingDivergedError(epoch, patient.patient_id) from e
        self.tracker.update(hit, total)
        return {"loss": loss.item(), "bce": bce, "visits": len(patient)}

    def mean_bce(self, part: str = "train") -> float:
        """评估模式下每次就诊的平均 BCE"""
        values = []
        for p in self.corpus.patients(part):
            for out, visit in zip(self.model.forward_patient(p), p.visits):
                values.append(bce_loss(multi_hot(visit.med, self.model.hyper.n_med), out.logits).item())
        return float(np.mean(values)) if values else 0.0

    def train_epoch(self, epoch: int) -> EpochLog:
        self.tracker.reset()
        patients = self.corpus.patients("train")
        order = self.order_rng.permutation(len(patients))
        losses, bces, n_visits = [], [], 0
        for i in order:
            stats = self.train_patient(patients[i], epoch)
            losses.append(stats["loss"])
            bces.append(stats["bce"])
            n_visits += stats["visits"]
        val = self.evaluator.metrics("validation")
        return EpochLog(epoch=epoch, train_loss=float(np.mean(losses)) if losses else 0.0,
                        train_bce=float(np.sum(bces) / max(n_visits, 1)), beta=self.tracker.beta,
                        ddi_ema=self.tracker.value, val_jaccard=val["jaccard"], val_ddi_rate=val["ddi_rate"],
                        val_f1=val["f1"])

    def fit(self, log_path: Optional[str] = None) -> TrainResult:
        """
        训练 run.epochs 轮；初始化参数作为第 0 轮候选。
        验证 Jaccard 严格更高才替换，相同取更早的轮次。训练结束后模型参数恢复为选中轮次。
        """
        initial_bce = self.mean_bce("train")
        best_jaccard = self.evaluator.metrics("validation")["jaccard"]
        best_epoch = 0
        best_arrays = self.model.state.to_arrays()
        history: List[EpochLog] = []
        log_file = None
        if log_path:
            Path(log_path).parent.mkdir(parents=True, exist_ok=True)
            log_file = open(log_path, "w", encoding="utf-8")
        try:
            for epoch in range(1, self.run.epochs + 1):
                entry = self.train_epoch(epoch)
                history.append(entry)
                if log_file:
                    log_file.write(json.dumps(asdict(entry), sort_keys=True) + "\n")
                marker = ""
                if entry.val_jaccard > best_jaccard:
                    best_jaccard, best_epoch = entry.val_jaccard, epoch
                    best_arrays = self.model.state.to_arrays()
                    marker = " ⭐"
                logger.info(f"[Epoch {epoch}/{self.run.epochs}] loss {entry.train_loss:.4f} "
                            f"bce {entry.train_bce:.4f} β {entry.beta:.3f} "
                            f"val Jaccard {entry.val_jaccard:.4f} DDI {entry.val_ddi_rate:.4f}{marker}")
        finally:
            if log_file:
                log_file.close()

        self.model.state.load_arrays(best_arrays)
        logger.info(f"✅ 训练完成，选中第 {best_epoch} 轮 (val Jaccard {best_jaccard:.4f})")
        return TrainResult(best_epoch=best_epoch, best_val_jaccard=best_jaccard, history=history,
                           initial_train_bce=initial_bce)
