"""
训练目标
L = L_BCE + β(t) · L_DDI + α · ‖θ‖²
β(t) = β₀ (1 − exp(−γ (DDI_current − DDI_target) / DDI_target))，默认截断到 ≥ 0
"""
import math
from typing import Iterable, Sequence

import numpy as np

from ..autodiff import Tensor, ops
from ..config import LossConfig
from ..data.graphs import DdiGraph


def bce_loss(y: np.ndarray, logits: Tensor) -> Tensor:
    """−(1/n) Σ [y log p + (1−y) log(1−p)]，按 logits 计算: mean(softplus(z) − y·z)"""
    y = np.asarray(y, dtype=np.float64).reshape(logits.shape)
    return ops.mean(ops.sub(ops.softplus(logits), ops.mul(Tensor(y), logits)))


def ddi_loss(probs: Tensor, predicted: Iterable[int], ddi: DdiGraph, coeff: float = 0.0005) -> Tensor:
    """(coeff / |M|²) Σ_{i,j ∈ M} p_i p_j A[i, j]（有序对）；|M| ≤ 1 时为 0"""
    idx = np.array(sorted(set(int(m) for m in predicted)), dtype=np.int64)
    if idx.size <= 1:
        return Tensor(0.0)
    sub = ddi.adjacency[np.ix_(idx, idx)]
    if not sub.any():
        return Tensor(0.0)
    p_m = ops.take(ops.reshape(probs, (1, probs.size)), idx, axis=1)
    quad = ops.matmul(ops.matmul(p_m, Tensor(sub)), ops.transpose(p_m))
    return ops.scale(ops.sum(quad), coeff / float(idx.size ** 2))


def beta_anneal(ddi_current: float, cfg: LossConfig) -> float:
    raw = cfg.beta0 * (1.0 - math.exp(-cfg.gamma * (ddi_current - cfg.ddi_target) / cfg.ddi_target))
    if cfg.clamp_beta_nonnegative:
        return max(raw, 0.0)
    return raw


def l2_regularization(params: Sequence[Tensor]) -> Tensor:
    return ops.l2_norm_sq(params)


def visit_loss(y: np.ndarray, logits: Tensor, probs: Tensor, predicted: Iterable[int], ddi: DdiGraph,
               cfg: LossConfig, beta: float) -> Tensor:
    """单次就诊：BCE + β · DDI（L2 项按患者只加一次，不在这里）"""
    return ops.add(bce_loss(y, logits), ops.scale(ddi_loss(probs, predicted, ddi, cfg.ddi_coeff), beta))


def total_loss(y: np.ndarray, logits: Tensor, probs: Tensor, predicted: Iterable[int], ddi: DdiGraph,
               params: Sequence[Tensor], cfg: LossConfig, ddi_current: float) -> Tensor:
    """单次就诊的三项目标之和"""
    loss = visit_loss(y, logits, probs, predicted, ddi, cfg, beta_anneal(ddi_current, cfg))
    return ops.add(loss, ops.scale(l2_regularization(params), cfg.alpha))


class DdiTracker:
    """DDI_current：预测集合 DDI rate 的指数滑动平均，每个患者之后更新一次"""

    def __init__(self, cfg: LossConfig):
        self.cfg = cfg
        self.value = cfg.ddi_target

    def reset(self) -> None:
        self.value = self.cfg.ddi_target

    def update(self, interacting_pairs: int, total_pairs: int) -> float:
        # 该患者没有任何用药对时不更新
        if total_pairs > 0:
            rate = interacting_pairs / total_pairs
            self.value = self.cfg.ddi_ema_decay * self.value + (1.0 - self.cfg.ddi_ema_decay) * rate
        return self.value

    @property
    def beta(self) -> float:
        return beta_anneal(self.value, self.cfg)
