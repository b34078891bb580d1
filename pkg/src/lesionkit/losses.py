"""Training objectives: soft Dice, grouped categorical cross-entropy, composite."""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F

from .data.types import GROUP_SIZES
from .errors import AlignmentError, SchemaError

DICE_EPS = 1e-6


def _as_tensor(x) -> torch.Tensor:
    if isinstance(x, torch.Tensor):
        return x
    if isinstance(x, (int, float)):
        return torch.tensor(float(x), dtype=torch.float64)
    return torch.as_tensor(x)


def dice_loss(pred_soft, gt, eps: float = DICE_EPS) -> torch.Tensor:
    """1 - 2*sum(pred*gt) / (sum(pred) + sum(gt) + eps); differentiable in pred."""
    pred = _as_tensor(pred_soft)
    target = _as_tensor(gt).to(pred.dtype)
    if pred.shape != target.shape:
        raise AlignmentError(f"pred shape {tuple(pred.shape)} != gt shape {tuple(target.shape)}")
    inter = (pred * target).sum()
    denom = pred.sum() + target.sum() + eps
    return 1.0 - 2.0 * inter / denom


def grouped_log_softmax(logits: torch.Tensor) -> torch.Tensor:
    """log-softmax applied independently to each attribute group of the 13 logits."""
    pieces = []
    off = 0
    for size in GROUP_SIZES:
        pieces.append(F.log_softmax(logits[..., off : off + size], dim=-1))
        off += size
    return torch.cat(pieces, dim=-1)


def grouped_softmax(logits: torch.Tensor) -> torch.Tensor:
    return grouped_log_softmax(logits).exp()


def attr_loss(attr_logits, report_onehot) -> torch.Tensor:
    """Mean over the 5 groups of categorical cross-entropy against one-hot targets.

    Accepts (13,) or (B, 13); batch losses average over the batch.
    """
    logits = _as_tensor(attr_logits)
    target = _as_tensor(report_onehot).to(logits.dtype)
    if logits.shape[-1] != sum(GROUP_SIZES) or logits.shape != target.shape:
        raise AlignmentError(
            f"expected matching (..., {sum(GROUP_SIZES)}) shapes, got {tuple(logits.shape)} vs {tuple(target.shape)}"
        )
    off = 0
    for size in GROUP_SIZES:
        group = target[..., off : off + size]
        ones = group.sum(dim=-1)
        if not torch.allclose(ones, torch.ones_like(ones)) or not bool(
            ((group == 0) | (group == 1)).all()
        ):
            raise SchemaError("report target must be one-hot within every group")
        off += size
    logp = grouped_log_softmax(logits)
    per_group_ce = -(target * logp).sum(dim=-1) / len(GROUP_SIZES)
    return per_group_ce.mean()


@dataclass
class LossBreakdown:
    seg: torch.Tensor
    attr: torch.Tensor
    iou: torch.Tensor
    lambda_attr: float
    iou_weight: float
    total: torch.Tensor

    def detached(self) -> dict[str, float]:
        return {
            "seg": float(self.seg),
            "attr": float(self.attr),
            "iou": float(self.iou),
            "lambda": self.lambda_attr,
            "iou_weight": self.iou_weight,
            "total": float(self.total),
        }


def total_loss(seg, attr, iou=0.0, lambda_attr: float = 1.0, iou_weight: float = 1.0) -> LossBreakdown:
    """Composite objective: seg + lambda*attr + iou_weight*iou."""
    seg_t, attr_t, iou_t = _as_tensor(seg), _as_tensor(attr), _as_tensor(iou)
    total = seg_t + lambda_attr * attr_t + iou_weight * iou_t
    return LossBreakdown(
        seg=seg_t, attr=attr_t, iou=iou_t, lambda_attr=float(lambda_attr),
        iou_weight=float(iou_weight), total=total,
    )


def lambda_schedule(epoch: int, warmup_epochs: int = 0, lambda_max: float = 1.0) -> float:
    """Fixed weight by default; optional linear ramp 0 -> lambda_max over warmup."""
    if warmup_epochs <= 0:
        return lambda_max
    return lambda_max * min(1.0, (epoch + 1) / warmup_epochs)


def soft_iou(pred_soft, gt, eps: float = DICE_EPS) -> torch.Tensor:
    pred = _as_tensor(pred_soft)
    target = _as_tensor(gt).to(pred.dtype)
    inter = (pred * target).sum()
    union = pred.sum() + target.sum() - inter + eps
    return inter / union


def iou_calibration_loss(iou_pred, pred_soft, gt) -> torch.Tensor:
    """Squared error between the predicted IoU and the soft IoU of the mask.

    Fully differentiable in both arguments (no detach/threshold), so the
    composite loss admits exact finite-difference verification.
    """
    return (iou_pred - soft_iou(pred_soft, gt).to(iou_pred.dtype)) ** 2


def hard_iou(pred_soft, gt, threshold: float = 0.5) -> torch.Tensor:
    """IoU of the thresholded prediction; detached (locally constant in pred)."""
    pred = (_as_tensor(pred_soft) > threshold).to(torch.float64)
    target = _as_tensor(gt).to(torch.float64)
    inter = (pred * target).sum()
    union = pred.sum() + target.sum() - inter
    if float(union) == 0.0:
        return torch.tensor(1.0, dtype=torch.float64)
    return (inter / union).detach()
