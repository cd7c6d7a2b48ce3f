"""Contrastive generation objective and its combination with the span regulariser."""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

import numpy as np

from src.autodiff import functional as F
from src.autodiff.tensor import Tensor, as_tensor
from src.decoder.transformer import perplexity
from src.model.mmtg import MMTGModel
from src.schema.models import EPassage
from src.utils.errors import ValidationError

logger = logging.getLogger(__name__)

DEFAULT_LAMBDA_REG = 1.0

ScoreLike = Union[Tensor, float, Sequence[float], np.ndarray]


def contrastive_loss(f_pos: ScoreLike, f_negs: Optional[ScoreLike] = None) -> Tensor:
    """
    −[ln σ(f_pos) + Σ_neg ln σ(1 − f_neg)].

    Args:
        f_pos: Positive score, scalar or (B,)
        f_negs: Negative scores, (K,) for a scalar f_pos or (B, K); None or
            empty means no negatives

    Returns:
        Tensor: Loss with the shape of f_pos
    """
    f_pos = as_tensor(f_pos)
    loss = -F.log_sigmoid(f_pos)
    if f_negs is None:
        return loss
    f_negs = as_tensor(f_negs)
    if f_negs.size == 0:
        return loss
    return loss - F.sum(F.log_sigmoid(1.0 - f_negs), axis=-1)


@dataclass
class TrainingBatch:
    """Positives and, per positive, the negative inputs sharing its target."""

    positives: List[EPassage]
    negatives: List[List[EPassage]]

    def __post_init__(self):
        if len(self.negatives) != len(self.positives):
            raise ValidationError("every positive needs a (possibly empty) negative list")
        for pos, negs in zip(self.positives, self.negatives):
            for neg in negs:
                if neg.target != pos.target:
                    raise ValidationError(
                        f"negative {neg.key} does not share the target of {pos.key}"
                    )

    @property
    def size(self) -> int:
        return len(self.positives)

    @property
    def negatives_per_positive(self) -> int:
        counts = {len(n) for n in self.negatives}
        if len(counts) > 1:
            raise ValidationError(f"ragged negatives per positive: {sorted(counts)}")
        return counts.pop() if counts else 0


@dataclass
class LossBreakdown:
    """Scalar total plus the detached terms logged in the trace."""

    total: Tensor
    contrastive: float
    span_loss: float
    f_pos: float
    f_neg: Optional[float]
    perplexity: float
    negatives_evaluated: int


def total_loss(
    batch: TrainingBatch,
    model: MMTGModel,
    lambda_reg: float = DEFAULT_LAMBDA_REG,
) -> LossBreakdown:
    """
    Mean contrastive loss over the batch plus λ · L_D of the positives.

    Negatives go through their own forward pass only when present.

    Raises:
        ValidationError: If the batch is empty or λ is negative
    """
    if batch.size == 0:
        raise ValidationError("total_loss of an empty batch")
    if lambda_reg < 0:
        raise ValidationError(f"lambda_reg must be non-negative, got {lambda_reg}")

    pos = model.score(batch.positives)
    per_neg = batch.negatives_per_positive
    f_neg_value = None
    if per_neg:
        flat = [neg for negs in batch.negatives for neg in negs]
        neg = model.score(flat)
        f_negs = F.reshape(neg.f, (batch.size, per_neg))
        f_neg_value = float(neg.f.data.mean())
        contrastive = contrastive_loss(pos.f, f_negs)
    else:
        contrastive = contrastive_loss(pos.f)

    contrastive_mean = F.mean(contrastive)
    span_loss = pos.encoding.span_loss
    total = contrastive_mean + span_loss * lambda_reg if lambda_reg else contrastive_mean
    return LossBreakdown(
        total=total,
        contrastive=contrastive_mean.item(),
        span_loss=float(span_loss.data),
        f_pos=float(pos.f.data.mean()),
        f_neg=f_neg_value,
        perplexity=perplexity(pos.log_probs, pos.batch),
        negatives_evaluated=per_neg * batch.size,
    )
