"""
Training loop: curriculum phases, contrastive loss with the span regulariser,
Adam with global-norm clipping, and a JSON-lines metrics trace.
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

from src.autodiff.optim import Adam
from src.exporter.json_exporter import append_jsonl
from src.model.mmtg import MMTGModel
from src.schema.models import EPassage
from src.training.config import TrainConfig
from src.training.curriculum import CurriculumPhase, make_batches, phase_at, phase_for_epoch
from src.training.losses import total_loss
from src.utils.errors import DivergenceError
from src.utils.seeding import derive_rng
from src.validator.data_validator import DataValidator

logger = logging.getLogger(__name__)


@dataclass
class TraceRecord:
    """One optimizer step as written to the trace."""

    step: int
    epoch: int
    phase: int
    loss: float
    l_d: float
    f_pos: float
    f_neg: Optional[float]
    perplexity: float
    grad_norm: float

    def to_dict(self) -> Dict[str, object]:
        return asdict(self)


@dataclass
class TrainResult:
    trace: List[TraceRecord] = field(default_factory=list)
    steps: int = 0
    negatives_evaluated: int = 0
    phases: List[str] = field(default_factory=list)

    @property
    def final_perplexity(self) -> float:
        return self.trace[-1].perplexity if self.trace else float("nan")

    @property
    def losses(self) -> List[float]:
        return [r.loss for r in self.trace]


class Trainer:
    """
    Runs the curriculum over a dataset for one model.

    The batch order comes from `derive_rng(cfg.seed, "batches", epoch)`, so the
    same (seed, config, dataset) reproduces the loss trace and the parameters
    bit for bit.
    """

    def __init__(
        self,
        model: MMTGModel,
        cfg: TrainConfig,
        trace_path: Optional[Union[str, Path]] = None,
    ):
        cfg.validate()
        self.model = model
        self.cfg = cfg
        self.trace_path = Path(trace_path) if trace_path else None
        self.optimizer = Adam(model.parameters(), lr=cfg.lr, grad_clip=cfg.grad_clip)

    def _start_trace(self) -> None:
        if self.trace_path is None:
            return
        self.trace_path.parent.mkdir(parents=True, exist_ok=True)
        self.trace_path.write_text("", encoding="utf-8")

    def _record(self, result: TrainResult, record: TraceRecord) -> None:
        result.trace.append(record)
        if self.trace_path is not None:
            append_jsonl(self.trace_path, record.to_dict())

    def fit(self, dataset: Sequence[EPassage]) -> TrainResult:
        """
        Raises:
            ValidationError: If the dataset does not fit the model
            DivergenceError: On a non-finite loss
        """
        DataValidator(self.model.config).ensure_valid(dataset)
        self._start_trace()
        result = TrainResult()
        cfg = self.cfg
        current_phase: Optional[int] = None

        for epoch in range(cfg.epochs):
            index = phase_for_epoch(epoch, cfg)
            phase: CurriculumPhase = phase_at(index, cfg)
            if index != current_phase:
                current_phase = index
                result.phases.append(phase.describe())
                logger.info(f"Epoch {epoch}: entering phase {index} ({phase.describe()})")

            rng = derive_rng(cfg.seed, "batches", epoch)
            for batch in make_batches(dataset, phase, cfg, rng):
                self.optimizer.zero_grad()
                breakdown = total_loss(batch, self.model, cfg.lambda_reg)
                loss = breakdown.total.item()
                if not math.isfinite(loss):
                    logger.error(
                        f"Non-finite loss at step {result.steps} "
                        f"(contrastive={breakdown.contrastive}, L_D={breakdown.span_loss})"
                    )
                    raise DivergenceError(
                        f"loss became {loss} at step {result.steps}, epoch {epoch}"
                    )

                breakdown.total.backward()
                grad_norm = self.optimizer.step()
                result.negatives_evaluated += breakdown.negatives_evaluated
                result.steps += 1

                record = TraceRecord(
                    step=result.steps,
                    epoch=epoch,
                    phase=index,
                    loss=loss,
                    l_d=breakdown.span_loss,
                    f_pos=breakdown.f_pos,
                    f_neg=breakdown.f_neg,
                    perplexity=breakdown.perplexity,
                    grad_norm=grad_norm,
                )
                self._record(result, record)
                logger.info(
                    f"step {record.step} phase {index} loss {loss:.4f} "
                    f"L_D {record.l_d:.4f} ppl {record.perplexity:.3f}"
                )

                if cfg.max_steps is not None and result.steps >= cfg.max_steps:
                    logger.info(f"Reached max_steps={cfg.max_steps}")
                    return result

        return result


def train(
    dataset: Sequence[EPassage],
    model: MMTGModel,
    cfg: TrainConfig,
    trace_path: Optional[Union[str, Path]] = None,
    checkpoint_path: Optional[Union[str, Path]] = None,
) -> TrainResult:
    """Train ``model`` in place and optionally write its checkpoint."""
    result = Trainer(model, cfg, trace_path=trace_path).fit(dataset)
    if checkpoint_path is not None:
        model.save(checkpoint_path, seed=cfg.seed, train=cfg.to_dict(), steps=result.steps)
        logger.info(f"Saved checkpoint to {checkpoint_path} after {result.steps} steps")
    return result
