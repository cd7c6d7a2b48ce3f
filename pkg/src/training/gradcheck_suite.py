"""
Finite-difference verification of every parameter group on a tiny model.

Each seed builds a fresh small model and a two-sample batch with one negative
per positive, then compares analytic and central-difference gradients of the
full training loss for each group. The "loss" group checks the objective head
(contrastive loss and span regulariser) against its own inputs.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from src.attention.span import gaussian_prior, span_regularizer
from src.autodiff import functional as F
from src.autodiff.gradcheck import DEFAULT_EPS, check_parameters, grad_check
from src.autodiff.tensor import Function
from src.model.config import ModelConfig, ModelFlags
from src.model.mmtg import PARAMETER_GROUPS, MMTGModel
from src.schema.models import (
    NUM_SPECIAL_TOKENS,
    EPassage,
    ExperiencePair,
    ExperienceSequence,
    Relevance,
)
from src.training.losses import TrainingBatch, contrastive_loss, total_loss
from src.utils.seeding import derive_rng

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-4
DEFAULT_SEEDS = 20
GROUPS = PARAMETER_GROUPS + ("loss",)


def tiny_config(seed: int, flags: Optional[ModelFlags] = None) -> ModelConfig:
    return ModelConfig(
        L=3,
        d_e=6,
        d_h=6,
        d_m=8,
        vocab_size=16,
        n_layers=1,
        n_heads=2,
        n_positions=24,
        seed=seed,
        flags=flags or ModelFlags(),
    )


def _unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.normal(size=dim)
    return v / np.linalg.norm(v)


def _sequence(
    rng: np.random.Generator, cfg: ModelConfig, relevance: Relevance
) -> ExperienceSequence:
    pairs = [
        ExperiencePair(_unit(rng, cfg.d_e), _unit(rng, cfg.d_e), relevance) for _ in range(cfg.L)
    ]
    return ExperienceSequence(topic_embedding=_unit(rng, cfg.d_e), pairs=pairs)


def tiny_batch(cfg: ModelConfig, rng: np.random.Generator, size: int = 2) -> TrainingBatch:
    """``size`` positives, each with one negative sharing its target."""
    positives, negatives = [], []
    for i in range(size):
        target = [
            rng.integers(NUM_SPECIAL_TOKENS, cfg.vocab_size, size=int(rng.integers(1, 3))).tolist()
            for _ in range(cfg.L)
        ]
        sample_id = f"g-{i}"
        positive = _sequence(rng, cfg, Relevance.RANK1)
        negative = _sequence(rng, cfg, Relevance.NEGATIVE)
        positives.append(EPassage(positive, target, level=5, sample_id=sample_id))
        negatives.append([EPassage(negative, target, level=1, sample_id=sample_id)])
    return TrainingBatch(positives=positives, negatives=negatives)


@dataclass
class GradcheckReport:
    """Maximum relative error per group over all seeds."""

    tolerance: float
    eps: float
    seeds: int
    errors: Dict[str, float] = field(default_factory=dict)
    worst: Dict[str, Tuple[int, str]] = field(default_factory=dict)

    def update(self, group: str, seed: int, name: str, error: float) -> None:
        if error >= self.errors.get(group, -1.0):
            self.errors[group] = error
            self.worst[group] = (seed, name)

    @property
    def passed(self) -> bool:
        return all(err < self.tolerance for err in self.errors.values())

    def failures(self) -> List[str]:
        return [g for g, err in self.errors.items() if err >= self.tolerance]

    def to_dict(self) -> Dict[str, object]:
        return {
            "tolerance": self.tolerance,
            "eps": self.eps,
            "seeds": self.seeds,
            "errors": dict(self.errors),
            "passed": self.passed,
        }


def check_objective(rng: np.random.Generator, length: int, eps: float) -> Dict[str, float]:
    """Gradient errors of the contrastive loss and span regulariser w.r.t. their inputs."""
    scores = rng.normal(scale=0.5, size=(2, 3)) - 1.0
    contrastive_err = grad_check(
        lambda s: F.sum(contrastive_loss(s[:, 0], s[:, 1:])),
        scores,
        eps,
    )

    prior = gaussian_prior(length)
    logits = rng.normal(size=(2, 2, length, length))
    span_err = grad_check(
        lambda z: span_regularizer(F.softmax(z[0], axis=-1), F.softmax(z[1], axis=-1), prior),
        logits,
        eps,
    )
    return {"loss.contrastive": contrastive_err, "loss.span_regularizer": span_err}


def run_gradcheck(
    seeds: int = DEFAULT_SEEDS,
    eps: float = DEFAULT_EPS,
    tolerance: float = DEFAULT_TOLERANCE,
    max_entries: Optional[int] = 6,
    groups: Iterable[str] = GROUPS,
    lambda_reg: float = 1.0,
    flags: Optional[ModelFlags] = None,
) -> GradcheckReport:
    """
    Run the per-group check for seeds 0..seeds-1.

    Args:
        seeds: Number of model / batch seeds
        eps: Central-difference step
        tolerance: Pass threshold on the maximum relative error
        max_entries: Entries sampled per tensor; None checks every entry
        groups: Subset of GROUPS to check
        lambda_reg: Weight of the span regulariser in the checked loss
        flags: Structural variant to check (defaults to the full model)
    """
    report = GradcheckReport(tolerance=tolerance, eps=eps, seeds=seeds)
    groups = tuple(groups)
    for seed in range(seeds):
        rng = derive_rng(seed, "gradcheck")
        cfg = tiny_config(seed, flags)
        model = MMTGModel.initialize(cfg)
        batch = tiny_batch(cfg, rng)
        named = model.named_parameters()
        by_group = model.parameter_groups()

        for group in groups:
            if group == "loss":
                for name, err in check_objective(rng, cfg.L, eps).items():
                    report.update(group, seed, name, err)
                continue
            params = {name: named[name] for name in by_group[group]}
            errors = check_parameters(
                lambda: total_loss(batch, model, lambda_reg).total,
                params,
                eps=eps,
                max_entries=max_entries,
                rng=rng,
            )
            for name, err in errors.items():
                report.update(group, seed, name, err)

        logger.info(
            f"gradcheck seed {seed}: "
            + ", ".join(f"{g}={report.errors.get(g, 0.0):.1e}" for g in groups)
        )

    for group in report.failures():
        seed, name = report.worst[group]
        logger.error(
            f"gradcheck failed for {group}: {report.errors[group]:.2e} at {name} (seed {seed})"
        )
    return report


class _HalvedSquare(Function):
    """x² with a backward pass that drops the factor 2."""

    def forward(self, x):
        self.x = x
        return x * x

    def backward(self, grad):
        return (grad * self.x,)


def self_test(eps: float = DEFAULT_EPS, tolerance: float = DEFAULT_TOLERANCE) -> float:
    """
    Confirm the checker catches a wrong backward pass.

    Returns:
        float: Relative error reported for the broken function; the checker
        works when this exceeds ``tolerance``
    """
    x = derive_rng(0, "gradcheck", "self-test").normal(size=(4,)) + 2.0
    error = grad_check(lambda t: F.sum(_HalvedSquare.apply(t)), x, eps)
    if error <= tolerance:
        logger.error(f"gradcheck self-test did not detect a wrong gradient (error {error:.2e})")
    else:
        logger.info(f"gradcheck self-test detected a wrong gradient (error {error:.2e})")
    return error
