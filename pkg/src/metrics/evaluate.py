"""
Evaluation harness: generate with ordered and disordered experience inputs and
score BLEU against the references, Distinct over the ordered outputs and the
new-n-gram rate between the two output collections.
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np

from src.decoder.sampling import GenerationConfig
from src.metrics.ngrams import bleu_n, distinct_n, nnr
from src.model.mmtg import MMTGModel
from src.schema.models import EPassage, ExperienceSequence, PassageTokens
from src.utils.errors import ValidationError
from src.utils.seeding import derive_rng, derive_seed

logger = logging.getLogger(__name__)

DERANGEMENTS = ("rotate", "random")


@dataclass
class SampleScores:
    """Scores of one test input, averaged over its samples."""

    sample_id: str
    bleu1: float
    bleu2: float
    nnr1: float
    nnr2: float

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class EvalReport:
    bleu1: float
    bleu2: float
    distinct1: float
    distinct2: float
    nnr1: float
    nnr2: float
    samples_per_input: int
    seed: int
    per_sample: List[SampleScores] = field(default_factory=list)

    HEADLINE = ("bleu2", "distinct2", "nnr1", "nnr2")

    def headline(self) -> Dict[str, float]:
        return {name: getattr(self, name) for name in self.HEADLINE}

    def to_dict(self) -> Dict[str, Any]:
        data = {k: v for k, v in asdict(self).items() if k != "per_sample"}
        data["per_sample"] = [s.to_dict() for s in self.per_sample]
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "EvalReport":
        fields = {k: v for k, v in data.items() if k != "per_sample"}
        return cls(**fields, per_sample=[SampleScores(**s) for s in data.get("per_sample", [])])


def derange(sequence: ExperienceSequence, mode: str, seed: int, sample_id: str) -> ExperienceSequence:
    """
    Reorder the steps so that none stays in place.

    "rotate" shifts every step by one; "random" draws a seeded permutation
    without fixed points.
    """
    if mode not in DERANGEMENTS:
        raise ValidationError(f"derangement must be one of {DERANGEMENTS}, got '{mode}'")
    if sequence.length < 2:
        raise ValidationError("a derangement needs at least two steps")
    if mode == "rotate":
        return sequence.rotated()
    rng = derive_rng(seed, "derangement", sample_id)
    while True:
        order = rng.permutation(sequence.length)
        if not np.any(order == np.arange(sequence.length)):
            return sequence.permuted(order.tolist())


def generation_seeds(seed: int, sample_id: str, index: int, paired: bool) -> Tuple[int, int]:
    """(ordered, disordered) sampling seeds for one sample of one input."""
    if paired:
        shared = derive_seed(seed, "eval", sample_id, index)
        return shared, shared
    return (
        derive_seed(seed, "eval", sample_id, index, "ordered"),
        derive_seed(seed, "eval", sample_id, index, "disordered"),
    )


def passage_bleu(candidate: PassageTokens, reference: Sequence[Sequence[int]], n: int) -> float:
    """Sentence BLEU of each generated sentence against its reference sentence, averaged."""
    if not reference:
        raise ValidationError("reference passage is empty")
    scores = []
    for k, ref in enumerate(reference):
        hyp = candidate.sentences[k] if k < len(candidate.sentences) else []
        scores.append(bleu_n(hyp, [ref], n))
    return float(np.mean(scores))


def _safe(metric, *args) -> float:
    try:
        return metric(*args)
    except ValidationError as e:
        logger.warning(f"{metric.__name__} undefined ({e}); reporting 0.0")
        return 0.0


def sentences_of(passages: Sequence[PassageTokens]) -> List[List[int]]:
    return [sentence for p in passages for sentence in p.sentences]


def evaluate(
    model: MMTGModel,
    testset: Sequence[EPassage],
    gen_cfg: GenerationConfig,
    derangement: str = "rotate",
    paired_seeds: bool = True,
) -> EvalReport:
    """
    Score a model on held-out passages.

    Args:
        model: Trained model
        testset: Passages with reference targets
        gen_cfg: Decoding controls; `samples_per_input` generations per input
        derangement: "rotate" or "random" disordering of the input steps
        paired_seeds: Ordered and disordered generations share seed streams

    Raises:
        ValidationError: If the test set is empty or lacks references
    """
    gen_cfg.validate()
    if not testset:
        raise ValidationError("evaluation needs a non-empty test set")

    ordered_all: List[PassageTokens] = []
    disordered_all: List[PassageTokens] = []
    per_sample: List[SampleScores] = []
    bleu1_all, bleu2_all = [], []

    for passage in testset:
        if not passage.target:
            raise ValidationError(f"{passage.sample_id} has no reference passage")
        disordered_input = derange(passage.input, derangement, gen_cfg.seed, passage.sample_id)

        ordered, disordered = [], []
        for index in range(gen_cfg.samples_per_input):
            seed_x, seed_y = generation_seeds(gen_cfg.seed, passage.sample_id, index, paired_seeds)
            ordered.append(model.generate(passage.input, gen_cfg, seed=seed_x))
            disordered.append(model.generate(disordered_input, gen_cfg, seed=seed_y))

        b1 = [passage_bleu(p, passage.target, 1) for p in ordered]
        b2 = [passage_bleu(p, passage.target, 2) for p in ordered]
        bleu1_all.extend(b1)
        bleu2_all.extend(b2)
        x, y = sentences_of(ordered), sentences_of(disordered)
        scores = SampleScores(
            sample_id=passage.sample_id,
            bleu1=float(np.mean(b1)),
            bleu2=float(np.mean(b2)),
            nnr1=_safe(nnr, x, y, 1),
            nnr2=_safe(nnr, x, y, 2),
        )
        per_sample.append(scores)
        ordered_all.extend(ordered)
        disordered_all.extend(disordered)
        logger.info(
            f"Evaluated {passage.sample_id}: BLEU-2 {scores.bleu2:.4f} NNR-2 {scores.nnr2:.4f}"
        )

    x_all, y_all = sentences_of(ordered_all), sentences_of(disordered_all)
    return EvalReport(
        bleu1=float(np.mean(bleu1_all)),
        bleu2=float(np.mean(bleu2_all)),
        distinct1=_safe(distinct_n, x_all, 1),
        distinct2=_safe(distinct_n, x_all, 2),
        nnr1=_safe(nnr, x_all, y_all, 1),
        nnr2=_safe(nnr, x_all, y_all, 2),
        samples_per_input=gen_cfg.samples_per_input,
        seed=gen_cfg.seed,
        per_sample=per_sample,
    )
