"""Three-phase curriculum over relevance levels, and batch assembly."""

import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterator, List, Sequence

import numpy as np

from src.schema.models import LEVELS, EPassage
from src.training.config import TrainConfig
from src.training.losses import TrainingBatch
from src.utils.errors import ValidationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CurriculumPhase:
    """Levels used as positives and as negatives during one phase."""

    positive_levels: FrozenSet[int]
    negative_levels: FrozenSet[int]

    def __post_init__(self):
        shared = self.positive_levels & self.negative_levels
        if shared:
            raise ValidationError(f"levels {sorted(shared)} are both positive and negative")
        if not (self.positive_levels | self.negative_levels) <= set(LEVELS):
            raise ValidationError("curriculum levels must lie in 1..5")

    @classmethod
    def of(cls, positives, negatives) -> "CurriculumPhase":
        return cls(frozenset(positives), frozenset(negatives))

    def describe(self) -> str:
        pos = ",".join(str(x) for x in sorted(self.positive_levels, reverse=True))
        neg = ",".join(str(x) for x in sorted(self.negative_levels, reverse=True)) or "-"
        return f"pos {{{pos}}} neg {{{neg}}}"


SCHEDULE = (
    CurriculumPhase.of({5}, {1}),
    CurriculumPhase.of({5, 4}, {1, 2}),
    CurriculumPhase.of({5, 4}, {1, 2, 3}),
)
MIXED_PHASE = SCHEDULE[-1]
POSITIVES_ONLY_PHASE = CurriculumPhase.of({5}, set())


def curriculum_schedule(phase_index: int) -> CurriculumPhase:
    """
    Phase 0 → ({5},{1}); phase 1 → ({5,4},{1,2}); phase 2 → ({5,4},{1,2,3}).

    Raises:
        ValidationError: If phase_index is not 0, 1 or 2
    """
    if phase_index not in (0, 1, 2):
        raise ValidationError(f"curriculum phase must be 0, 1 or 2, got {phase_index}")
    return SCHEDULE[phase_index]


def phase_for_epoch(epoch: int, cfg: TrainConfig) -> int:
    """Index of the phase that runs in ``epoch``; always 0 without a curriculum."""
    if not cfg.curriculum_enabled or not cfg.neg_enabled:
        return 0
    first, second = cfg.boundaries()
    return int(epoch >= first) + int(epoch >= second)


def phase_at(index: int, cfg: TrainConfig) -> CurriculumPhase:
    """Resolve the phase actually trained, honouring the no-curriculum and no-negative variants."""
    if not cfg.neg_enabled:
        return POSITIVES_ONLY_PHASE
    if not cfg.curriculum_enabled:
        return MIXED_PHASE
    return curriculum_schedule(index)


def group_by_sample(dataset: Sequence[EPassage]) -> Dict[str, Dict[int, EPassage]]:
    """
    Index records by sample id and level.

    Raises:
        ValidationError: On duplicate (sample_id, level) records or a sample missing a level
    """
    groups: Dict[str, Dict[int, EPassage]] = defaultdict(dict)
    for record in dataset:
        if record.level in groups[record.sample_id]:
            raise ValidationError(f"duplicate record for {record.key}")
        groups[record.sample_id][record.level] = record
    for sample_id, levels in groups.items():
        missing = sorted(set(LEVELS) - set(levels))
        if missing:
            raise ValidationError(f"sample {sample_id} is missing levels {missing}")
    return dict(groups)


def make_batches(
    dataset: Sequence[EPassage],
    phase: CurriculumPhase,
    cfg: TrainConfig,
    rng: np.random.Generator,
) -> Iterator[TrainingBatch]:
    """
    One epoch of batches for ``phase``.

    Every (sample_id, positive level) record appears exactly once, in seeded
    shuffled order. Each positive is paired with ``negatives_per_positive``
    records of the same sample drawn from the phase's negative levels.

    Raises:
        ValidationError: If a sample lacks one of the five levels
    """
    groups = group_by_sample(dataset)
    positives = [
        groups[sample_id][level]
        for sample_id in sorted(groups)
        for level in sorted(phase.positive_levels, reverse=True)
    ]
    negative_levels = sorted(phase.negative_levels, reverse=True)
    use_negatives = cfg.neg_enabled and bool(negative_levels)
    per_positive = min(cfg.negatives_per_positive, len(negative_levels)) if use_negatives else 0

    order = rng.permutation(len(positives))
    for start in range(0, len(order), cfg.batch_size):
        chosen = [positives[i] for i in order[start : start + cfg.batch_size]]
        negatives: List[List[EPassage]] = []
        for record in chosen:
            if per_positive:
                levels = rng.choice(negative_levels, size=per_positive, replace=False)
                negatives.append([groups[record.sample_id][int(level)] for level in levels])
            else:
                negatives.append([])
        yield TrainingBatch(positives=chosen, negatives=negatives)
