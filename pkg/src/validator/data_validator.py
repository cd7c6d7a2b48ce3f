"""Dataset validation against a model configuration."""
import logging
from typing import List, Optional, Sequence

from src.model.config import ModelConfig
from src.schema.models import EPassage, level_composition
from src.utils.errors import ValidationError

logger = logging.getLogger(__name__)


class DataValidator:
    """Validates dataset records against the dimensions a model was built with."""

    def __init__(self, config: ModelConfig, max_len: Optional[int] = None):
        self.config = config
        self.max_len = max_len

    def validate(self, passages: Sequence[EPassage], require_targets: bool = True) -> List[str]:
        """Validate records; returns one message per problem found."""
        errors = []
        cfg = self.config

        if not passages:
            errors.append("Dataset is empty")

        seen = set()
        for record in passages:
            label = record.key

            # Consistência do registro (passos, token ids)
            if record.target or require_targets:
                try:
                    record.validate(length=cfg.L, vocab_size=cfg.vocab_size)
                except ValidationError as e:
                    errors.append(f"{label}: {e}")
            elif record.input.length != cfg.L:
                errors.append(f"{label}: {record.input.length} experience steps, expected {cfg.L}")

            if not all(pair.is_unit_norm() for pair in record.input.pairs):
                errors.append(f"{label}: embeddings are not unit-norm")

            if require_targets and record.input.length == cfg.L:
                try:
                    expected = level_composition(record.level, cfg.L)
                except ValidationError:
                    expected = None
                if expected is not None and record.relevance_counts() != expected:
                    errors.append(
                        f"{label}: relevance mix {record.relevance_counts()} "
                        f"does not match level {record.level}"
                    )

            if record.input.dim != cfg.d_e:
                errors.append(f"{label}: embedding dim {record.input.dim}, model expects {cfg.d_e}")

            if record.target:
                positions = sum(len(sentence) + 1 for sentence in record.target)
                if positions + 1 > cfg.n_positions:
                    errors.append(
                        f"{label}: target needs {positions + 1} positions, "
                        f"decoder has {cfg.n_positions}"
                    )

            if record.key in seen:
                errors.append(f"{label}: duplicate record")
            seen.add(record.key)

        # Generated passages must also fit the position table
        if self.max_len is not None:
            needed = cfg.L * (self.max_len + 1) + 1
            if needed > cfg.n_positions:
                errors.append(
                    f"Generation with max_len={self.max_len} needs {needed} positions, "
                    f"decoder has {cfg.n_positions}"
                )

        return errors

    def ensure_valid(self, passages: Sequence[EPassage], require_targets: bool = True) -> None:
        """
        Raises:
            ValidationError: Listing every problem found
        """
        errors = self.validate(passages, require_targets=require_targets)
        if errors:
            for message in errors[:10]:
                logger.error(message)
            raise ValidationError(f"{len(errors)} dataset problem(s), first: {errors[0]}")
