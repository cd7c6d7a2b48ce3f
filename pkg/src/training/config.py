"""Training hyperparameters."""
from dataclasses import asdict, dataclass
from typing import Any, Dict, Optional, Tuple

from src.utils.errors import ValidationError


@dataclass
class TrainConfig:
    """
    Optimisation and curriculum settings.

    `phase_boundaries` are the epochs at which phases 1 and 2 begin; None splits
    the epochs into equal thirds.
    """

    lr: float = 2e-3
    batch_size: int = 8
    epochs: int = 30
    lambda_reg: float = 1.0
    curriculum_enabled: bool = True
    neg_enabled: bool = True
    phase_boundaries: Optional[Tuple[int, int]] = None
    negatives_per_positive: int = 1
    grad_clip: Optional[float] = 1.0
    max_steps: Optional[int] = None
    seed: int = 0

    def validate(self) -> None:
        """
        Raises:
            ValidationError: On out-of-range values or decreasing phase boundaries
        """
        if self.lr <= 0:
            raise ValidationError(f"lr must be positive, got {self.lr}")
        if self.lambda_reg < 0:
            raise ValidationError(f"lambda_reg must be non-negative, got {self.lambda_reg}")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValidationError("batch_size and epochs must be positive")
        if self.negatives_per_positive < 1:
            raise ValidationError(
                f"negatives_per_positive must be at least 1, got {self.negatives_per_positive}"
            )
        if self.grad_clip is not None and self.grad_clip <= 0:
            raise ValidationError(f"grad_clip must be positive or None, got {self.grad_clip}")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValidationError(f"max_steps must be positive or None, got {self.max_steps}")
        if self.phase_boundaries is not None:
            first, second = self.phase_boundaries
            if not 0 <= first <= second <= self.epochs:
                raise ValidationError(
                    f"phase boundaries {self.phase_boundaries} must be non-decreasing "
                    f"within 0..{self.epochs}"
                )

    def boundaries(self) -> Tuple[int, int]:
        if self.phase_boundaries is not None:
            return tuple(self.phase_boundaries)
        return (self.epochs // 3, (2 * self.epochs) // 3)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        if self.phase_boundaries is not None:
            data["phase_boundaries"] = list(self.phase_boundaries)
        return data
