"""Model dimensions and structural ablation flags."""
from dataclasses import asdict, dataclass, field
from typing import Any, Dict

from src.utils.errors import ValidationError


@dataclass
class ModelFlags:
    """Structural variants of the full graph. All False / 1 is the full model."""

    no_span_attention: bool = False  # uniform α rows, no prior regulariser
    no_t_prompt: bool = False  # drop the topic prefix position
    no_image: bool = False  # zero the image channel inputs
    no_text: bool = False  # zero the text channel inputs
    sent_mul: bool = False  # w ⊙ e instead of w + e
    fusion_normalize: bool = False  # divide the fusion double sum by L²
    span_heads: int = 1

    def active(self) -> Dict[str, Any]:
        """Flags that differ from the full model."""
        defaults = ModelFlags()
        return {k: v for k, v in asdict(self).items() if v != getattr(defaults, k)}

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class ModelConfig:
    """Sizes of every model component."""

    L: int = 5
    d_e: int = 64
    d_h: int = 64
    d_m: int = 64
    vocab_size: int = 512
    n_layers: int = 2
    n_heads: int = 4
    n_positions: int = 64
    tie_embeddings: bool = False
    seed: int = 0
    flags: ModelFlags = field(default_factory=ModelFlags)

    def validate(self) -> None:
        """
        Raises:
            ValidationError: On non-positive sizes or indivisible head counts
        """
        for name in ("L", "d_e", "vocab_size", "n_layers", "n_heads", "n_positions"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("d_h", "d_m"):
            if getattr(self, name) < 2:
                raise ValidationError(f"{name} must be at least 2, got {getattr(self, name)}")
        if self.d_m % self.n_heads:
            raise ValidationError(f"d_m={self.d_m} is not divisible by n_heads={self.n_heads}")
        if self.flags.span_heads < 1:
            raise ValidationError(f"span_heads must be at least 1, got {self.flags.span_heads}")

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["flags"] = self.flags.to_dict()
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ModelConfig":
        values = dict(data)
        flags = ModelFlags(**values.pop("flags", {}))
        return cls(flags=flags, **values)
