"""Run configuration: one flat YAML mapping, validated, with environment overrides."""
import logging
import os
from pathlib import Path
from typing import Any, Dict, Literal, Mapping, Optional, Tuple, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator
from pydantic import ValidationError as PydanticValidationError

from src.decoder.sampling import GenerationConfig
from src.model.config import ModelConfig, ModelFlags
from src.schema.models import SynthConfig
from src.training.config import TrainConfig
from src.utils.errors import ValidationError

logger = logging.getLogger(__name__)

ENV_PREFIX = "MMTG_"

# Variant name → flag overrides, in the order the ablation table prints them
ABLATIONS: Dict[str, Dict[str, Any]] = {
    "full": {},
    "sent_mul": {"sent_mul": True},
    "no_span_attention": {"no_span_attention": True},
    "no_t_prompt": {"no_t_prompt": True},
    "no_image": {"no_image": True},
    "no_text": {"no_text": True},
    "no_cl": {"no_cl": True},
    "no_neg": {"no_neg": True},
}


class RunConfig(BaseModel):
    """Every knob of a run: corpus, model, training, decoding and ablation flags."""

    model_config = ConfigDict(extra="forbid", validate_assignment=True)

    seed: int = Field(0, ge=0)

    # corpus
    L: int = Field(5, ge=2)
    vocab_size: int = 512
    d_e: int = 64
    n_passages: int = 32
    concepts_per_step: int = 3
    noise_std: float = 0.02
    n_concepts: int = 64
    n_topics: int = 16
    sentence_len: int = 8
    test_size: int = 8

    # model
    d_h: int = 64
    d_m: int = 64
    n_layers: int = 2
    n_heads: int = 4
    n_positions: int = 64
    tie_embeddings: bool = False

    # training
    lr: float = 2e-3
    batch_size: int = 8
    epochs: int = 30
    lambda_reg: float = 1.0
    phase_boundaries: Optional[Tuple[int, int]] = None
    negatives_per_positive: int = 1
    grad_clip: Optional[float] = 1.0
    max_steps: Optional[int] = None

    # decoding / evaluation
    top_k: int = 10
    top_p: float = 0.7
    temperature: float = 1.1
    repetition_penalty: float = 1.5
    samples_per_input: int = 10
    max_len: int = 10
    paired_seeds: bool = True
    derangement: Literal["rotate", "random"] = "rotate"

    # ablations
    no_span_attention: bool = False
    no_t_prompt: bool = False
    no_image: bool = False
    no_text: bool = False
    sent_mul: bool = False
    no_cl: bool = False
    no_neg: bool = False
    fusion_normalize: bool = False
    span_heads: int = 1

    @field_validator("phase_boundaries", mode="before")
    @classmethod
    def _split_boundaries(cls, value):
        if isinstance(value, str):
            text = value.strip()
            if text.lower() in ("", "none", "null"):
                return None
            return tuple(int(part) for part in text.split(","))
        return value

    @field_validator("grad_clip", "max_steps", mode="before")
    @classmethod
    def _none_strings(cls, value):
        if isinstance(value, str) and value.strip().lower() in ("", "none", "null"):
            return None
        return value

    def to_synth_config(self) -> SynthConfig:
        return SynthConfig(
            L=self.L,
            vocab_size=self.vocab_size,
            d_e=self.d_e,
            n_passages=self.n_passages,
            concepts_per_step=self.concepts_per_step,
            noise_std=self.noise_std,
            seed=self.seed,
            n_concepts=self.n_concepts,
            n_topics=self.n_topics,
            sentence_len=self.sentence_len,
            test_size=self.test_size,
        )

    def to_model_flags(self) -> ModelFlags:
        return ModelFlags(
            no_span_attention=self.no_span_attention,
            no_t_prompt=self.no_t_prompt,
            no_image=self.no_image,
            no_text=self.no_text,
            sent_mul=self.sent_mul,
            fusion_normalize=self.fusion_normalize,
            span_heads=self.span_heads,
        )

    def to_model_config(self) -> ModelConfig:
        return ModelConfig(
            L=self.L,
            d_e=self.d_e,
            d_h=self.d_h,
            d_m=self.d_m,
            vocab_size=self.vocab_size,
            n_layers=self.n_layers,
            n_heads=self.n_heads,
            n_positions=self.n_positions,
            tie_embeddings=self.tie_embeddings,
            seed=self.seed,
            flags=self.to_model_flags(),
        )

    def to_train_config(self) -> TrainConfig:
        return TrainConfig(
            lr=self.lr,
            batch_size=self.batch_size,
            epochs=self.epochs,
            lambda_reg=self.lambda_reg,
            curriculum_enabled=not self.no_cl,
            neg_enabled=not self.no_neg,
            phase_boundaries=self.phase_boundaries,
            negatives_per_positive=self.negatives_per_positive,
            grad_clip=self.grad_clip,
            max_steps=self.max_steps,
            seed=self.seed,
        )

    def to_generation_config(self) -> GenerationConfig:
        return GenerationConfig(
            top_k=self.top_k,
            top_p=self.top_p,
            temperature=self.temperature,
            repetition_penalty=self.repetition_penalty,
            samples_per_input=self.samples_per_input,
            max_len=self.max_len,
            seed=self.seed,
        )

    def variant(self, name: str) -> "RunConfig":
        """Copy with the named ablation's flags switched on."""
        if name not in ABLATIONS:
            raise ValidationError(f"unknown ablation '{name}', expected one of {list(ABLATIONS)}")
        return self.updated(**ABLATIONS[name])

    def updated(self, **changes: Any) -> "RunConfig":
        """Validated copy with ``changes`` applied; None values are ignored."""
        changes = {k: v for k, v in changes.items() if v is not None}
        try:
            return RunConfig(**{**self.model_dump(), **changes})
        except PydanticValidationError as e:
            raise ValidationError(f"invalid run configuration: {e.errors()[0]['msg']}") from e


def env_overrides(environ: Optional[Mapping[str, str]] = None) -> Dict[str, str]:
    """`MMTG_<KEY>` variables naming a RunConfig field; keys are matched case-insensitively."""
    environ = os.environ if environ is None else environ
    by_upper = {name.upper(): name for name in RunConfig.model_fields}
    overrides = {}
    for key, value in environ.items():
        if key.startswith(ENV_PREFIX) and key[len(ENV_PREFIX):] in by_upper:
            overrides[by_upper[key[len(ENV_PREFIX):]]] = value
    return overrides


def build_run_config(
    values: Optional[Mapping[str, Any]] = None,
    environ: Optional[Mapping[str, str]] = None,
) -> RunConfig:
    """
    Raises:
        ValidationError: Listing the offending keys
    """
    merged = {**dict(values or {}), **env_overrides(environ)}
    try:
        return RunConfig(**merged)
    except PydanticValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()
        )
        raise ValidationError(f"invalid run configuration: {problems}") from e


def load_run_config(
    path: Optional[Union[str, Path]] = None,
    environ: Optional[Mapping[str, str]] = None,
) -> RunConfig:
    """
    Read a flat YAML mapping (or use defaults when path is None), then apply
    environment overrides.

    Raises:
        ValidationError: If the file is missing, not a flat mapping, or holds
            unknown or ill-typed keys
    """
    values: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ValidationError(f"config file not found: {path}")
        try:
            loaded = yaml.safe_load(path.read_text(encoding="utf-8"))
        except yaml.YAMLError as e:
            raise ValidationError(f"config file {path} is not valid YAML: {e}") from e
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ValidationError(f"config file {path} must hold a key: value mapping")
        nested = [key for key, value in loaded.items() if isinstance(value, dict)]
        if nested:
            raise ValidationError(f"config file {path} must be flat; nested keys {nested}")
        values = loaded
    config = build_run_config(values, environ)
    logger.debug(f"Run config: {config.model_dump()}")
    return config
