"""
Full experience-to-text model: encoders, spanning influence, fusion and the
experience-conditioned decoder, with the structural ablation flags applied.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.attention.fusion import FusionParams, fuse
from src.attention.span import (
    SpanParams,
    gaussian_prior,
    span_attention,
    span_regularizer,
    split_states,
    uniform_alpha,
)
from src.autodiff.tensor import Tensor, no_grad
from src.decoder.checkpoint import load_checkpoint, save_checkpoint
from src.decoder.sampling import GenerationConfig, sample_passage
from src.decoder.tokens import TokenBatch
from src.decoder.transformer import DecoderParams, decode_train, sequence_score
from src.encoder.channels import (
    ChannelParams,
    TopicProjectorParams,
    process_channels,
    project_topic,
)
from src.model.config import ModelConfig
from src.schema.models import EPassage, ExperienceSequence, PassageTokens
from src.utils.errors import CheckpointError, DimensionError
from src.utils.seeding import derive_rng

logger = logging.getLogger(__name__)

PARAMETER_GROUPS = ("channel_gru", "topic_projector", "span", "fusion", "decoder")


@dataclass
class ModelParams:
    """Every learnable tensor of the model."""

    topic_projector: TopicProjectorParams
    channels: ChannelParams
    span_image: SpanParams
    span_text: SpanParams
    fusion: FusionParams
    decoder: DecoderParams

    @classmethod
    def initialize(cls, config: ModelConfig) -> "ModelParams":
        def rng(*keys):
            return derive_rng(config.seed, "init", *keys)

        d_e, d_h, heads = config.d_e, config.d_h, config.flags.span_heads
        return cls(
            topic_projector=TopicProjectorParams.initialize(rng("topic"), d_e, d_h),
            channels=ChannelParams.initialize(rng("channels"), d_e, d_h),
            span_image=SpanParams.initialize(rng("span", "image"), d_h, config.L, heads),
            span_text=SpanParams.initialize(rng("span", "text"), d_h, config.L, heads),
            fusion=FusionParams.initialize(rng("fusion"), d_h),
            decoder=DecoderParams.initialize(
                rng("decoder"),
                vocab_size=config.vocab_size,
                d_m=config.d_m,
                d_h=d_h,
                n_layers=config.n_layers,
                n_heads=config.n_heads,
                n_positions=config.n_positions,
                tie_embeddings=config.tie_embeddings,
            ),
        )

    def grouped(self) -> Iterator[Tuple[str, str, Tensor]]:
        """(group, qualified name, tensor) for every parameter, in a fixed order."""
        for name, t in self.topic_projector.tensors():
            yield "topic_projector", f"topic_projector.{name}", t
        for name, t in self.channels.tensors():
            yield "channel_gru", f"channels.{name}", t
        for name, t in self.span_image.tensors():
            yield "span", f"span.image.{name}", t
        for name, t in self.span_text.tensors():
            yield "span", f"span.text.{name}", t
        for name, t in self.fusion.tensors():
            yield "fusion", f"fusion.{name}", t
        for name, t in self.decoder.tensors():
            yield "decoder", f"decoder.{name}", t


@dataclass
class ExperienceEncoding:
    """Intermediate results of the encoder side for a batch."""

    e: Tensor  # (B, L, d_h)
    topic: Tensor  # (B, d_h)
    alpha_image: Tensor  # (B, L, L)
    alpha_text: Tensor  # (B, L, L)
    span_loss: Tensor  # scalar L_D, 0 without span attention


@dataclass
class PassageScores:
    """Decoder results for a batch of (input, target) pairs."""

    f: Tensor  # (B,) mean target log-probability
    log_probs: Tensor  # (B, T, V)
    batch: TokenBatch
    encoding: ExperienceEncoding


class MMTGModel:
    """
    Experience-to-passage generator.

    Usage:
    ```python
    model = MMTGModel.initialize(ModelConfig(L=5, vocab_size=512))
    scores = model.score(passages)        # differentiable f per passage
    text = model.generate(sequence, GenerationConfig(), seed=3)
    ```
    """

    def __init__(self, config: ModelConfig, params: ModelParams):
        self.config = config
        self.params = params
        self.prior = gaussian_prior(config.L)

    @classmethod
    def initialize(cls, config: ModelConfig) -> "MMTGModel":
        config.validate()
        logger.debug(f"Initialising model with {config.to_dict()}")
        return cls(config, ModelParams.initialize(config))

    @property
    def flags(self):
        return self.config.flags

    # ------------------------------------------------------------------ #
    # Parameters
    # ------------------------------------------------------------------ #

    def named_parameters(self) -> Dict[str, Tensor]:
        return {name: t for _, name, t in self.params.grouped()}

    def parameters(self) -> List[Tensor]:
        return list(self.named_parameters().values())

    def parameter_groups(self) -> Dict[str, List[str]]:
        groups: Dict[str, List[str]] = {g: [] for g in PARAMETER_GROUPS}
        for group, name, _ in self.params.grouped():
            groups[group].append(name)
        return groups

    def zero_grad(self) -> None:
        for t in self.parameters():
            t.zero_grad()

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.named_parameters().items()}

    def load_state_dict(self, arrays: Dict[str, np.ndarray]) -> None:
        """
        Raises:
            CheckpointError: On missing, unexpected or mis-shaped tensors
        """
        own = self.named_parameters()
        missing = [name for name in own if name not in arrays]
        unexpected = [name for name in arrays if name not in own]
        if missing or unexpected:
            raise CheckpointError(
                f"checkpoint does not fit model: missing {missing}, unexpected {unexpected}"
            )
        for name, t in own.items():
            if arrays[name].shape != t.shape:
                raise CheckpointError(
                    f"tensor '{name}' has shape {arrays[name].shape}, model expects {t.shape}"
                )
            t.data = np.array(arrays[name], dtype=np.float64)

    def save(self, path: Union[str, Path], **meta) -> Path:
        return save_checkpoint(path, self.state_dict(), {"model": self.config.to_dict(), **meta})

    @classmethod
    def load(cls, path: Union[str, Path]) -> "MMTGModel":
        """
        Raises:
            CheckpointError: If the file is unreadable or does not fit its recorded config
        """
        arrays, meta = load_checkpoint(path)
        if "model" not in meta:
            raise CheckpointError(f"{path} carries no model configuration")
        config = ModelConfig.from_dict(meta["model"])
        model = cls.initialize(config)
        model.load_state_dict(arrays)
        return model

    # ------------------------------------------------------------------ #
    # Forward
    # ------------------------------------------------------------------ #

    def input_arrays(
        self, sequences: Sequence[ExperienceSequence]
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Stack sequences into (B, d_e) topics and (B, L, d_e) image / text arrays."""
        if not sequences:
            raise DimensionError("empty batch of experience sequences")
        for seq in sequences:
            if seq.length != self.config.L or seq.dim != self.config.d_e:
                raise DimensionError(
                    "experience sequence does not fit the model",
                    (seq.length, seq.dim),
                    (self.config.L, self.config.d_e),
                )
        topics = np.stack([s.topic_embedding for s in sequences])
        images = np.stack([s.image_matrix() for s in sequences])
        texts = np.stack([s.text_matrix() for s in sequences])
        if self.flags.no_image:
            images = np.zeros_like(images)
        if self.flags.no_text:
            texts = np.zeros_like(texts)
        return topics, images, texts

    def encode(self, sequences: Sequence[ExperienceSequence]) -> ExperienceEncoding:
        """Topic projection, channel GRUs, spanning influence and fusion for a batch."""
        topics, images, texts = self.input_arrays(sequences)
        p = self.params

        topic = project_topic(Tensor(topics), p.topic_projector)
        states = process_channels(Tensor(images), Tensor(texts), p.channels)

        if self.flags.no_span_attention:
            alpha_image = uniform_alpha((len(sequences),), self.config.L)
            alpha_text = alpha_image
            partials_image = split_states(states.image_states, alpha_image)
            partials_text = split_states(states.text_states, alpha_text)
            span_loss = Tensor(0.0)
        else:
            alpha_image, partials_image = span_attention(states.image_states, p.span_image)
            alpha_text, partials_text = span_attention(states.text_states, p.span_text)
            span_loss = span_regularizer(alpha_image, alpha_text, self.prior)

        e = fuse(
            topic, partials_image, partials_text, p.fusion, normalize=self.flags.fusion_normalize
        )
        return ExperienceEncoding(e, topic, alpha_image, alpha_text, span_loss)

    def score_batch(
        self,
        sequences: Sequence[ExperienceSequence],
        targets: Sequence[Sequence[Sequence[int]]],
    ) -> PassageScores:
        """Teacher-forced f for each (input, target) pair."""
        if len(sequences) != len(targets):
            raise DimensionError(
                "inputs and targets differ in count", (len(sequences),), (len(targets),)
            )
        encoding = self.encode(sequences)
        batch = TokenBatch.from_targets(targets)
        log_probs = decode_train(
            encoding.e,
            batch,
            self.params.decoder,
            topic=None if self.flags.no_t_prompt else encoding.topic,
            sent_mul=self.flags.sent_mul,
        )
        return PassageScores(sequence_score(log_probs, batch), log_probs, batch, encoding)

    def score(self, passages: Sequence[EPassage]) -> PassageScores:
        return self.score_batch([p.input for p in passages], [p.target for p in passages])

    def generate(
        self,
        sequence: ExperienceSequence,
        cfg: GenerationConfig,
        seed: Optional[int] = None,
    ) -> PassageTokens:
        """Sample one passage for one input."""
        with no_grad():
            encoding = self.encode([sequence])
        topic = None if self.flags.no_t_prompt else encoding.topic.data[0]
        return sample_passage(
            encoding.e.data[0],
            self.params.decoder,
            cfg,
            seed=seed,
            topic=topic,
            sent_mul=self.flags.sent_mul,
        )
