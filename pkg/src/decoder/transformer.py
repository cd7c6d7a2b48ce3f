"""
Experience-enhanced causal transformer decoder.

Every input position p of sentence k receives w_p + e_k (or w_p ⊙ e_k in the
sentence-multiplication variant), where e_k is the fused experience embedding
projected to the model width. An optional topic prefix occupies position 0.
"""

import logging
import math
from dataclasses import dataclass
from typing import Iterator, List, Optional, Tuple

import numpy as np

from src.autodiff import functional as F
from src.autodiff.layers import layer_norm
from src.autodiff.tensor import Tensor, as_tensor, parameter
from src.decoder.tokens import TokenBatch
from src.utils.errors import DimensionError, ValidationError

logger = logging.getLogger(__name__)

INIT_STD = 0.02
MASK_VALUE = -1e9


def _normal(rng: np.random.Generator, *shape: int) -> Tensor:
    return parameter(rng.normal(0.0, INIT_STD, shape))


@dataclass
class DecoderBlock:
    """Pre-norm block: x + Attn(LN(x)), then x + MLP(LN(x))."""

    ln1_gain: Tensor
    ln1_bias: Tensor
    w_qkv: Tensor  # (d_m, 3·d_m)
    b_qkv: Tensor
    w_attn_out: Tensor  # (d_m, d_m)
    b_attn_out: Tensor
    ln2_gain: Tensor
    ln2_bias: Tensor
    w_fc: Tensor  # (d_m, 4·d_m)
    b_fc: Tensor
    w_proj: Tensor  # (4·d_m, d_m)
    b_proj: Tensor

    @classmethod
    def initialize(cls, rng: np.random.Generator, d_m: int) -> "DecoderBlock":
        return cls(
            ln1_gain=parameter(np.ones(d_m)),
            ln1_bias=parameter(np.zeros(d_m)),
            w_qkv=_normal(rng, d_m, 3 * d_m),
            b_qkv=parameter(np.zeros(3 * d_m)),
            w_attn_out=_normal(rng, d_m, d_m),
            b_attn_out=parameter(np.zeros(d_m)),
            ln2_gain=parameter(np.ones(d_m)),
            ln2_bias=parameter(np.zeros(d_m)),
            w_fc=_normal(rng, d_m, 4 * d_m),
            b_fc=parameter(np.zeros(4 * d_m)),
            w_proj=_normal(rng, 4 * d_m, d_m),
            b_proj=parameter(np.zeros(d_m)),
        )

    def tensors(self) -> Iterator[Tuple[str, Tensor]]:
        for name in self.__dataclass_fields__:
            yield name, getattr(self, name)


@dataclass
class DecoderParams:
    """All decoder weights; `w_out` is None when the output projection is tied."""

    token_embedding: Tensor  # (V, d_m)
    position_embedding: Tensor  # (n_positions, d_m)
    experience_proj: Tensor  # (d_h, d_m), no bias so that e = 0 adds exactly 0
    topic_proj: Tensor  # (d_h, d_m)
    blocks: List[DecoderBlock]
    final_gain: Tensor
    final_bias: Tensor
    n_heads: int
    w_out: Optional[Tensor] = None  # (d_m, V)

    @property
    def vocab_size(self) -> int:
        return self.token_embedding.shape[0]

    @property
    def d_model(self) -> int:
        return self.token_embedding.shape[1]

    @property
    def n_positions(self) -> int:
        return self.position_embedding.shape[0]

    @property
    def tied(self) -> bool:
        return self.w_out is None

    @classmethod
    def initialize(
        cls,
        rng: np.random.Generator,
        vocab_size: int,
        d_m: int,
        d_h: int,
        n_layers: int,
        n_heads: int,
        n_positions: int,
        tie_embeddings: bool = False,
    ) -> "DecoderParams":
        """
        Raises:
            ValidationError: If d_m is not divisible by n_heads
        """
        if d_m % n_heads != 0:
            raise ValidationError(f"d_m={d_m} is not divisible by n_heads={n_heads}")
        return cls(
            token_embedding=_normal(rng, vocab_size, d_m),
            position_embedding=_normal(rng, n_positions, d_m),
            experience_proj=_normal(rng, d_h, d_m),
            topic_proj=_normal(rng, d_h, d_m),
            blocks=[DecoderBlock.initialize(rng, d_m) for _ in range(n_layers)],
            final_gain=parameter(np.ones(d_m)),
            final_bias=parameter(np.zeros(d_m)),
            n_heads=n_heads,
            w_out=None if tie_embeddings else _normal(rng, d_m, vocab_size),
        )

    def tensors(self) -> Iterator[Tuple[str, Tensor]]:
        yield "token_embedding", self.token_embedding
        yield "position_embedding", self.position_embedding
        yield "experience_proj", self.experience_proj
        yield "topic_proj", self.topic_proj
        for i, block in enumerate(self.blocks):
            for name, t in block.tensors():
                yield f"blocks.{i}.{name}", t
        yield "final_gain", self.final_gain
        yield "final_bias", self.final_bias
        if self.w_out is not None:
            yield "w_out", self.w_out


def causal_mask(length: int) -> np.ndarray:
    """0 on and below the diagonal, a large negative value above it."""
    return np.triu(np.full((length, length), MASK_VALUE), k=1)


def self_attention(x: Tensor, block: DecoderBlock, n_heads: int) -> Tensor:
    batch, length, d_m = x.shape
    head_dim = d_m // n_heads

    qkv = F.matmul(x, block.w_qkv) + block.b_qkv

    def heads(part: int) -> Tensor:
        chunk = qkv[:, :, part * d_m : (part + 1) * d_m]
        return F.transpose(F.reshape(chunk, (batch, length, n_heads, head_dim)), (0, 2, 1, 3))

    q, k, v = heads(0), heads(1), heads(2)
    scores = F.matmul(q, F.swap_last(k)) * (1.0 / math.sqrt(head_dim)) + causal_mask(length)
    weights = F.softmax(scores, axis=-1)
    context = F.transpose(F.matmul(weights, v), (0, 2, 1, 3))
    context = F.reshape(context, (batch, length, d_m))
    return F.matmul(context, block.w_attn_out) + block.b_attn_out


def block_forward(x: Tensor, block: DecoderBlock, n_heads: int) -> Tensor:
    x = x + self_attention(layer_norm(x, block.ln1_gain, block.ln1_bias), block, n_heads)
    hidden = F.gelu(F.matmul(layer_norm(x, block.ln2_gain, block.ln2_bias), block.w_fc) + block.b_fc)
    return x + F.matmul(hidden, block.w_proj) + block.b_proj


def decoder_logits(
    inputs: np.ndarray,
    segments: np.ndarray,
    params: DecoderParams,
    e: Optional[Tensor] = None,
    topic: Optional[Tensor] = None,
    sent_mul: bool = False,
) -> Tensor:
    """
    Unnormalised next-token scores for every input position.

    Args:
        inputs: Input token ids (B, T)
        segments: Sentence index per position (B, T), selects the row of e
        params: Decoder weights
        e: Experience embeddings (B, L, d_h); None runs the plain decoder
        topic: Projected topic (B, d_h) for the prefix position; None omits it
        sent_mul: Combine word and experience embeddings by elementwise product

    Returns:
        Tensor: Logits (B, T, V); the prefix position is not included

    Raises:
        ValidationError: If a token id is out of range or the sequence is too long
        DimensionError: If e or topic do not fit the batch
    """
    inputs = np.asarray(inputs, dtype=np.int64)
    segments = np.asarray(segments, dtype=np.int64)
    if inputs.ndim != 2 or inputs.shape != segments.shape:
        raise DimensionError(
            "inputs and segments must be matching (B, T) arrays", inputs.shape, segments.shape,
        )
    if inputs.size and (inputs.min() < 0 or inputs.max() >= params.vocab_size):
        raise ValidationError(f"token id out of range [0, {params.vocab_size})")
    batch, length = inputs.shape
    prefix = 1 if topic is not None else 0
    if length + prefix > params.n_positions:
        raise ValidationError(
            f"sequence of {length + prefix} positions exceeds n_positions={params.n_positions}"
        )

    x = params.token_embedding[inputs]
    if e is not None:
        e = as_tensor(e)
        if e.ndim != 3 or e.shape[0] != batch or e.shape[2] != params.experience_proj.shape[0]:
            raise DimensionError("experience embeddings do not fit the batch", e.shape, inputs.shape)
        if segments.max() >= e.shape[1]:
            raise ValidationError(f"segment index {segments.max()} has no experience embedding")
        projected = F.matmul(e, params.experience_proj)
        per_position = projected[np.arange(batch)[:, None], segments]
        x = x * per_position if sent_mul else x + per_position

    if topic is not None:
        topic = as_tensor(topic)
        if topic.shape != (batch, params.topic_proj.shape[0]):
            raise DimensionError("topic does not fit the batch", topic.shape, inputs.shape)
        prefix_embedding = F.reshape(F.matmul(topic, params.topic_proj), (batch, 1, params.d_model))
        x = F.concat([prefix_embedding, x], axis=1)

    x = x + params.position_embedding[: length + prefix]
    for block in params.blocks:
        x = block_forward(x, block, params.n_heads)
    x = layer_norm(x, params.final_gain, params.final_bias)

    w_out = F.swap_last(params.token_embedding) if params.tied else params.w_out
    logits = F.matmul(x, w_out)
    return logits[:, prefix:, :] if prefix else logits


def decode_train(
    e: Optional[Tensor],
    batch: TokenBatch,
    params: DecoderParams,
    topic: Optional[Tensor] = None,
    sent_mul: bool = False,
) -> Tensor:
    """
    Teacher-forced log-probabilities over the vocabulary, (B, T, V).

    See `decoder_logits` for the arguments.
    """
    if batch.targets.size and (batch.targets.min() < 0 or batch.targets.max() >= params.vocab_size):
        raise ValidationError(f"target token id out of range [0, {params.vocab_size})")
    logits = decoder_logits(batch.inputs, batch.segments, params, e=e, topic=topic, sent_mul=sent_mul)
    return F.log_softmax(logits, axis=-1)


def target_log_probs(logps: Tensor, batch: TokenBatch) -> Tensor:
    """Log-probability of each target token, (B, T); padding positions included."""
    b_idx = np.arange(batch.batch_size)[:, None]
    t_idx = np.arange(batch.length)[None, :]
    return logps[b_idx, t_idx, batch.targets]


def sequence_score(logps: Tensor, batch: TokenBatch) -> Tensor:
    """
    f = mean log-probability of the target tokens, one value per passage.

    Raises:
        ValidationError: If any passage has no target tokens
    """
    counts = batch.mask.sum(axis=1)
    if np.any(counts == 0):
        raise ValidationError("sequence_score of an empty target")
    picked = target_log_probs(logps, batch) * batch.mask
    return F.sum(picked, axis=1) * (1.0 / counts)


def perplexity(logps: Tensor, batch: TokenBatch) -> float:
    """Per-token perplexity over the whole batch."""
    picked = target_log_probs(logps, batch).data * batch.mask
    return float(np.exp(-picked.sum() / batch.mask.sum()))
