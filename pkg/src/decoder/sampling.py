"""
Sampling stack: temperature, repetition penalty, top-k and nucleus filtering,
and the sentence-by-sentence passage generation loop.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Any, Iterable, List, Optional, Sequence

import numpy as np

from src.autodiff.tensor import Tensor, as_tensor, no_grad
from src.decoder.transformer import DecoderParams, decoder_logits
from src.schema.models import BOS_ID, PAD_ID, SEP_ID, PassageTokens
from src.utils.errors import DimensionError, ValidationError

logger = logging.getLogger(__name__)


@dataclass
class GenerationConfig:
    """Decoding controls; defaults k=10, p=0.7, T=1.1, penalty 1.5, 10 samples per input."""

    top_k: int = 10
    top_p: float = 0.7
    temperature: float = 1.1
    repetition_penalty: float = 1.5
    samples_per_input: int = 10
    max_len: int = 10
    seed: int = 0

    def validate(self) -> None:
        """
        Raises:
            ValidationError: On any out-of-range control
        """
        if self.top_k < 1:
            raise ValidationError(f"top_k must be at least 1, got {self.top_k}")
        if not 0.0 < self.top_p <= 1.0:
            raise ValidationError(f"top_p must lie in (0, 1], got {self.top_p}")
        if self.temperature <= 0:
            raise ValidationError(f"temperature must be positive, got {self.temperature}")
        if self.repetition_penalty < 1.0:
            raise ValidationError(f"repetition_penalty must be >= 1, got {self.repetition_penalty}")
        if self.samples_per_input < 1:
            raise ValidationError(f"samples_per_input must be at least 1, got {self.samples_per_input}")
        if self.max_len < 1:
            raise ValidationError(f"max_len must be at least 1, got {self.max_len}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "top_k": self.top_k,
            "top_p": self.top_p,
            "temperature": self.temperature,
            "repetition_penalty": self.repetition_penalty,
            "samples_per_input": self.samples_per_input,
            "max_len": self.max_len,
            "seed": self.seed,
        }


def apply_sampling_filters(
    logits: np.ndarray,
    history: Iterable[int],
    cfg: GenerationConfig,
    banned: Sequence[int] = (),
) -> np.ndarray:
    """
    Turn raw logits into the sampling distribution.

    Order: temperature → repetition penalty (ℓ/r if ℓ > 0, ℓ·r otherwise, for
    tokens in ``history``) → top-k → nucleus (keep a token while the mass ranked
    before it is below p) → renormalise. ``banned`` ids get zero probability. If
    nothing survives, the argmax of the raw logits is returned as a one-hot.

    Args:
        logits: Finite scores over the vocabulary
        history: Previously generated token ids
        cfg: Filter settings
        banned: Ids that may never be sampled here

    Returns:
        np.ndarray: Probabilities summing to 1
    """
    raw = np.asarray(logits, dtype=np.float64)
    if raw.ndim != 1 or raw.size == 0:
        raise DimensionError("sampling filters expect a non-empty logit vector", raw.shape)
    if not np.all(np.isfinite(raw)):
        raise ValidationError("logits must be finite")

    scores = raw / cfg.temperature
    seen = np.unique(np.fromiter(history, dtype=np.int64))
    if cfg.repetition_penalty != 1.0 and seen.size:
        values = scores[seen]
        penalty = cfg.repetition_penalty
        scores[seen] = np.where(values > 0, values / penalty, values * penalty)
    if len(banned):
        scores[np.asarray(banned, dtype=np.int64)] = -np.inf

    order = np.argsort(-scores, kind="stable")
    ranked = order[np.isfinite(scores[order])][: cfg.top_k]
    probs = np.zeros_like(scores)
    if ranked.size == 0:
        allowed = np.setdiff1d(np.arange(raw.size), np.asarray(banned, dtype=np.int64))
        pool = allowed if allowed.size else np.arange(raw.size)
        choice = pool[np.argmax(raw[pool])]
        logger.warning(f"every token was filtered out; falling back to argmax {choice}")
        probs[choice] = 1.0
        return probs

    weights = np.exp(scores[ranked] - scores[ranked[0]])
    weights /= weights.sum()
    mass_before = np.cumsum(weights) - weights
    nucleus = mass_before < cfg.top_p
    probs[ranked[nucleus]] = weights[nucleus]
    return probs / probs.sum()


def sample_passage(
    e: Tensor,
    params: DecoderParams,
    cfg: GenerationConfig,
    seed: Optional[int] = None,
    topic: Optional[Tensor] = None,
    sent_mul: bool = False,
) -> PassageTokens:
    """
    Generate L sentences, each conditioned on everything generated before it.

    PAD and BOS are never sampled; SEP is unavailable while a sentence is empty
    and forced once it holds ``max_len`` tokens.

    Args:
        e: Experience embeddings of one input (L, d_h)
        params: Decoder weights
        cfg: Sampling controls
        seed: Stream seed; defaults to cfg.seed
        topic: Projected topic (d_h,) for the prefix position, or None
        sent_mul: Multiplicative experience conditioning

    Returns:
        PassageTokens: L sentences of 1..max_len tokens, with the seed recorded
    """
    cfg.validate()
    e_data = as_tensor(e).data
    if e_data.ndim != 2:
        raise DimensionError("sample_passage expects (L, d_h) experience embeddings", e_data.shape)
    length = e_data.shape[0]
    needed = length * (cfg.max_len + 1) + (1 if topic is not None else 0)
    if needed > params.n_positions:
        raise ValidationError(
            f"{length} sentences of up to {cfg.max_len} tokens need {needed} positions, "
            f"decoder has {params.n_positions}"
        )

    seed = cfg.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    e_batch = Tensor(e_data[None])
    topic_batch = Tensor(as_tensor(topic).data[None]) if topic is not None else None

    inputs: List[int] = [BOS_ID]
    segments: List[int] = [0]
    sentences: List[List[int]] = [[]]
    history: List[int] = []

    with no_grad():
        while True:
            k = len(sentences) - 1
            current = sentences[-1]
            if len(current) >= cfg.max_len:
                token = SEP_ID
            else:
                logits = decoder_logits(
                    np.array([inputs]), np.array([segments]), params,
                    e=e_batch, topic=topic_batch, sent_mul=sent_mul,
                ).data[0, -1]
                banned = [PAD_ID, BOS_ID] if current else [PAD_ID, BOS_ID, SEP_ID]
                probs = apply_sampling_filters(logits, history, cfg, banned)
                token = int(rng.choice(probs.size, p=probs))

            if token == SEP_ID:
                if k == length - 1:
                    break
                sentences.append([])
                inputs.append(SEP_ID)
                segments.append(k + 1)
            else:
                current.append(token)
                history.append(token)
                inputs.append(token)
                segments.append(k)

    return PassageTokens(sentences=sentences, seed=seed)
