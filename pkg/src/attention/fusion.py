"""2D attentive fusion of the topic and the two channels' partial states."""

from dataclasses import dataclass
from typing import Iterator, Tuple

import numpy as np

from src.autodiff import functional as F
from src.autodiff.tensor import Tensor, as_tensor, parameter
from src.utils.errors import DimensionError


@dataclass
class FusionParams:
    """One scoring vector per modality; logit_i = ⟨scorer_i, s_i⟩."""

    scorer_topic: Tensor  # (d_h,)
    scorer_image: Tensor  # (d_h,)
    scorer_text: Tensor  # (d_h,)

    @classmethod
    def initialize(cls, rng: np.random.Generator, d_h: int) -> "FusionParams":
        bound = 1.0 / np.sqrt(d_h)
        return cls(
            scorer_topic=parameter(rng.uniform(-bound, bound, d_h)),
            scorer_image=parameter(rng.uniform(-bound, bound, d_h)),
            scorer_text=parameter(rng.uniform(-bound, bound, d_h)),
        )

    def tensors(self) -> Iterator[Tuple[str, Tensor]]:
        yield "scorer_topic", self.scorer_topic
        yield "scorer_image", self.scorer_image
        yield "scorer_text", self.scorer_text


def _logit(s: Tensor, scorer: Tensor) -> Tensor:
    if s.ndim == 0 or s.shape[-1] != scorer.shape[0]:
        raise DimensionError("fusion input does not match its scorer", s.shape, scorer.shape)
    return F.matmul(s, scorer)


def modality_weights(
    logit_t: Tensor, logit_i: Tensor, logit_T: Tensor
) -> Tuple[Tensor, Tensor, Tensor]:
    """Softmax over the three modality logits, broadcast to a common shape."""
    shape = np.broadcast_shapes(logit_t.shape, logit_i.shape, logit_T.shape)
    stacked = F.stack([F.broadcast_to(x, shape) for x in (logit_t, logit_i, logit_T)], axis=-1)
    beta = F.softmax(stacked, axis=-1)
    return beta[..., 0], beta[..., 1], beta[..., 2]


def modality_attention(
    t_hat: Tensor, h_image: Tensor, h_text: Tensor, params: FusionParams
) -> Tuple[Tensor, Tensor, Tensor]:
    """
    (β_t, β_I, β_T) = softmax(⟨w_t, t̂⟩, ⟨w_I, h^I⟩, ⟨w_T, h^T⟩).

    Inputs are d_h vectors, or arrays of them that broadcast together.

    Raises:
        DimensionError: If any input is not d_h-dimensional
    """
    t_hat, h_image, h_text = as_tensor(t_hat), as_tensor(h_image), as_tensor(h_text)
    return modality_weights(
        _logit(t_hat, params.scorer_topic),
        _logit(h_image, params.scorer_image),
        _logit(h_text, params.scorer_text),
    )


def fuse(
    t_hat: Tensor,
    partials_image: Tensor,
    partials_text: Tensor,
    params: FusionParams,
    normalize: bool = False,
) -> Tensor:
    """
    e_k = Σ_j Σ_j' [β_t t̂ + β_I h^I_{j,k} + β_T h^T_{j',k}], β recomputed per (j, j', k).

    Args:
        t_hat: Projected topic (d_h,) or (B, d_h)
        partials_image: (…, L, L, d_h) indexed [j, k]
        partials_text: (…, L, L, d_h) indexed [j', k]
        params: Modality scorers
        normalize: Divide the double sum by L²

    Returns:
        Tensor: Experience embeddings (…, L, d_h)

    Raises:
        DimensionError: If shapes are inconsistent
    """
    t_hat, partials_image, partials_text = (
        as_tensor(t_hat),
        as_tensor(partials_image),
        as_tensor(partials_text),
    )
    if partials_image.shape != partials_text.shape or partials_image.ndim < 3:
        raise DimensionError(
            "partial states differ in shape", partials_image.shape, partials_text.shape,
        )
    length, length_k, dim = partials_image.shape[-3:]
    lead = partials_image.shape[:-3]
    if length != length_k or t_hat.shape != lead + (dim,):
        raise DimensionError("topic does not fit the partial states", t_hat.shape, partials_image.shape)

    # Axes of the β grid: (…, j, j', k).
    logit_t = F.reshape(_logit(t_hat, params.scorer_topic), lead + (1, 1, 1))
    logit_i = F.reshape(_logit(partials_image, params.scorer_image), lead + (length, 1, length))
    logit_T = F.reshape(_logit(partials_text, params.scorer_text), lead + (1, length, length))
    beta_t, beta_i, beta_T = modality_weights(logit_t, logit_i, logit_T)

    n = len(lead)
    coef_t = F.sum(beta_t, axis=(n, n + 1))  # (…, k)
    coef_i = F.sum(beta_i, axis=n + 1)  # (…, j, k)
    coef_T = F.sum(beta_T, axis=n)  # (…, j', k)

    topic_term = F.reshape(coef_t, lead + (length, 1)) * F.reshape(t_hat, lead + (1, dim))
    image_term = F.sum(F.reshape(coef_i, coef_i.shape + (1,)) * partials_image, axis=n)
    text_term = F.sum(F.reshape(coef_T, coef_T.shape + (1,)) * partials_text, axis=n)

    e = topic_term + image_term + text_term
    if normalize:
        e = e * (1.0 / (length * length))
    return e
