"""
Spanning influence: each input step's state is split across the L output
positions by a learned attention row, pulled toward a Gaussian prior centred on
the step's own position.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Tuple

import numpy as np

from src.autodiff import functional as F
from src.autodiff.tensor import Tensor, as_tensor, parameter
from src.utils.errors import DimensionError, ValidationError


@dataclass
class SpanParams:
    """Projection d_h → L; with several heads, shape (H, d_h, L) and α is the head mean."""

    weight: Tensor

    @property
    def heads(self) -> int:
        return self.weight.shape[0] if self.weight.ndim == 3 else 1

    @property
    def length(self) -> int:
        return self.weight.shape[-1]

    @classmethod
    def initialize(
        cls, rng: np.random.Generator, d_h: int, length: int, heads: int = 1
    ) -> "SpanParams":
        bound = 1.0 / np.sqrt(d_h)
        shape = (d_h, length) if heads == 1 else (heads, d_h, length)
        return cls(weight=parameter(rng.uniform(-bound, bound, shape)))

    def tensors(self) -> Iterator[Tuple[str, Tensor]]:
        yield "weight", self.weight


def uniform_alpha(batch_shape: Tuple[int, ...], length: int) -> Tensor:
    """Fixed α with every row 1/L."""
    return Tensor(np.full(batch_shape + (length, length), 1.0 / length))


def split_states(states: Tensor, alpha: Tensor) -> Tensor:
    """partials[..., j, k, :] = α[..., j, k] · states[..., j, :]."""
    lead = states.shape[:-2]
    length, dim = states.shape[-2:]
    return F.reshape(alpha, alpha.shape + (1,)) * F.reshape(states, lead + (length, 1, dim))


def span_attention(states: Tensor, params: SpanParams) -> Tuple[Tensor, Tensor]:
    """
    α_j = softmax(h_j · W) and h_{j,k} = α_{j,k} h_j.

    Args:
        states: Channel states (L, d_h) or (B, L, d_h)
        params: Projection weights

    Returns:
        (alpha (…, L, L), partials (…, L, L, d_h))

    Raises:
        DimensionError: If states do not fit W
    """
    states = as_tensor(states)
    if states.ndim < 2:
        raise DimensionError("span_attention expects (L, d_h) states", states.shape)
    length, dim = states.shape[-2:]
    if params.weight.shape[-2] != dim or params.length != length:
        raise DimensionError(
            "span projection does not fit the states", states.shape, params.weight.shape,
        )

    if params.heads == 1:
        alpha = F.softmax(F.matmul(states, params.weight), axis=-1)
    else:
        lead = states.shape[:-2]
        per_head = F.softmax(
            F.matmul(F.reshape(states, lead + (1, length, dim)), params.weight), axis=-1,
        )
        alpha = F.mean(per_head, axis=-3)
    return alpha, split_states(states, alpha)


@lru_cache(maxsize=None)
def _prior_rows(length: int) -> np.ndarray:
    positions = np.arange(1, length + 1, dtype=np.float64)
    weights = np.exp(-0.5 * (positions[None, :] - positions[:, None]) ** 2)
    return weights / weights.sum(axis=1, keepdims=True)


def gaussian_prior(length: int) -> np.ndarray:
    """
    Row j (1-indexed) is N(j, 1) discretised over positions 1..L and renormalised.

    Raises:
        ValidationError: If length < 1
    """
    if length < 1:
        raise ValidationError(f"prior length must be at least 1, got {length}")
    return _prior_rows(length).copy()


def span_regularizer(alpha_image: Tensor, alpha_text: Tensor, prior: np.ndarray) -> Tensor:
    """
    L_D = (1/2L) Σ_channels Σ_j KL(α_j ‖ γ(j)), averaged over any batch axis.

    Raises:
        DimensionError: If the matrices are not L × L
        ValidationError: If a row is not normalised
    """
    alpha_image, alpha_text = as_tensor(alpha_image), as_tensor(alpha_text)
    length = prior.shape[0]
    for alpha in (alpha_image, alpha_text):
        if alpha.shape[-2:] != prior.shape:
            raise DimensionError("attention does not match the prior", alpha.shape, prior.shape)

    total = None
    for alpha in (alpha_image, alpha_text):
        target = F.broadcast_to(Tensor(prior), alpha.shape)
        per_row = F.kl_divergence(alpha, target)
        channel = F.sum(per_row, axis=-1)
        total = channel if total is None else total + channel
    return F.mean(total * (1.0 / (2 * length)))
