"""Topic projector and the independent image / text GRU channel processors."""

import logging
from dataclasses import dataclass
from typing import Iterator, Tuple

import numpy as np

from src.autodiff import functional as F
from src.autodiff.layers import GRUParams, gru_cell, layer_norm
from src.autodiff.tensor import Tensor, as_tensor, parameter
from src.utils.errors import DimensionError, ValidationError

logger = logging.getLogger(__name__)


@dataclass
class TopicProjectorParams:
    """Linear d_e → d_h followed by layer norm."""

    weight: Tensor  # (d_e, d_h)
    bias: Tensor  # (d_h,)
    norm_gain: Tensor  # (d_h,)
    norm_bias: Tensor  # (d_h,)

    @classmethod
    def initialize(cls, rng: np.random.Generator, d_e: int, d_h: int) -> "TopicProjectorParams":
        bound = 1.0 / np.sqrt(d_e)
        return cls(
            weight=parameter(rng.uniform(-bound, bound, (d_e, d_h))),
            bias=parameter(np.zeros(d_h)),
            norm_gain=parameter(np.ones(d_h)),
            norm_bias=parameter(np.zeros(d_h)),
        )

    def tensors(self) -> Iterator[Tuple[str, Tensor]]:
        yield "weight", self.weight
        yield "bias", self.bias
        yield "norm_gain", self.norm_gain
        yield "norm_bias", self.norm_bias


def project_topic(v_t: Tensor, params: TopicProjectorParams) -> Tensor:
    """
    LayerNorm(v_t · W + b).

    Args:
        v_t: Topic embedding (d_e,) or a batch (B, d_e)

    Returns:
        Tensor: (d_h,) or (B, d_h)

    Raises:
        DimensionError: If v_t is not d_e-dimensional
    """
    v_t = as_tensor(v_t)
    if v_t.ndim == 0 or v_t.shape[-1] != params.weight.shape[0]:
        raise DimensionError("topic embedding does not match projector", v_t.shape, params.weight.shape)
    return layer_norm(F.matmul(v_t, params.weight) + params.bias, params.norm_gain, params.norm_bias)


@dataclass
class ChannelStates:
    """Normalised GRU outputs of both channels, (..., L, d_h) each."""

    image_states: Tensor
    text_states: Tensor


@dataclass
class ChannelParams:
    """
    Two GRU channels and their output norms. The channels never share a
    tensor: construction fails if any object appears in both.
    """

    image_gru: GRUParams
    image_norm_gain: Tensor
    image_norm_bias: Tensor
    text_gru: GRUParams
    text_norm_gain: Tensor
    text_norm_bias: Tensor

    def __post_init__(self):
        image_ids = {id(t) for _, t in self.image_tensors()}
        text_ids = {id(t) for _, t in self.text_tensors()}
        if image_ids & text_ids:
            raise ValidationError("image and text channels must not share parameters")

    @classmethod
    def initialize(cls, rng: np.random.Generator, d_e: int, d_h: int) -> "ChannelParams":
        return cls(
            image_gru=GRUParams.initialize(rng, d_e, d_h),
            image_norm_gain=parameter(np.ones(d_h)),
            image_norm_bias=parameter(np.zeros(d_h)),
            text_gru=GRUParams.initialize(rng, d_e, d_h),
            text_norm_gain=parameter(np.ones(d_h)),
            text_norm_bias=parameter(np.zeros(d_h)),
        )

    def image_tensors(self) -> Iterator[Tuple[str, Tensor]]:
        for name, t in self.image_gru.tensors():
            yield f"image_gru.{name}", t
        yield "image_norm.gain", self.image_norm_gain
        yield "image_norm.bias", self.image_norm_bias

    def text_tensors(self) -> Iterator[Tuple[str, Tensor]]:
        for name, t in self.text_gru.tensors():
            yield f"text_gru.{name}", t
        yield "text_norm.gain", self.text_norm_gain
        yield "text_norm.bias", self.text_norm_bias

    def tensors(self) -> Iterator[Tuple[str, Tensor]]:
        yield from self.image_tensors()
        yield from self.text_tensors()


def run_gru(inputs: Tensor, params: GRUParams) -> Tensor:
    """Unroll one GRU over the step axis of (..., L, d_in) from a zero state."""
    length = inputs.shape[-2]
    state = Tensor(np.zeros(inputs.shape[:-2] + (params.hidden_size,)))
    states = []
    for step in range(length):
        state = gru_cell(inputs[..., step, :], state, params)
        states.append(state)
    return F.stack(states, axis=-2)


def process_channels(V_I: Tensor, V_T: Tensor, params: ChannelParams) -> ChannelStates:
    """
    Encode the image and text sequences with their own GRU and layer norm.

    Args:
        V_I: Image embeddings (L, d_e) or (B, L, d_e)
        V_T: Text embeddings, same shape
        params: Channel weights

    Returns:
        ChannelStates: (…, L, d_h) per channel

    Raises:
        ValidationError: If the channels differ in length or are empty
        DimensionError: If inputs are not at least 2-D
    """
    V_I, V_T = as_tensor(V_I), as_tensor(V_T)
    if V_I.ndim < 2 or V_T.ndim < 2:
        raise DimensionError("channel inputs must be (L, d_e) or (B, L, d_e)", V_I.shape, V_T.shape)
    if V_I.shape[-2] != V_T.shape[-2]:
        raise ValidationError(f"image channel has {V_I.shape[-2]} steps, text channel {V_T.shape[-2]}")
    if V_I.shape[-2] == 0:
        raise ValidationError("experience sequence is empty")

    image = layer_norm(run_gru(V_I, params.image_gru), params.image_norm_gain, params.image_norm_bias)
    text = layer_norm(run_gru(V_T, params.text_gru), params.text_norm_gain, params.text_norm_bias)
    return ChannelStates(image_states=image, text_states=text)
