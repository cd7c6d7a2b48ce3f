"""Composite layers built from the primitives: layer norm and the GRU cell."""

from dataclasses import dataclass
from typing import Iterator, Tuple

import numpy as np

from src.autodiff import functional as F
from src.autodiff.tensor import Tensor, as_tensor, parameter
from src.utils.errors import DimensionError

LAYER_NORM_EPS = 1e-5


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = LAYER_NORM_EPS) -> Tensor:
    """
    Normalise the last axis to zero mean and unit variance, then apply gain and bias.

    Args:
        x: Input of shape (..., d)
        gain: Scale of shape (d,)
        bias: Shift of shape (d,)
        eps: Variance floor

    Returns:
        Tensor: Same shape as x

    Raises:
        DimensionError: If d < 2 or gain/bias do not match d
    """
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    if x.ndim == 0 or x.shape[-1] < 2:
        raise DimensionError("layer_norm needs a feature axis of size >= 2", x.shape)
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise DimensionError(
            "layer_norm gain/bias must match the feature axis", x.shape, gain.shape, bias.shape,
        )

    centered = x - F.mean(x, axis=-1, keepdims=True)
    variance = F.mean(centered * centered, axis=-1, keepdims=True)
    normalized = centered * F.power(variance + eps, -0.5)
    return normalized * gain + bias


@dataclass
class GRUParams:
    """
    One GRU layer. Gate blocks are stacked along the last axis in the order
    [update z | reset r | candidate n].
    """

    w_input: Tensor  # (d_in, 3·d_h)
    w_hidden: Tensor  # (d_h, 3·d_h)
    bias: Tensor  # (3·d_h,)

    @property
    def input_size(self) -> int:
        return self.w_input.shape[0]

    @property
    def hidden_size(self) -> int:
        return self.w_hidden.shape[0]

    @classmethod
    def initialize(cls, rng: np.random.Generator, input_size: int, hidden_size: int) -> "GRUParams":
        """Uniform init in [−1/√d_h, +1/√d_h]."""
        bound = 1.0 / np.sqrt(hidden_size)
        return cls(
            w_input=parameter(rng.uniform(-bound, bound, (input_size, 3 * hidden_size))),
            w_hidden=parameter(rng.uniform(-bound, bound, (hidden_size, 3 * hidden_size))),
            bias=parameter(rng.uniform(-bound, bound, (3 * hidden_size,))),
        )

    def tensors(self) -> Iterator[Tuple[str, Tensor]]:
        yield "w_input", self.w_input
        yield "w_hidden", self.w_hidden
        yield "bias", self.bias


def gru_cell(x: Tensor, h_prev: Tensor, params: GRUParams) -> Tensor:
    """
    One GRU step.

    z = σ(x·W_z + h·U_z + b_z)
    r = σ(x·W_r + h·U_r + b_r)
    n = tanh(x·W_n + (r ⊙ h)·U_n + b_n)
    h = (1 − z) ⊙ h_prev + z ⊙ n

    Args:
        x: Input of shape (..., d_in)
        h_prev: Previous state of shape (..., d_h)
        params: Layer weights

    Returns:
        Tensor: New state of shape (..., d_h)

    Raises:
        DimensionError: If x or h_prev do not match the parameter shapes
    """
    x, h_prev = as_tensor(x), as_tensor(h_prev)
    d = params.hidden_size
    if x.shape[-1] != params.input_size:
        raise DimensionError("gru_cell input does not match w_input", x.shape, params.w_input.shape)
    if h_prev.shape[-1] != d:
        raise DimensionError(
            "gru_cell state does not match w_hidden", h_prev.shape, params.w_hidden.shape,
        )

    from_input = F.matmul(x, params.w_input) + params.bias
    from_hidden = F.matmul(h_prev, params.w_hidden[:, : 2 * d])

    z = F.sigmoid(from_input[..., :d] + from_hidden[..., :d])
    r = F.sigmoid(from_input[..., d : 2 * d] + from_hidden[..., d:])
    candidate = F.tanh(from_input[..., 2 * d :] + F.matmul(r * h_prev, params.w_hidden[:, 2 * d :]))

    return (1.0 - z) * h_prev + z * candidate
