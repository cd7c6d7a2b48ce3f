"""Adam optimiser with bias correction."""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.autodiff.tensor import Tensor
from src.utils.errors import DimensionError, ValidationError

logger = logging.getLogger(__name__)

DEFAULT_BETAS = (0.9, 0.999)
DEFAULT_EPS = 1e-8


@dataclass
class AdamState:
    """First/second moment estimates and the step counter."""

    step: int = 0
    m: List[np.ndarray] = field(default_factory=list)
    v: List[np.ndarray] = field(default_factory=list)

    @classmethod
    def zeros_like(cls, params: Sequence[np.ndarray]) -> "AdamState":
        return cls(step=0, m=[np.zeros_like(p) for p in params], v=[np.zeros_like(p) for p in params])


def adam_step(
    params: Sequence[np.ndarray],
    grads: Sequence[np.ndarray],
    state: AdamState,
    lr: float,
    betas: Tuple[float, float] = DEFAULT_BETAS,
    eps: float = DEFAULT_EPS,
) -> Tuple[List[np.ndarray], AdamState]:
    """
    One Adam update; pure function of its inputs.

    Args:
        params: Current parameter arrays
        grads: Gradients, same shapes
        state: Moments from the previous step
        lr: Learning rate
        betas: Exponential decay rates of the two moments
        eps: Denominator floor

    Returns:
        (new params, new state)

    Raises:
        DimensionError: If any shapes disagree
    """
    if not (len(params) == len(grads) == len(state.m) == len(state.v)):
        raise DimensionError("adam_step received mismatched parameter/gradient/state counts")
    beta1, beta2 = betas
    step = state.step + 1

    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if not (p.shape == g.shape == m.shape == v.shape):
            raise DimensionError("adam_step shape mismatch", p.shape, g.shape, m.shape)
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1**step)
        v_hat = v / (1.0 - beta2**step)
        new_params.append(p - lr * m_hat / (np.sqrt(v_hat) + eps))
        new_m.append(m)
        new_v.append(v)

    return new_params, AdamState(step=step, m=new_m, v=new_v)


class Adam:
    """
    Stateful wrapper around `adam_step` for a fixed list of parameter tensors.

    Usage:
    ```python
    optimizer = Adam(model.parameters(), lr=1e-3)
    loss.backward()
    optimizer.step()
    optimizer.zero_grad()
    ```
    """

    def __init__(
        self,
        params: Sequence[Tensor],
        lr: float,
        betas: Tuple[float, float] = DEFAULT_BETAS,
        eps: float = DEFAULT_EPS,
        grad_clip: Optional[float] = None,
    ):
        if lr <= 0:
            raise ValidationError(f"learning rate must be positive, got {lr}")
        self.params = list(params)
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.grad_clip = grad_clip
        self.state = AdamState.zeros_like([p.data for p in self.params])

    def gradient_norm(self) -> float:
        total = 0.0
        for p in self.params:
            if p.grad is not None:
                total += float(np.sum(p.grad * p.grad))
        return float(np.sqrt(total))

    def step(self) -> float:
        """
        Apply one update from the accumulated `.grad` arrays.

        Returns:
            float: Global gradient norm before clipping
        """
        grads = [p.grad if p.grad is not None else np.zeros_like(p.data) for p in self.params]
        norm = self.gradient_norm()
        if self.grad_clip is not None and norm > self.grad_clip:
            scale = self.grad_clip / norm
            grads = [g * scale for g in grads]
            logger.debug(f"Clipped gradient norm {norm:.4f} to {self.grad_clip}")

        new_params, self.state = adam_step(
            [p.data for p in self.params], grads, self.state, self.lr, self.betas, self.eps
        )
        for p, data in zip(self.params, new_params):
            p.data = data
        return norm

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()
