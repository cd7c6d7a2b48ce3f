"""Finite-difference gradient oracle."""

import logging
from typing import Callable, Dict, Mapping, Optional

import numpy as np

from src.autodiff.tensor import DTYPE, ArrayLike, Tensor, no_grad, parameter
from src.utils.errors import ValidationError

logger = logging.getLogger(__name__)

DEFAULT_EPS = 1e-4
MIN_EPS = 1e-6
MAX_EPS = 1e-3

# Gradients smaller than this are compared on an absolute scale.
MAGNITUDE_FLOOR = 1e-3


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """
    max_i |a_i - n_i| / max(|a_i|, |n_i|, MAGNITUDE_FLOOR); 0.0 for empty arrays.

    This is not the plain relative error max|a - n| / max(|a|, |n|): entries where
    both gradients are below the floor are scored as |a - n| / 1e-3. Above the floor
    the two definitions agree.
    """
    if analytic.size == 0:
        return 0.0
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), MAGNITUDE_FLOOR)
    return float(np.max(np.abs(analytic - numeric) / scale))


def _scalar(out: Tensor) -> float:
    if out.size != 1:
        raise ValidationError(f"gradient check needs a scalar-valued function, got shape {out.shape}")
    return out.item()


def _check_eps(eps: float) -> None:
    if not MIN_EPS <= eps <= MAX_EPS:
        raise ValidationError(f"eps must lie in [{MIN_EPS}, {MAX_EPS}], got {eps}")


def grad_check(f: Callable[[Tensor], Tensor], x: ArrayLike, eps: float = DEFAULT_EPS) -> float:
    """
    Compare the reverse-mode gradient of ``f`` at ``x`` with central differences.

    Args:
        f: Scalar-valued function of one tensor
        x: Point of evaluation
        eps: Finite-difference step, in [1e-6, 1e-3]

    Returns:
        float: Maximum componentwise relative error

    Raises:
        ValidationError: If f is not scalar-valued or eps is out of range
    """
    _check_eps(eps)
    point = parameter(np.array(x, dtype=DTYPE))
    out = f(point)
    _scalar(out)

    if out.requires_grad:
        out.backward()
    analytic = point.grad if point.grad is not None else np.zeros_like(point.data)

    base = point.data.copy()
    numeric = np.zeros_like(base)
    with no_grad():
        for idx in np.ndindex(base.shape):
            shifted = base.copy()
            shifted[idx] += eps
            upper = _scalar(f(Tensor(shifted)))
            shifted[idx] -= 2 * eps
            lower = _scalar(f(Tensor(shifted)))
            numeric[idx] = (upper - lower) / (2 * eps)

    return relative_error(analytic, numeric)


def check_parameters(
    loss_fn: Callable[[], Tensor],
    params: Mapping[str, Tensor],
    eps: float = DEFAULT_EPS,
    max_entries: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> Dict[str, float]:
    """
    Gradient check of a closure over many parameter tensors.

    Each parameter is perturbed in place and restored. With ``max_entries``
    set, that many entries per tensor are sampled (``rng`` required).

    Args:
        loss_fn: Re-evaluates the scalar loss from the current parameter values
        params: Named trainable tensors
        eps: Finite-difference step
        max_entries: Entries checked per tensor; None checks all
        rng: Generator used to sample entries

    Returns:
        Dict[str, float]: Maximum relative error per parameter name
    """
    _check_eps(eps)
    if max_entries is not None and rng is None:
        raise ValidationError("check_parameters needs an rng when max_entries is set")

    for p in params.values():
        p.zero_grad()
    out = loss_fn()
    _scalar(out)
    if out.requires_grad:
        out.backward()

    errors: Dict[str, float] = {}
    for name, p in params.items():
        analytic_full = p.grad if p.grad is not None else np.zeros_like(p.data)
        flat_count = p.data.size
        if max_entries is None or max_entries >= flat_count:
            chosen = np.arange(flat_count)
        else:
            chosen = np.sort(rng.choice(flat_count, size=max_entries, replace=False))

        analytic = np.empty(len(chosen), dtype=DTYPE)
        numeric = np.empty(len(chosen), dtype=DTYPE)
        with no_grad():
            for i, flat_index in enumerate(chosen):
                idx = np.unravel_index(flat_index, p.data.shape)
                original = p.data[idx]
                p.data[idx] = original + eps
                upper = _scalar(loss_fn())
                p.data[idx] = original - eps
                lower = _scalar(loss_fn())
                p.data[idx] = original
                analytic[i] = analytic_full[idx]
                numeric[i] = (upper - lower) / (2 * eps)

        errors[name] = relative_error(analytic, numeric)
        logger.debug(f"grad check {name}: {len(chosen)} entries, max rel err {errors[name]:.2e}")

    for p in params.values():
        p.zero_grad()
    return errors
