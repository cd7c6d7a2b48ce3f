"""
Differentiable primitives.

Each primitive is a `Function` with an explicit backward; the public helpers
below wrap constants, check shapes and call `Function.apply`. Composite
operations (layer norm, GRU cell) live in layers.py and are built from these.
"""

import math
from typing import Any, Optional, Sequence, Tuple, Union

import numpy as np

from src.autodiff.tensor import DTYPE, ArrayLike, Function, Tensor, as_tensor, unbroadcast
from src.utils.errors import DimensionError, ValidationError

Axis = Optional[Union[int, Tuple[int, ...]]]

KL_FLOOR = 1e-8
NORMALIZATION_TOLERANCE = 1e-6


# ============================================================================
# Elementwise arithmetic
# ============================================================================


class Add(Function):
    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return a + b

    def backward(self, grad: np.ndarray):
        return grad, grad


class Sub(Function):
    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return a - b

    def backward(self, grad: np.ndarray):
        return grad, -grad


class Mul(Function):
    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        self.a, self.b = a, b
        return a * b

    def backward(self, grad: np.ndarray):
        return grad * self.b, grad * self.a


class Div(Function):
    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        self.a, self.b = a, b
        return a / b

    def backward(self, grad: np.ndarray):
        return grad / self.b, -grad * self.a / (self.b * self.b)


class Neg(Function):
    def forward(self, a: np.ndarray) -> np.ndarray:
        return -a

    def backward(self, grad: np.ndarray):
        return (-grad,)


class Power(Function):
    """x ** p for a constant real exponent."""

    def forward(self, a: np.ndarray, exponent: float) -> np.ndarray:
        self.a, self.exponent = a, exponent
        return a**exponent

    def backward(self, grad: np.ndarray):
        return (grad * self.exponent * self.a ** (self.exponent - 1),)


class Exp(Function):
    def forward(self, a: np.ndarray) -> np.ndarray:
        self.out = np.exp(a)
        return self.out

    def backward(self, grad: np.ndarray):
        return (grad * self.out,)


class Log(Function):
    def forward(self, a: np.ndarray) -> np.ndarray:
        self.a = a
        return np.log(a)

    def backward(self, grad: np.ndarray):
        return (grad / self.a,)


class Tanh(Function):
    def forward(self, a: np.ndarray) -> np.ndarray:
        self.out = np.tanh(a)
        return self.out

    def backward(self, grad: np.ndarray):
        return (grad * (1.0 - self.out * self.out),)


class Sigmoid(Function):
    def forward(self, a: np.ndarray) -> np.ndarray:
        # tanh form is stable for large |a|
        self.out = 0.5 * (1.0 + np.tanh(0.5 * a))
        return self.out

    def backward(self, grad: np.ndarray):
        return (grad * self.out * (1.0 - self.out),)


class LogSigmoid(Function):
    """ln σ(x) = −softplus(−x)."""

    def forward(self, a: np.ndarray) -> np.ndarray:
        self.a = a
        return -np.logaddexp(0.0, -a)

    def backward(self, grad: np.ndarray):
        return (grad * 0.5 * (1.0 - np.tanh(0.5 * self.a)),)


# ============================================================================
# Linear algebra and reductions
# ============================================================================


class MatMul(Function):
    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        self.a, self.b = a, b
        return np.matmul(a, b)

    def backward(self, grad: np.ndarray):
        if self.a.ndim == 1 and self.b.ndim == 1:
            return grad * self.b, grad * self.a
        a2 = self.a[None, :] if self.a.ndim == 1 else self.a
        b2 = self.b[:, None] if self.b.ndim == 1 else self.b
        g2 = grad
        if self.a.ndim == 1:
            g2 = np.expand_dims(g2, -2)
        if self.b.ndim == 1:
            g2 = np.expand_dims(g2, -1)

        grad_a = np.matmul(g2, np.swapaxes(b2, -1, -2))
        grad_b = np.matmul(np.swapaxes(a2, -1, -2), g2)

        grad_a = unbroadcast(grad_a, a2.shape).reshape(self.a.shape)
        grad_b = unbroadcast(grad_b, b2.shape).reshape(self.b.shape)
        return grad_a, grad_b


class Sum(Function):
    def forward(self, a: np.ndarray, axis: Axis = None, keepdims: bool = False) -> np.ndarray:
        self.in_shape, self.axis, self.keepdims = a.shape, axis, keepdims
        return np.sum(a, axis=axis, keepdims=keepdims)

    def backward(self, grad: np.ndarray):
        if self.axis is not None and not self.keepdims:
            axes = self.axis if isinstance(self.axis, tuple) else (self.axis,)
            axes = tuple(ax % len(self.in_shape) for ax in axes)
            for ax in sorted(axes):
                grad = np.expand_dims(grad, ax)
        return (np.broadcast_to(grad, self.in_shape).copy(),)


class Reshape(Function):
    def forward(self, a: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
        self.in_shape = a.shape
        return a.reshape(shape)

    def backward(self, grad: np.ndarray):
        return (grad.reshape(self.in_shape),)


class Transpose(Function):
    def forward(self, a: np.ndarray, axes: Optional[Sequence[int]] = None) -> np.ndarray:
        self.axes = tuple(axes) if axes is not None else tuple(reversed(range(a.ndim)))
        return np.transpose(a, self.axes)

    def backward(self, grad: np.ndarray):
        return (np.transpose(grad, np.argsort(self.axes)),)


class BroadcastTo(Function):
    def forward(self, a: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
        return np.broadcast_to(a, shape).copy()

    def backward(self, grad: np.ndarray):
        return (grad,)


class GetItem(Function):
    def forward(self, a: np.ndarray, index: Any) -> np.ndarray:
        self.in_shape, self.index = a.shape, index
        return np.array(a[index], dtype=DTYPE)

    def backward(self, grad: np.ndarray):
        full = np.zeros(self.in_shape, dtype=DTYPE)
        np.add.at(full, self.index, grad)
        return (full,)


class Stack(Function):
    def forward(self, *arrays: np.ndarray, axis: int = 0) -> np.ndarray:
        self.axis = axis
        return np.stack(arrays, axis=axis)

    def backward(self, grad: np.ndarray):
        count = grad.shape[self.axis]
        return tuple(np.take(grad, i, axis=self.axis) for i in range(count))


class Concat(Function):
    def forward(self, *arrays: np.ndarray, axis: int = 0) -> np.ndarray:
        self.axis = axis
        self.bounds = np.cumsum([arr.shape[axis] for arr in arrays])[:-1]
        return np.concatenate(arrays, axis=axis)

    def backward(self, grad: np.ndarray):
        return tuple(np.split(grad, self.bounds, axis=self.axis))


# ============================================================================
# Normalised exponentials and divergences
# ============================================================================


class Softmax(Function):
    def forward(self, a: np.ndarray, axis: int = -1) -> np.ndarray:
        self.axis = axis
        shifted = a - np.max(a, axis=axis, keepdims=True)
        e = np.exp(shifted)
        self.out = e / np.sum(e, axis=axis, keepdims=True)
        return self.out

    def backward(self, grad: np.ndarray):
        inner = np.sum(grad * self.out, axis=self.axis, keepdims=True)
        return (self.out * (grad - inner),)


class LogSoftmax(Function):
    def forward(self, a: np.ndarray, axis: int = -1) -> np.ndarray:
        self.axis = axis
        shifted = a - np.max(a, axis=axis, keepdims=True)
        self.out = shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))
        return self.out

    def backward(self, grad: np.ndarray):
        total = np.sum(grad, axis=self.axis, keepdims=True)
        return (grad - np.exp(self.out) * total,)


class KLDivergence(Function):
    """Σ_k p_k ln(p_k / max(q_k, ε)) over the last axis, with 0·ln 0 = 0."""

    def forward(self, p: np.ndarray, q: np.ndarray, floor: float = KL_FLOOR) -> np.ndarray:
        self.p = p
        self.q_floored = np.maximum(q, floor)
        self.q_active = q >= floor
        positive = p > 0
        safe_p = np.where(positive, p, 1.0)
        self.log_ratio = np.where(positive, np.log(safe_p) - np.log(self.q_floored), 0.0)
        return np.sum(np.where(positive, p * self.log_ratio, 0.0), axis=-1)

    def backward(self, grad: np.ndarray):
        g = grad[..., None]
        grad_p = g * np.where(self.p > 0, self.log_ratio + 1.0, 0.0)
        grad_q = g * np.where(self.q_active, -self.p / self.q_floored, 0.0)
        return grad_p, grad_q


# ============================================================================
# Public helpers
# ============================================================================


def add(a: Union[Tensor, ArrayLike], b: Union[Tensor, ArrayLike]) -> Tensor:
    return Add.apply(as_tensor(a), as_tensor(b))


def sub(a: Union[Tensor, ArrayLike], b: Union[Tensor, ArrayLike]) -> Tensor:
    return Sub.apply(as_tensor(a), as_tensor(b))


def mul(a: Union[Tensor, ArrayLike], b: Union[Tensor, ArrayLike]) -> Tensor:
    return Mul.apply(as_tensor(a), as_tensor(b))


def div(a: Union[Tensor, ArrayLike], b: Union[Tensor, ArrayLike]) -> Tensor:
    return Div.apply(as_tensor(a), as_tensor(b))


def neg(a: Tensor) -> Tensor:
    return Neg.apply(a)


def power(a: Tensor, exponent: float) -> Tensor:
    return Power.apply(a, exponent=float(exponent))


def exp(a: Tensor) -> Tensor:
    return Exp.apply(a)


def log(a: Tensor) -> Tensor:
    return Log.apply(a)


def tanh(a: Tensor) -> Tensor:
    return Tanh.apply(a)


def sigmoid(a: Tensor) -> Tensor:
    return Sigmoid.apply(a)


def log_sigmoid(a: Tensor) -> Tensor:
    return LogSigmoid.apply(a)


def gelu(a: Tensor) -> Tensor:
    """Tanh approximation of GELU; smooth everywhere."""
    inner = (a + (a**3) * 0.044715) * math.sqrt(2.0 / math.pi)
    return a * 0.5 * (tanh(inner) + 1.0)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """
    Matrix product with numpy broadcasting over leading dimensions.

    Raises:
        DimensionError: If the inner dimensions disagree
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim == 0 or b.ndim == 0:
        raise DimensionError("matmul needs at least 1-D operands", a.shape, b.shape)
    inner_a = a.shape[-1]
    inner_b = b.shape[0] if b.ndim == 1 else b.shape[-2]
    if inner_a != inner_b:
        raise DimensionError("matmul inner dimensions disagree", a.shape, b.shape)
    return MatMul.apply(a, b)


def sum(a: Tensor, axis: Axis = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    return Sum.apply(a, axis=axis, keepdims=keepdims)


def mean(a: Tensor, axis: Axis = None, keepdims: bool = False) -> Tensor:
    if axis is None:
        count = a.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        count = int(np.prod([a.shape[ax] for ax in axes]))
    return Sum.apply(a, axis=axis, keepdims=keepdims) * (1.0 / count)


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    return Reshape.apply(a, shape=tuple(shape))


def transpose(a: Tensor, axes: Optional[Sequence[int]] = None) -> Tensor:
    return Transpose.apply(a, axes=axes)


def swap_last(a: Tensor) -> Tensor:
    axes = list(range(a.ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return Transpose.apply(a, axes=axes)


def broadcast_to(a: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(shape)
    if a.shape == shape:
        return a
    return BroadcastTo.apply(a, shape=shape)


def getitem(a: Tensor, index: Any) -> Tensor:
    return GetItem.apply(a, index=index)


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    return Stack.apply(*(as_tensor(t) for t in tensors), axis=axis)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    return Concat.apply(*(as_tensor(t) for t in tensors), axis=axis)


def softmax(v: Tensor, axis: int = -1) -> Tensor:
    """
    Numerically stable softmax (max-subtraction) along ``axis``.

    Raises:
        DimensionError: If the reduced axis is empty
    """
    v = as_tensor(v)
    if v.ndim == 0 or v.shape[axis] == 0:
        raise DimensionError("softmax over an empty axis", v.shape)
    return Softmax.apply(v, axis=axis)


def log_softmax(v: Tensor, axis: int = -1) -> Tensor:
    v = as_tensor(v)
    if v.ndim == 0 or v.shape[axis] == 0:
        raise DimensionError("log_softmax over an empty axis", v.shape)
    return LogSoftmax.apply(v, axis=axis)


def kl_divergence(
    p: Union[Tensor, ArrayLike], q: Union[Tensor, ArrayLike], floor: float = KL_FLOOR
) -> Tensor:
    """
    KL(p ‖ q) along the last axis.

    Args:
        p: Probability vectors (last axis sums to 1)
        q: Reference distributions, same shape; entries below ``floor`` are floored
        floor: Lower bound applied to q before the logarithm

    Returns:
        Tensor: One non-negative value per distribution (shape p.shape[:-1])

    Raises:
        DimensionError: If the shapes differ
        ValidationError: If either input is not normalised within 1e-6
    """
    p, q = as_tensor(p), as_tensor(q)
    if p.shape != q.shape or p.ndim == 0:
        raise DimensionError("kl_divergence operands differ in shape", p.shape, q.shape)
    for name, dist in (("p", p), ("q", q)):
        if np.any(dist.data < 0) or not np.allclose(
            dist.data.sum(axis=-1), 1.0, rtol=0.0, atol=NORMALIZATION_TOLERANCE
        ):
            raise ValidationError(f"kl_divergence: {name} is not a normalised distribution")
    return KLDivergence.apply(p, q, floor=floor)
