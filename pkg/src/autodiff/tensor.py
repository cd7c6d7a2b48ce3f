"""
Tensor - reverse-mode automatic differentiation over numpy arrays.

Every differentiable primitive is a `Function` subclass with a `forward` over
raw arrays and a `backward` returning one gradient per parent. Calling
`Tensor.backward()` linearises the graph into a `ComputationTape` and walks it
in reverse, visiting each node exactly once.

All data is float64.
"""

import contextlib
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.utils.errors import DimensionError, ValidationError

logger = logging.getLogger(__name__)

DTYPE = np.float64

ArrayLike = Union[np.ndarray, float, int, Sequence[float], Sequence[Sequence[float]]]

_grad_enabled = True


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Disable graph recording inside the block (inference, sampling)."""
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


def is_grad_enabled() -> bool:
    return _grad_enabled


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """
    Sum out broadcast dimensions so that ``grad`` matches ``shape``.

    Args:
        grad: Gradient shaped like a broadcast result
        shape: Shape of the operand that was broadcast

    Returns:
        np.ndarray: Gradient with exactly ``shape``
    """
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


class Function:
    """
    Base class of differentiable primitives.

    Subclasses implement `forward` on raw arrays and `backward`, which receives
    the gradient of the output and returns one gradient (or None) per parent,
    shaped like the output or like the parent; the tape unbroadcasts.
    """

    def __init__(self, *parents: "Tensor"):
        self.parents = parents

    def forward(self, *arrays: np.ndarray, **kwargs: Any) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no forward pass")

    def backward(self, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        raise NotImplementedError(f"{type(self).__name__} has no backward pass")

    @classmethod
    def apply(cls, *tensors: "Tensor", **kwargs: Any) -> "Tensor":
        """Run the forward pass and, when recording, link the result to its parents."""
        func = cls(*tensors)
        out_data = func.forward(*(t.data for t in tensors), **kwargs)

        requires_grad = _grad_enabled and any(t.requires_grad for t in tensors)
        return Tensor(out_data, requires_grad=requires_grad, _ctx=func if requires_grad else None)


@dataclass
class ComputationTape:
    """
    Ordered record of a graph: every node appears after all of its parents.

    `visits` counts how many times the backward walk touched each node, keyed by
    position on the tape.
    """

    nodes: List["Tensor"] = field(default_factory=list)
    visits: Dict[int, int] = field(default_factory=dict)

    @classmethod
    def record(cls, root: "Tensor") -> "ComputationTape":
        """Topologically order the graph ending at ``root`` (iterative DFS)."""
        order: List[Tensor] = []
        seen = set()
        stack: List[Tuple[Tensor, bool]] = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            if node._ctx is not None:
                for parent in node._ctx.parents:
                    if parent.requires_grad and id(parent) not in seen:
                        stack.append((parent, False))
        return cls(nodes=order)

    def __len__(self) -> int:
        return len(self.nodes)


class Tensor:
    """
    Dense float64 array that participates in reverse-mode differentiation.

    Leaves created by the user accumulate gradients in `.grad`; intermediate
    results carry the `Function` that produced them.
    """

    __array_priority__ = 100.0

    def __init__(
        self,
        data: ArrayLike,
        requires_grad: bool = False,
        _ctx: Optional[Function] = None,
    ):
        self.data = np.asarray(data, dtype=DTYPE)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self._ctx = _ctx

    # ------------------------------------------------------------------ #
    # Introspection
    # ------------------------------------------------------------------ #

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return self._ctx is None

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # ------------------------------------------------------------------ #
    # Backward
    # ------------------------------------------------------------------ #

    def backward(self, grad: Optional[ArrayLike] = None) -> ComputationTape:
        """
        Propagate gradients from this tensor to every leaf that requires them.

        Args:
            grad: Seed gradient; defaults to 1 for single-element tensors

        Returns:
            ComputationTape: The tape that was walked, with visit counts

        Raises:
            ValidationError: If no seed is given for a non-scalar tensor
        """
        if not self.requires_grad:
            raise ValidationError("backward() called on a tensor that does not require grad")
        if grad is None:
            if self.size != 1:
                raise ValidationError(
                    f"backward() needs an explicit gradient for non-scalar shape {self.shape}"
                )
            seed = np.ones_like(self.data)
        else:
            seed = np.asarray(grad, dtype=DTYPE)
            if seed.shape != self.shape:
                raise DimensionError("seed gradient shape differs from tensor", seed.shape, self.shape)

        tape = ComputationTape.record(self)
        pending: Dict[int, np.ndarray] = {id(self): seed}

        for index in range(len(tape.nodes) - 1, -1, -1):
            node = tape.nodes[index]
            tape.visits[index] = tape.visits.get(index, 0) + 1
            node_grad = pending.pop(id(node), None)
            if node_grad is None:
                continue

            if node._ctx is None:
                node.grad = node_grad.copy() if node.grad is None else node.grad + node_grad
                continue

            parent_grads = node._ctx.backward(node_grad)
            for parent, parent_grad in zip(node._ctx.parents, parent_grads):
                if parent_grad is None or not parent.requires_grad:
                    continue
                parent_grad = unbroadcast(np.asarray(parent_grad, dtype=DTYPE), parent.shape)
                key = id(parent)
                if key in pending:
                    pending[key] = pending[key] + parent_grad
                else:
                    pending[key] = parent_grad

        return tape

    # ------------------------------------------------------------------ #
    # Operators (implementations live in functional.py)
    # ------------------------------------------------------------------ #

    def __add__(self, other: Union["Tensor", ArrayLike]) -> "Tensor":
        from src.autodiff import functional as F

        return F.add(self, other)

    __radd__ = __add__

    def __sub__(self, other: Union["Tensor", ArrayLike]) -> "Tensor":
        from src.autodiff import functional as F

        return F.sub(self, other)

    def __rsub__(self, other: Union["Tensor", ArrayLike]) -> "Tensor":
        from src.autodiff import functional as F

        return F.sub(other, self)

    def __mul__(self, other: Union["Tensor", ArrayLike]) -> "Tensor":
        from src.autodiff import functional as F

        return F.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other: Union["Tensor", ArrayLike]) -> "Tensor":
        from src.autodiff import functional as F

        return F.div(self, other)

    def __rtruediv__(self, other: Union["Tensor", ArrayLike]) -> "Tensor":
        from src.autodiff import functional as F

        return F.div(other, self)

    def __neg__(self) -> "Tensor":
        from src.autodiff import functional as F

        return F.neg(self)

    def __pow__(self, exponent: float) -> "Tensor":
        from src.autodiff import functional as F

        return F.power(self, exponent)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        from src.autodiff import functional as F

        return F.matmul(self, other)

    def __getitem__(self, index: Any) -> "Tensor":
        from src.autodiff import functional as F

        return F.getitem(self, index)

    def sum(
        self, axis: Optional[Union[int, Tuple[int, ...]]] = None, keepdims: bool = False
    ) -> "Tensor":
        from src.autodiff import functional as F

        return F.sum(self, axis=axis, keepdims=keepdims)

    def mean(
        self, axis: Optional[Union[int, Tuple[int, ...]]] = None, keepdims: bool = False
    ) -> "Tensor":
        from src.autodiff import functional as F

        return F.mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape: int) -> "Tensor":
        from src.autodiff import functional as F

        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return F.reshape(self, shape)

    def transpose(self, *axes: int) -> "Tensor":
        from src.autodiff import functional as F

        return F.transpose(self, axes or None)


def as_tensor(value: Union[Tensor, ArrayLike]) -> Tensor:
    """Wrap constants; tensors pass through unchanged."""
    return value if isinstance(value, Tensor) else Tensor(value, requires_grad=False)


def parameter(data: ArrayLike) -> Tensor:
    """Create a trainable leaf."""
    return Tensor(np.array(data, dtype=DTYPE), requires_grad=True)
