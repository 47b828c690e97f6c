"""
A numpy-backed tensor with reverse-mode differentiation.

Operations on tensors that require gradients record a graph node made of
the parent tensors and a function mapping the output gradient to the
parent gradients. `Tensor.backward` walks this graph in reverse
topological order, accumulates gradients into leaf tensors, and then
clears the graph.
"""

import threading
from collections.abc import Callable, Iterator, Sequence
from contextlib import contextmanager
from typing import Any

import numpy as np

from spectrans.core.errors import ContractError

type GradFn = Callable[[np.ndarray], Sequence[np.ndarray | None]]
"""
Maps the gradient of an operation's output to the gradients of its
parents (`None` for parents that are not differentiated).
"""


_state = threading.local()


def is_grad_enabled() -> bool:
    return getattr(_state, "grad_enabled", True)


@contextmanager
def no_grad() -> Iterator[None]:
    """
    Disable graph recording in the current thread.
    """
    previous = is_grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = previous


def unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """
    Sum a broadcast gradient back to the shape of an operand.
    """
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


class Tensor:
    """
    An n-dimensional float64 array with optional gradient.

    Attributes:
        values: The array of values.
        grad: Accumulated gradient (leaf tensors only), or `None` if no
            gradient was accumulated since the last reset.
        requires_grad: Whether operations involving this tensor are
            recorded for differentiation.
    """

    __array_priority__ = 100

    def __init__(
        self,
        values: Any,
        *,
        requires_grad: bool = False,
        _parents: tuple["Tensor", ...] = (),
        _grad_fn: GradFn | None = None,
    ):
        self.values: np.ndarray = np.asarray(values, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._grad_fn = _grad_fn

    def __repr__(self) -> str:
        rg = self.requires_grad
        return f"Tensor(shape={self.shape}, requires_grad={rg})"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def ndim(self) -> int:
        return self.values.ndim

    @property
    def is_leaf(self) -> bool:
        return self._grad_fn is None

    def item(self) -> float:
        return float(self.values.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.values

    def detach(self) -> "Tensor":
        return Tensor(self.values)

    def zero_grad(self) -> None:
        self.grad = None

    #####
    ##### Differentiation
    #####

    def _topological(self) -> list["Tensor"]:
        order: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))
        return order

    def backward(self) -> None:
        """
        Accumulate the gradient of this scalar into every leaf tensor
        that requires gradients, then clear the recorded graph.
        """
        if self.values.size != 1:
            raise ContractError(
                "non_scalar_loss", f"Cannot differentiate shape {self.shape}."
            )
        order = self._topological()
        grads: dict[int, np.ndarray] = {id(self): np.ones_like(self.values)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._grad_fn is None:
                if node.requires_grad:
                    prev = node.grad
                    node.grad = g.copy() if prev is None else prev + g
                continue
            for parent, pg in zip(node._parents, node._grad_fn(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg
        for node in order:
            if node._grad_fn is not None:
                node._parents = ()
                node._grad_fn = None
                node.requires_grad = False

    #####
    ##### Arithmetic
    #####

    def __add__(self, other: "TensorLike") -> "Tensor":
        o = as_tensor(other)
        return record(
            self.values + o.values,
            (self, o),
            lambda g: (unbroadcast(g, self.shape), unbroadcast(g, o.shape)),
        )

    def __radd__(self, other: "TensorLike") -> "Tensor":
        return self + other

    def __sub__(self, other: "TensorLike") -> "Tensor":
        o = as_tensor(other)
        return record(
            self.values - o.values,
            (self, o),
            lambda g: (unbroadcast(g, self.shape), unbroadcast(-g, o.shape)),
        )

    def __rsub__(self, other: "TensorLike") -> "Tensor":
        return as_tensor(other) - self

    def __mul__(self, other: "TensorLike") -> "Tensor":
        o = as_tensor(other)
        return record(
            self.values * o.values,
            (self, o),
            lambda g: (
                unbroadcast(g * o.values, self.shape),
                unbroadcast(g * self.values, o.shape),
            ),
        )

    def __rmul__(self, other: "TensorLike") -> "Tensor":
        return self * other

    def __truediv__(self, other: "TensorLike") -> "Tensor":
        o = as_tensor(other)
        return record(
            self.values / o.values,
            (self, o),
            lambda g: (
                unbroadcast(g / o.values, self.shape),
                unbroadcast(-g * self.values / o.values**2, o.shape),
            ),
        )

    def __rtruediv__(self, other: "TensorLike") -> "Tensor":
        return as_tensor(other) / self

    def __neg__(self) -> "Tensor":
        return record(-self.values, (self,), lambda g: (-g,))

    def __pow__(self, p: float) -> "Tensor":
        return record(
            self.values**p,
            (self,),
            lambda g: (g * p * self.values ** (p - 1),),
        )

    def __getitem__(self, idx: Any) -> "Tensor":
        def grad_fn(g: np.ndarray):
            out = np.zeros_like(self.values)
            np.add.at(out, idx, g)
            return (out,)

        return record(self.values[idx], (self,), grad_fn)

    #####
    ##### Reductions and shapes
    #####

    def sum(
        self, axis: int | tuple[int, ...] | None = None, keepdims: bool = False
    ) -> "Tensor":
        def grad_fn(g: np.ndarray):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, self.shape).copy(),)

        out = self.values.sum(axis, keepdims=keepdims)
        return record(out, (self,), grad_fn)

    def mean(
        self, axis: int | tuple[int, ...] | None = None, keepdims: bool = False
    ) -> "Tensor":
        total = self.values.size / max(
            np.asarray(self.values.sum(axis, keepdims=keepdims)).size, 1
        )
        return self.sum(axis, keepdims) / total

    def reshape(self, *shape: int) -> "Tensor":
        return record(
            self.values.reshape(*shape),
            (self,),
            lambda g: (g.reshape(self.shape),),
        )

    def abs(self) -> "Tensor":
        return record(
            np.abs(self.values), (self,), lambda g: (g * np.sign(self.values),)
        )

    def exp(self) -> "Tensor":
        out = np.exp(self.values)
        return record(out, (self,), lambda g: (g * out,))

    def log(self) -> "Tensor":
        return record(
            np.log(self.values), (self,), lambda g: (g / self.values,)
        )


type TensorLike = Tensor | np.ndarray | float | int


def as_tensor(x: TensorLike) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def record(
    values: np.ndarray, parents: tuple[Tensor, ...], grad_fn: GradFn
) -> Tensor:
    """
    Create the output tensor of an operation, recording a graph node if
    gradients are enabled and some parent requires them.
    """
    if is_grad_enabled() and any(p.requires_grad for p in parents):
        return Tensor(
            values, requires_grad=True, _parents=parents, _grad_fn=grad_fn
        )
    return Tensor(values)


def parameter(values: Any) -> Tensor:
    return Tensor(np.array(values, dtype=np.float64), requires_grad=True)
