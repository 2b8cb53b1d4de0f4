"""Dense float tensors with tape-style reverse-mode automatic differentiation.

The operator set is exactly what the segmentation network needs: same-shape
elementwise arithmetic, scalar-constant arithmetic, relu/sigmoid, and a full
reduction. Spatial operators (convolutions, pooling, batch norm, ...) live in
``layers`` and register themselves through the same ``record`` hook.

Conventions:
  * activations are N x H x W x C, row-major float32 (float64 only for the
    finite-difference shadow mode used by tests)
  * no implicit broadcasting; every operator states its exact shape contract
  * graphs are single-use: backward() consumes the recorded operations and a
    second call raises GraphConsumedError
"""

from __future__ import annotations

import contextlib
import itertools
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import expit


class ShapeError(ValueError):
    """Operand shapes violate an operator's contract."""


class GraphConsumedError(RuntimeError):
    """backward() was called on a graph that has already been walked."""


class MissingGradError(RuntimeError):
    """Optimizer step requested while some parameter has no gradient."""


_order_counter = itertools.count()

# Module-level switches. Training is single-threaded, so plain globals are fine.
_grad_enabled = True
check_finite = False


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (inference mode)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    """A dense n-d float array with an optional gradient slot.

    ``grad`` is a plain ndarray of the same shape, lazily allocated. Non-leaf
    tensors additionally carry the recorded operation that produced them.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward",
                 "_order", "_consumed", "name")

    def __init__(self, data, requires_grad: bool = False, dtype=np.float32,
                 name: str = ""):
        self.data = np.ascontiguousarray(data, dtype=dtype)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self._parents: Optional[tuple] = None
        self._backward: Optional[Callable] = None
        self._order = 0
        self._consumed = False
        self.name = name

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def is_leaf(self) -> bool:
        return self._parents is None

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy(), requires_grad=False, dtype=self.dtype)

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, grad={self.requires_grad}{tag})"


def record(out: Tensor, parents: Sequence[Tensor],
           backward_fn: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]) -> Tensor:
    """Attach a backward rule to ``out`` if recording is active.

    ``backward_fn`` receives the upstream gradient and returns one gradient
    array (or None) per parent, in order.
    """
    if check_finite and not np.isfinite(out.data).all():
        raise FloatingPointError("non-finite values in forward output")
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
        out._order = next(_order_counter)
    return out


def backward(loss: Tensor) -> None:
    """Populate ``grad`` on every requires_grad leaf reachable from ``loss``.

    Visits recorded operations exactly once, in reverse recording order.
    Leaf gradients accumulate additively; intermediates are discarded.
    """
    if loss.size != 1:
        raise ValueError(f"backward() needs a scalar loss, got shape {loss.shape}")
    if loss._consumed:
        raise GraphConsumedError("graph already consumed; re-record the forward pass")
    if loss._parents is None:
        if loss.requires_grad:
            g = np.ones_like(loss.data)
            loss.grad = g if loss.grad is None else loss.grad + g
        return

    # Reverse recording order is a valid reverse-topological order because
    # inputs are always recorded before the ops that consume them.
    nodes: list[Tensor] = []
    seen = set()
    stack = [loss]
    while stack:
        t = stack.pop()
        if id(t) in seen or t._parents is None:
            continue
        if t._consumed:
            raise GraphConsumedError("graph already consumed; re-record the forward pass")
        seen.add(id(t))
        nodes.append(t)
        stack.extend(t._parents)
    nodes.sort(key=lambda t: t._order, reverse=True)

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in nodes:
        g = grads.pop(id(node), None)
        if g is None:
            continue
        parent_grads = node._backward(g)
        for parent, pg in zip(node._parents, parent_grads):
            if pg is None or not parent.requires_grad:
                continue
            if parent._parents is None:
                parent.grad = pg.copy() if parent.grad is None else parent.grad + pg
            else:
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg
        node._consumed = True
        node._backward = None
        node._parents = None


# ---------------------------------------------------------------------------
# elementwise / scalar / reduction primitives


def _same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def add(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("add", a, b)
    out = Tensor(a.data + b.data, dtype=a.dtype)
    return record(out, (a, b), lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("sub", a, b)
    out = Tensor(a.data - b.data, dtype=a.dtype)
    return record(out, (a, b), lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("mul", a, b)
    out = Tensor(a.data * b.data, dtype=a.dtype)
    return record(out, (a, b), lambda g: (g * b.data, g * a.data))


def div(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("div", a, b)
    out = Tensor(a.data / b.data, dtype=a.dtype)

    def back(g):
        return g / b.data, -g * a.data / (b.data * b.data)

    return record(out, (a, b), back)


def add_const(x: Tensor, c: float) -> Tensor:
    out = Tensor(x.data + c, dtype=x.dtype)
    return record(out, (x,), lambda g: (g,))


def mul_const(x: Tensor, c: float) -> Tensor:
    out = Tensor(x.data * c, dtype=x.dtype)
    return record(out, (x,), lambda g: (g * c,))


def relu(x: Tensor) -> Tensor:
    out = Tensor(np.maximum(x.data, 0), dtype=x.dtype)
    mask = x.data > 0
    return record(out, (x,), lambda g: (g * mask,))


def sigmoid(x: Tensor) -> Tensor:
    y = expit(x.data)
    out = Tensor(y, dtype=x.dtype)
    return record(out, (x,), lambda g: (g * y * (1.0 - y),))


def sum_all(x: Tensor) -> Tensor:
    out = Tensor(np.array([x.data.sum(dtype=np.float64)]), dtype=x.dtype)
    return record(out, (x,), lambda g: (np.full_like(x.data, g.reshape(-1)[0]),))


# ---------------------------------------------------------------------------
# optimizers (grads must be populated; step zeroes them afterwards)


class SGD:
    def __init__(self, params: Sequence[Tensor], lr: float):
        self.params = list(params)
        self.lr = lr

    def step(self) -> None:
        for p in self.params:
            if p.grad is None:
                raise MissingGradError(f"no gradient for parameter {p.name or p.shape}")
        for p in self.params:
            p.data -= np.asarray(self.lr * p.grad, dtype=p.dtype)
            p.grad = None

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


class Adam:
    """Adam with bias correction, betas (0.9, 0.999), eps 1e-8."""

    def __init__(self, params: Sequence[Tensor], lr: float = 1e-3,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self._m = [np.zeros_like(p.data) for p in self.params]
        self._v = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        for p in self.params:
            if p.grad is None:
                raise MissingGradError(f"no gradient for parameter {p.name or p.shape}")
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for p, m, v in zip(self.params, self._m, self._v):
            g = p.grad
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            p.data -= np.asarray(self.lr * update, dtype=p.dtype)
            p.grad = None

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None
