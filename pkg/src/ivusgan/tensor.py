"""Dense tensors with reverse-mode automatic differentiation.

A :class:`Tensor` wraps a numpy float array plus an optional gradient slot.
Operations build a computation graph on the fly; :func:`backward` walks it in
reverse topological order and accumulates gradients into ``.grad`` for every
tensor with ``requires_grad``.

Conventions:

* float32 is the default dtype (training); float64 is used by the
  gradient-check suites.  Ops produce ``np.result_type`` of their inputs.
* Gradients accumulate across backward calls on *different* graphs; the
  caller (optimizer) zeroes parameter grads explicitly.  Calling
  :func:`backward` twice on the same loss raises.
* Tensors are treated as immutable once they participate in a graph.
  Optimizers update leaf ``.data`` in place *between* graph episodes only.
* ``log_`` clamps its argument at ``LOG_EPS = 1e-12`` so adversarial losses
  stay finite when a discriminator saturates; its derivative uses the
  clamped argument (bounded, keeps the gradient signal).
* With debug checks enabled (:func:`set_debug_checks` or env var
  ``IVUSGAN_DEBUG_NANCHECK=1``) every op output is verified finite.
"""

from __future__ import annotations

import os

import numpy as np

LOG_EPS = 1e-12

_debug_checks = os.environ.get("IVUSGAN_DEBUG_NANCHECK", "") not in ("", "0")


def set_debug_checks(enabled: bool) -> None:
    """Toggle NaN/Inf detection on every op output (slow; for debugging)."""
    global _debug_checks
    _debug_checks = bool(enabled)


def debug_checks_enabled() -> bool:
    return _debug_checks


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible; names the offenders."""


class Tensor:
    """N-dimensional float array with optional gradient tracking."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_grad_fn", "_backward_done")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._grad_fn = None
        self._backward_done = False

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}{flag})"

    def detach(self) -> "Tensor":
        """Leaf tensor sharing this data, cut off from the graph."""
        return Tensor(self.data, requires_grad=False)

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.data.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self) -> None:
        self.grad = None

    # Operator sugar; the module-level functions are the real ops.
    def __add__(self, other):
        return add(self, _as_tensor(other, self.dtype))

    def __radd__(self, other):
        return add(_as_tensor(other, self.dtype), self)

    def __sub__(self, other):
        return sub(self, _as_tensor(other, self.dtype))

    def __rsub__(self, other):
        return sub(_as_tensor(other, self.dtype), self)

    def __mul__(self, other):
        return mul(self, _as_tensor(other, self.dtype))

    def __rmul__(self, other):
        return mul(_as_tensor(other, self.dtype), self)

    def __neg__(self):
        return mul(self, _as_tensor(-1.0, self.dtype))


def _as_tensor(x, dtype) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))


def zeros(shape, dtype=np.float32, requires_grad: bool = False) -> Tensor:
    return Tensor(np.zeros(shape, dtype=dtype), requires_grad=requires_grad)


def ones(shape, dtype=np.float32, requires_grad: bool = False) -> Tensor:
    return Tensor(np.ones(shape, dtype=dtype), requires_grad=requires_grad)


def _check_finite(arr: np.ndarray, op_name: str) -> None:
    if _debug_checks and not np.all(np.isfinite(arr)):
        raise FloatingPointError(f"non-finite values in output of {op_name}")


def make_op(data: np.ndarray, parents, grad_fn, op_name: str) -> Tensor:
    """Wrap an op result into a graph node.

    ``grad_fn(out_grad)`` must accumulate into each parent's ``.grad``
    (creating it when absent) for parents with ``requires_grad``.
    """
    _check_finite(data, op_name)
    out = Tensor(data)
    out.requires_grad = any(p.requires_grad for p in parents)
    if out.requires_grad:
        out._parents = tuple(parents)
        out._grad_fn = grad_fn
    return out


def accumulate_grad(t: Tensor, g: np.ndarray) -> None:
    """Add ``g`` into ``t.grad`` (respecting broadcast reduction)."""
    if not t.requires_grad:
        return
    g = _reduce_broadcast(g, t.data.shape)
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g.astype(t.data.dtype, copy=False)


def _reduce_broadcast(g: np.ndarray, target_shape) -> np.ndarray:
    """Sum gradient over axes that were broadcast in the forward op."""
    if g.shape == tuple(target_shape):
        return g
    extra = g.ndim - len(target_shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, ts) in enumerate(zip(g.shape, target_shape)) if ts == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(target_shape)


def _binary(a: Tensor, b: Tensor, op_name: str):
    try:
        np.broadcast_shapes(a.data.shape, b.data.shape)
    except ValueError:
        raise ShapeError(
            f"{op_name}: shapes {a.data.shape} and {b.data.shape} do not broadcast"
        ) from None


def add(a: Tensor, b: Tensor) -> Tensor:
    _binary(a, b, "add")

    def grad_fn(g):
        accumulate_grad(a, g)
        accumulate_grad(b, g)

    return make_op(a.data + b.data, (a, b), grad_fn, "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    _binary(a, b, "sub")

    def grad_fn(g):
        accumulate_grad(a, g)
        accumulate_grad(b, -g)

    return make_op(a.data - b.data, (a, b), grad_fn, "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    _binary(a, b, "mul")

    def grad_fn(g):
        accumulate_grad(a, g * b.data)
        accumulate_grad(b, g * a.data)

    return make_op(a.data * b.data, (a, b), grad_fn, "mul")


def mean(a: Tensor) -> Tensor:
    """Arithmetic mean over all elements, as a 0-d tensor."""
    if a.data.size == 0:
        raise ShapeError("mean of an empty tensor")
    n = a.data.size

    def grad_fn(g):
        accumulate_grad(a, np.broadcast_to(g / n, a.data.shape))

    return make_op(np.asarray(a.data.mean(dtype=a.data.dtype)), (a,), grad_fn, "mean")


def sum_(a: Tensor) -> Tensor:
    """Sum over all elements, as a 0-d tensor."""

    def grad_fn(g):
        accumulate_grad(a, np.broadcast_to(g, a.data.shape))

    return make_op(np.asarray(a.data.sum(dtype=a.data.dtype)), (a,), grad_fn, "sum")


def abs_(a: Tensor) -> Tensor:
    sign = np.sign(a.data)

    def grad_fn(g):
        accumulate_grad(a, g * sign)

    return make_op(np.abs(a.data), (a,), grad_fn, "abs")


def square_(a: Tensor) -> Tensor:
    def grad_fn(g):
        accumulate_grad(a, g * (2.0 * a.data))

    return make_op(a.data * a.data, (a,), grad_fn, "square")


def log_(a: Tensor) -> Tensor:
    """Natural log with the argument clamped at LOG_EPS (GAN saturation guard)."""
    clamped = np.maximum(a.data, np.asarray(LOG_EPS, dtype=a.data.dtype))

    def grad_fn(g):
        accumulate_grad(a, g / clamped)

    return make_op(np.log(clamped), (a,), grad_fn, "log")


def concat(a: Tensor, b: Tensor, axis: int) -> Tensor:
    if a.data.ndim != b.data.ndim:
        raise ShapeError(f"concat: ranks differ ({a.data.shape} vs {b.data.shape})")
    if not -a.data.ndim <= axis < a.data.ndim:
        raise ShapeError(f"concat: axis {axis} out of range for rank {a.data.ndim}")
    ax = axis % a.data.ndim
    for d in range(a.data.ndim):
        if d != ax and a.data.shape[d] != b.data.shape[d]:
            raise ShapeError(
                f"concat: shapes {a.data.shape} and {b.data.shape} differ on axis {d}"
            )
    na = a.data.shape[ax]

    def grad_fn(g):
        ga, gb = np.split(g, [na], axis=ax)
        accumulate_grad(a, ga)
        accumulate_grad(b, gb)

    return make_op(np.concatenate([a.data, b.data], axis=ax), (a, b), grad_fn, "concat")


def backward(loss: Tensor) -> None:
    """Reverse-mode gradient accumulation from a scalar loss.

    Populates ``.grad`` on every tensor in the graph with ``requires_grad``.
    A second call on the same loss raises (grads would silently double).
    """
    if loss.data.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.data.shape}")
    if loss._backward_done:
        raise RuntimeError("backward already called on this loss; rebuild the graph")
    loss._backward_done = True
    if not loss.requires_grad:
        return

    # Iterative post-order DFS: graphs are deep (one node per layer op).
    topo = []
    visited = set()
    stack = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in visited:
                stack.append((p, False))

    accumulate_grad(loss, np.ones_like(loss.data))
    for node in reversed(topo):
        if node._grad_fn is not None:
            node._grad_fn(node.grad)
