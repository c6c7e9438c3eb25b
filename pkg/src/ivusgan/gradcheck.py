"""Central finite-difference gradient checking.

Used by the unit tests and by the ``selftest`` CLI suite.  The comparison
metric is a unit-floored relative error::

    err(a, n) = |a - n| / max(1, |a|, |n|)

which behaves like relative error for O(1)-and-larger gradients and like
absolute error near zero (where relative error is meaningless).
"""

from __future__ import annotations

import numpy as np

from .tensor import backward


def numeric_gradient(f, x: np.ndarray, h: float) -> np.ndarray:
    """Central differences of scalar-valued ``f`` w.r.t. every element of x.

    ``f`` is called with no arguments and must read ``x`` (mutated in place
    around each evaluation, restored afterwards).
    """
    grad = np.zeros_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        step = h * max(1.0, abs(float(orig)))
        flat[i] = orig + step
        fp = f()
        flat[i] = orig - step
        fm = f()
        flat[i] = orig
        grad.reshape(-1)[i] = (fp - fm) / (2.0 * step)
    return grad


def check_gradients(make_loss, params, h: float | None = None):
    """Compare reverse-mode grads of ``make_loss()`` against finite differences.

    ``make_loss`` builds a fresh graph and returns a scalar Tensor each call
    (it must be deterministic: fix any rng inside).  ``params`` are the leaf
    tensors to check.  Returns the max unit-floored relative error over all
    parameters.
    """
    if h is None:
        h = 1e-6 if all(p.dtype == np.float64 for p in params) else 1e-2

    loss = make_loss()
    for p in params:
        p.zero_grad()
    backward(loss)
    analytic = [None if p.grad is None else p.grad.copy() for p in params]

    def eval_scalar():
        return float(make_loss().item())

    worst = 0.0
    for p, a in zip(params, analytic):
        if a is None:
            a = np.zeros_like(p.data)
        n = numeric_gradient(eval_scalar, p.data, h)
        denom = np.maximum(1.0, np.maximum(np.abs(a), np.abs(n)))
        err = float(np.max(np.abs(a.astype(np.float64) - n) / denom)) if a.size else 0.0
        worst = max(worst, err)
    return worst


def rel_err(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
    return float(np.max(np.abs(a - b) / denom))
