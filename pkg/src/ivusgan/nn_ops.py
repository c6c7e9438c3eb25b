"""Differentiable neural-network primitives over :mod:`ivusgan.tensor`.

Convolutions use cross-correlation semantics (no kernel flip), the common
deep-learning convention.  ``conv2d_transpose`` is implemented as the exact
linear adjoint of ``conv2d`` with the same (stride, padding) geometry, so the
inner-product identity ``<conv2d(x, w), y> == <x, conv2d_transpose(y, w)>``
holds to rounding for the *same* weight array; a weight of shape
``(A, B, kh, kw)`` maps B -> A channels under conv2d and A -> B under
conv2d_transpose.

Forward kernels are window-gather + one BLAS matmul (im2col); gradients are
the matching col2im scatter.  Everything is deterministic for a fixed BLAS
configuration.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .rng import Rng
from .tensor import ShapeError, Tensor, accumulate_grad, make_op


def _require_4d(name: str, arr: np.ndarray, what: str) -> None:
    if arr.ndim != 4:
        raise ShapeError(f"{name}: {what} must be 4-d (N,C,H,W), got shape {arr.shape}")


def _im2col(x: np.ndarray, kh: int, kw: int, stride: int, pad: int):
    """Return (cols, (Ho, Wo)) with cols of shape (N*Ho*Wo, C*kh*kw)."""
    n, c, h, w = x.shape
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    hp, wp = h + 2 * pad, w + 2 * pad
    if kh > hp or kw > wp:
        raise ShapeError(
            f"kernel ({kh}x{kw}) larger than padded input ({hp}x{wp}, padding={pad})"
        )
    win = sliding_window_view(x, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    ho, wo = win.shape[2], win.shape[3]
    cols = np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(n * ho * wo, c * kh * kw)
    return cols, (ho, wo)


def _col_matmul_forward(cols, w_mat, n, ho, wo):
    y = cols @ w_mat.T  # (N*Ho*Wo, Cout)
    return np.ascontiguousarray(y.reshape(n, ho, wo, -1).transpose(0, 3, 1, 2))


def _grad_to_mat(g: np.ndarray) -> np.ndarray:
    n, cg, ho, wo = g.shape
    return np.ascontiguousarray(g.transpose(0, 2, 3, 1)).reshape(n * ho * wo, cg)


def _col2im(cols_grad, n, ho, wo, c, kh, kw, stride, pad, out_h, out_w):
    """Scatter-add column gradients back onto an (N, C, out_h, out_w) array."""
    cg = cols_grad.reshape(n, ho, wo, c, kh, kw)
    hp, wp = out_h + 2 * pad, out_w + 2 * pad
    dxp = np.zeros((n, c, hp, wp), dtype=cols_grad.dtype)
    for i in range(kh):
        for j in range(kw):
            dxp[:, :, i : i + (ho - 1) * stride + 1 : stride,
                j : j + (wo - 1) * stride + 1 : stride] += cg[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    if pad:
        dxp = dxp[:, :, pad : pad + out_h, pad : pad + out_w]
    return np.ascontiguousarray(dxp)


def _check_geometry(name: str, stride: int, padding: int) -> None:
    if int(stride) != stride or stride < 1:
        raise ShapeError(f"{name}: stride must be an integer >= 1, got {stride}")
    if int(padding) != padding or padding < 0:
        raise ShapeError(f"{name}: padding must be an integer >= 0, got {padding}")


def conv2d(x: Tensor, weight: Tensor, bias=None, stride: int = 1, padding: int = 0) -> Tensor:
    """Strided 2-d cross-correlation: (N,Cin,H,W) -> (N,Cout,Ho,Wo).

    Output spatial size is ``floor((H + 2*padding - kh)/stride) + 1``.
    """
    _check_geometry("conv2d", stride, padding)
    _require_4d("conv2d", x.data, "input")
    _require_4d("conv2d", weight.data, "weight")
    n, c, h, w = x.shape
    cout, cin, kh, kw = weight.shape
    if c != cin:
        raise ShapeError(
            f"conv2d: input has {c} channels but weight expects {cin} "
            f"(input {x.shape}, weight {weight.shape})"
        )
    if bias is not None and bias.shape != (cout,):
        raise ShapeError(f"conv2d: bias shape {bias.shape} != ({cout},)")

    cols, (ho, wo) = _im2col(x.data, kh, kw, stride, padding)
    y = _col_matmul_forward(cols, weight.data.reshape(cout, -1), n, ho, wo)
    if bias is not None:
        y = y + bias.data.reshape(1, cout, 1, 1)

    parents = (x, weight) if bias is None else (x, weight, bias)

    def grad_fn(g):
        g_mat = _grad_to_mat(g)
        if weight.requires_grad:
            accumulate_grad(weight, (g_mat.T @ cols).reshape(weight.shape))
        if x.requires_grad:
            cols_grad = g_mat @ weight.data.reshape(cout, -1)
            accumulate_grad(x, _col2im(cols_grad, n, ho, wo, cin, kh, kw, stride, padding, h, w))
        if bias is not None and bias.requires_grad:
            accumulate_grad(bias, g.sum(axis=(0, 2, 3)))

    return make_op(y, parents, grad_fn, "conv2d")


def conv2d_transpose(x: Tensor, weight: Tensor, bias=None, stride: int = 1, padding: int = 0) -> Tensor:
    """Adjoint of conv2d: (N,A,H,W) with weight (A,B,kh,kw) -> (N,B,Ho,Wo).

    Output spatial size is ``(H - 1)*stride - 2*padding + kh``.
    """
    _check_geometry("conv2d_transpose", stride, padding)
    _require_4d("conv2d_transpose", x.data, "input")
    _require_4d("conv2d_transpose", weight.data, "weight")
    n, a, h, w = x.shape
    wa, b, kh, kw = weight.shape
    if a != wa:
        raise ShapeError(
            f"conv2d_transpose: input has {a} channels but weight expects {wa} "
            f"(input {x.shape}, weight {weight.shape})"
        )
    ho = (h - 1) * stride - 2 * padding + kh
    wo = (w - 1) * stride - 2 * padding + kw
    if ho < 1 or wo < 1:
        raise ShapeError(
            f"conv2d_transpose: output {ho}x{wo} empty for input {h}x{w}, "
            f"kernel {kh}x{kw}, stride {stride}, padding {padding}"
        )
    if bias is not None and bias.shape != (b,):
        raise ShapeError(f"conv2d_transpose: bias shape {bias.shape} != ({b},)")

    x_mat = _grad_to_mat(x.data)
    cols_grad = x_mat @ weight.data.reshape(a, -1)
    y = _col2im(cols_grad, n, h, w, b, kh, kw, stride, padding, ho, wo)
    if bias is not None:
        y = y + bias.data.reshape(1, b, 1, 1)

    parents = (x, weight) if bias is None else (x, weight, bias)

    def grad_fn(g):
        gcols, _ = _im2col(g, kh, kw, stride, padding)
        if x.requires_grad:
            accumulate_grad(x, _col_matmul_forward(gcols, weight.data.reshape(a, -1), n, h, w))
        if weight.requires_grad:
            accumulate_grad(weight, (x_mat.T @ gcols).reshape(weight.shape))
        if bias is not None and bias.requires_grad:
            accumulate_grad(bias, g.sum(axis=(0, 2, 3)))

    return make_op(y, parents, grad_fn, "conv2d_transpose")


def batch_norm(
    x: Tensor,
    gamma: Tensor,
    beta_shift: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    mode: str = "train",
    momentum: float = 0.1,
    eps: float = 1e-5,
    update_running: bool = True,
) -> Tensor:
    """Per-channel batch normalization over (N, H, W) of an (N,C,H,W) input.

    Train mode normalizes by batch statistics (biased variance) and, when
    ``update_running`` is set, folds them into the running arrays in place:
    ``running = (1 - momentum)*running + momentum*batch``.  Eval mode
    normalizes by the running statistics.
    """
    _require_4d("batch_norm", x.data, "input")
    n, c, h, w = x.shape
    if gamma.shape != (c,) or beta_shift.shape != (c,):
        raise ShapeError(
            f"batch_norm: gamma/beta shapes {gamma.shape}/{beta_shift.shape} != ({c},)"
        )
    if mode not in ("train", "eval"):
        raise ValueError(f"batch_norm: mode must be 'train' or 'eval', got {mode!r}")
    m = n * h * w

    if mode == "train":
        if m < 2:
            raise ValueError(
                f"batch_norm: train mode needs N*H*W >= 2 per channel, got {m} "
                f"(input shape {x.shape})"
            )
        mu = x.data.mean(axis=(0, 2, 3))
        var = x.data.var(axis=(0, 2, 3))  # biased, matches normalization
        if update_running:
            running_mean *= 1.0 - momentum
            running_mean += momentum * mu.astype(running_mean.dtype)
            running_var *= 1.0 - momentum
            running_var += momentum * var.astype(running_var.dtype)
    else:
        mu = running_mean.astype(x.dtype)
        var = running_var.astype(x.dtype)

    inv = (1.0 / np.sqrt(var + eps)).astype(x.dtype)
    xhat = (x.data - mu.reshape(1, c, 1, 1).astype(x.dtype)) * inv.reshape(1, c, 1, 1)
    y = gamma.data.reshape(1, c, 1, 1) * xhat + beta_shift.data.reshape(1, c, 1, 1)

    def grad_fn(g):
        if gamma.requires_grad:
            accumulate_grad(gamma, (g * xhat).sum(axis=(0, 2, 3)))
        if beta_shift.requires_grad:
            accumulate_grad(beta_shift, g.sum(axis=(0, 2, 3)))
        if x.requires_grad:
            dxhat = g * gamma.data.reshape(1, c, 1, 1)
            if mode == "train":
                mean_d = dxhat.mean(axis=(0, 2, 3), keepdims=True)
                mean_dx = (dxhat * xhat).mean(axis=(0, 2, 3), keepdims=True)
                dx = inv.reshape(1, c, 1, 1) * (dxhat - mean_d - xhat * mean_dx)
            else:
                dx = dxhat * inv.reshape(1, c, 1, 1)
            accumulate_grad(x, dx)

    return make_op(y, (x, gamma, beta_shift), grad_fn, "batch_norm")


def leaky_relu(x: Tensor, negative_slope: float = 0.2) -> Tensor:
    pos = x.data >= 0
    slope = np.asarray(negative_slope, dtype=x.dtype)

    def grad_fn(g):
        accumulate_grad(x, np.where(pos, g, g * slope))

    return make_op(np.where(pos, x.data, x.data * slope), (x,), grad_fn, "leaky_relu")


def relu(x: Tensor) -> Tensor:
    pos = x.data > 0

    def grad_fn(g):
        accumulate_grad(x, np.where(pos, g, 0.0).astype(x.dtype))

    return make_op(np.where(pos, x.data, 0.0).astype(x.dtype), (x,), grad_fn, "relu")


def tanh_act(x: Tensor) -> Tensor:
    y = np.tanh(x.data)

    def grad_fn(g):
        accumulate_grad(x, g * (1.0 - y * y))

    return make_op(y, (x,), grad_fn, "tanh")


def sigmoid_act(x: Tensor) -> Tensor:
    # Stable in both tails to avoid exp overflow in float32.
    d = x.data
    y = np.empty_like(d)
    pos = d >= 0
    y[pos] = 1.0 / (1.0 + np.exp(-d[pos]))
    ex = np.exp(d[~pos])
    y[~pos] = ex / (1.0 + ex)

    def grad_fn(g):
        accumulate_grad(x, g * (y * (1.0 - y)))

    return make_op(y, (x,), grad_fn, "sigmoid")


def dropout(x: Tensor, p: float, rng: Rng, active: bool = True) -> Tensor:
    """Inverted dropout: survivors scaled by 1/(1-p).

    The ``active`` flag is explicit because generators in dropout-noise mode
    keep dropout on at inference time (it is their noise source); ``p == 0``
    or ``active == False`` returns the input unchanged.
    """
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout: p must be in [0, 1), got {p}")
    if not active or p == 0.0:
        return x
    keep = (rng.uniform(x.shape) >= p).astype(x.dtype)
    scale = np.asarray(1.0 / (1.0 - p), dtype=x.dtype)
    mask = keep * scale

    def grad_fn(g):
        accumulate_grad(x, g * mask)

    return make_op(x.data * mask, (x,), grad_fn, "dropout")
