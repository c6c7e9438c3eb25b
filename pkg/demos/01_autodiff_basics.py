"""Tour of the autodiff core: tensors, gradients, the adjoint identity.

Run: python demos/01_autodiff_basics.py
"""

import numpy as np

import ivusgan.tensor as T
from ivusgan.gradcheck import check_gradients
from ivusgan.nn_ops import conv2d, conv2d_transpose, leaky_relu, sigmoid_act
from ivusgan.rng import Rng
from ivusgan.tensor import Tensor, backward

print("== scalars and gradients ==")
x = Tensor(np.array([0.5, -1.5, 2.0]), requires_grad=True, dtype=np.float64)
loss = T.mean(T.square_(x))
backward(loss)
print(f"x = {x.data},  mean(x^2) = {loss.item():.4f}")
print(f"grad = {x.grad}   (formula 2x/n = {2 * x.data / 3})")

print("\n== a small conv graph, checked against finite differences ==")
rng = Rng(1)
img = Tensor(rng.split("img").normal((1, 1, 6, 6)), requires_grad=True, dtype=np.float64)
w = Tensor(rng.split("w").normal((2, 1, 3, 3)) * 0.5, requires_grad=True, dtype=np.float64)


def f():
    return T.mean(T.square_(leaky_relu(conv2d(img, w, stride=1, padding=1), 0.2)))


err = check_gradients(f, [img, w], h=1e-6)
print(f"max finite-difference error over all parameters: {err:.2e}")

print("\n== conv2d_transpose is the exact adjoint of conv2d ==")
xv = Tensor(rng.split("x").normal((1, 2, 6, 6)), dtype=np.float64)
wv = Tensor(rng.split("k").normal((3, 2, 4, 4)), dtype=np.float64)
y = conv2d(xv, wv, stride=2, padding=1)
yv = Tensor(rng.split("y").normal(y.shape), dtype=np.float64)
lhs = float(np.sum(y.data * yv.data))
rhs = float(np.sum(xv.data * conv2d_transpose(yv, wv, stride=2, padding=1).data))
print(f"<conv(x,w), y>  = {lhs:+.12f}")
print(f"<x, convT(y,w)> = {rhs:+.12f}   (same weight array, both directions)")

print("\n== dropout is a noise source with an explicit rng ==")
h = Tensor(np.ones((1, 8)), dtype=np.float64)
s1 = sigmoid_act(Tensor(rng.split("s").normal((1, 8)), dtype=np.float64))
from ivusgan.nn_ops import dropout

d1 = dropout(h, 0.5, Rng(42))
d2 = dropout(h, 0.5, Rng(42))
d3 = dropout(h, 0.5, Rng(43))
print(f"same rng  -> identical masks: {np.array_equal(d1.data, d2.data)}")
print(f"other rng -> different masks: {not np.array_equal(d1.data, d3.data)}")
