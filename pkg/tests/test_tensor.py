import numpy as np
import pytest

import ivusgan.tensor as T
from ivusgan.gradcheck import check_gradients
from ivusgan.rng import Rng
from ivusgan.tensor import ShapeError, Tensor, backward


def t64(data, rg=True):
    return Tensor(np.asarray(data, dtype=np.float64), requires_grad=rg)


def test_mean_trivial():
    assert T.mean(t64([1.0, 2.0, 3.0, 4.0])).item() == pytest.approx(2.5)


def test_log_of_one_is_zero():
    assert T.log_(t64([1.0])).item() == 0.0


def test_log_clamps_at_floor():
    y = T.log_(t64([0.0, -3.0]))
    assert np.allclose(y.data, np.log(1e-12))


def test_sum_backward_all_ones():
    x = t64(np.arange(6.0).reshape(2, 3))
    backward(T.sum_(x))
    assert np.array_equal(x.grad, np.ones((2, 3)))


def test_disconnected_parameter_has_no_grad():
    x = t64([1.0, 2.0])
    z = t64([5.0])
    backward(T.mean(x))
    assert z.grad is None


def test_second_backward_raises():
    x = t64([1.0, 2.0])
    loss = T.mean(x)
    backward(loss)
    with pytest.raises(RuntimeError, match="already called"):
        backward(loss)


def test_backward_requires_scalar():
    x = t64([[1.0, 2.0]])
    with pytest.raises(ShapeError, match="scalar"):
        backward(T.abs_(x))


def test_grad_accumulates_until_zeroed():
    x = t64([2.0])
    backward(T.sum_(x))
    backward(T.sum_(x))
    assert x.grad[0] == 2.0
    x.zero_grad()
    backward(T.sum_(x))
    assert x.grad[0] == 1.0


def test_mean_square_gradient_is_2x_over_n():
    # d/dx mean(x^2) = 2x/n, checked against central finite differences.
    x = t64([0.5, -1.5, 2.0, 3.0])
    err = check_gradients(lambda: T.mean(T.square_(x)), [x], h=1e-6)
    assert err < 1e-9
    x.zero_grad()
    backward(T.mean(T.square_(x)))
    assert np.allclose(x.grad, 2.0 * x.data / 4.0)


def test_broadcast_add_reduces_gradient():
    a = t64(np.ones((2, 3)))
    b = t64(np.ones((1, 3)))
    backward(T.sum_(T.add(a, b)))
    assert a.grad.shape == (2, 3)
    assert b.grad.shape == (1, 3)
    assert np.array_equal(b.grad, np.full((1, 3), 2.0))


def test_scalar_broadcast_mul():
    a = t64(np.arange(4.0))
    s = t64(3.0)
    backward(T.sum_(T.mul(a, s)))
    assert np.allclose(a.grad, 3.0)
    assert s.grad.shape == ()
    assert s.grad == pytest.approx(0 + 1 + 2 + 3)


def test_incompatible_shapes_raise():
    with pytest.raises(ShapeError, match="broadcast"):
        T.add(t64(np.ones((2, 3))), t64(np.ones((4,))))


def test_concat_axis_out_of_range():
    with pytest.raises(ShapeError, match="axis"):
        T.concat(t64(np.ones((2, 2))), t64(np.ones((2, 2))), axis=5)


def test_concat_forward_and_backward():
    a = t64(np.ones((1, 2, 2, 2)))
    b = t64(np.full((1, 3, 2, 2), 2.0))
    y = T.concat(a, b, axis=1)
    assert y.shape == (1, 5, 2, 2)
    backward(T.mean(y))
    assert np.allclose(a.grad, 1.0 / 20.0)
    assert np.allclose(b.grad, 1.0 / 20.0)


def test_diamond_graph_accumulates_both_paths():
    x = t64([3.0])
    y = T.add(T.mul(x, x), x)  # x^2 + x -> dy/dx = 2x + 1
    backward(T.sum_(y))
    assert x.grad[0] == pytest.approx(7.0)


def test_elementwise_gradcheck_sweep():
    # Randomized sweep across ops and shapes; 64-bit tolerance 1e-5.
    rng = Rng(123)
    shapes = [(3,), (2, 2), (1, 4, 2), (5, 1), (2, 3, 1, 2),
              (7,), (1, 1), (3, 2, 2), (4, 3), (2, 1, 2, 1, 2)]
    for i, shape in enumerate(shapes):
        x = Tensor(rng.split("x", i).normal(shape) + 0.1, requires_grad=True, dtype=np.float64)
        y = Tensor(rng.split("y", i).normal(shape) * 0.5 + 2.0, requires_grad=True, dtype=np.float64)
        cases = {
            "add": lambda: T.mean(T.add(x, y)),
            "sub": lambda: T.mean(T.sub(x, y)),
            "mul": lambda: T.mean(T.mul(x, y)),
            "abs": lambda: T.mean(T.abs_(T.add(x, y))),
            "square": lambda: T.mean(T.square_(x)),
            "log": lambda: T.mean(T.log_(T.square_(T.add(y, Tensor(np.full(shape, 3.0)))))),
            "concat": lambda: T.mean(T.concat(x, y, axis=0)),
            "mix": lambda: T.mean(T.mul(T.square_(x), T.add(y, x))),
        }
        for name, f in cases.items():
            err = check_gradients(f, [x, y], h=1e-6)
            assert err < 1e-5, f"{name} on {shape}: err {err}"


def test_repeated_forward_bitwise_identical():
    x = Tensor(Rng(9).normal((4, 4)), dtype=np.float64)
    y1 = T.mul(T.square_(x), x).data
    y2 = T.mul(T.square_(x), x).data
    assert np.array_equal(y1, y2)


def test_debug_checks_flag():
    T.set_debug_checks(True)
    try:
        with pytest.raises(FloatingPointError, match="mul"):
            T.mul(t64([1e308]), t64([1e308]))
    finally:
        T.set_debug_checks(False)


def test_dtype_preserved():
    x = Tensor(np.ones((2, 2), dtype=np.float32))
    assert T.square_(x).dtype == np.float32
    x64 = Tensor(np.ones((2, 2)), dtype=np.float64)
    assert T.square_(x64).dtype == np.float64
