import numpy as np
import pytest

from doodleseg import autograd as ag
from doodleseg.autograd import (Tensor, add, sub, mul, div, add_const, mul_const,
                                relu, sigmoid, sum_all, backward, no_grad,
                                GraphConsumedError, MissingGradError, ShapeError,
                                SGD, Adam)

from fd import check_gradients, away_from_zero, scalarize


def t64(data, grad=True):
    return Tensor(np.asarray(data, dtype=np.float64), requires_grad=grad, dtype=np.float64)


# -- forward values ----------------------------------------------------------

def test_add_elementwise():
    out = add(Tensor([1.0, 2.0]), Tensor([3.0, 4.0]))
    np.testing.assert_array_equal(out.data, [4.0, 6.0])


def test_mul_identity():
    x = Tensor([[1.5, -2.0], [0.25, 3.0]])
    out = mul(x, Tensor(np.ones_like(x.data)))
    np.testing.assert_array_equal(out.data, x.data)


def test_sigmoid_at_zero():
    assert sigmoid(Tensor([0.0])).item() == pytest.approx(0.5)


def test_shape_mismatch_names_operator():
    with pytest.raises(ShapeError, match="mul"):
        mul(Tensor([1.0, 2.0]), Tensor([1.0, 2.0, 3.0]))


def test_forward_deterministic():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((4, 4)).astype(np.float32)
    a = sigmoid(mul(Tensor(x), Tensor(x)))
    b = sigmoid(mul(Tensor(x), Tensor(x)))
    np.testing.assert_array_equal(a.data, b.data)


def test_finite_check_flag():
    ag.check_finite = True
    try:
        with np.errstate(divide="ignore"), pytest.raises(FloatingPointError):
            div(Tensor([1.0]), Tensor([0.0]))
    finally:
        ag.check_finite = False


# -- backward: analytic cases ------------------------------------------------

def test_grad_sum_of_squares():
    x = t64([1.0, 2.0, 3.0])
    loss = sum_all(mul(x, x))
    backward(loss)
    np.testing.assert_allclose(x.grad, [2.0, 4.0, 6.0])


def test_grad_sigmoid_at_zero():
    w = t64([0.0])
    loss = sum_all(sigmoid(mul_const(w, 1.0)))
    backward(loss)
    assert w.grad[0] == pytest.approx(0.25)


def test_backward_requires_scalar():
    x = t64([1.0, 2.0])
    y = mul(x, x)
    with pytest.raises(ValueError, match="scalar"):
        backward(y)


def test_backward_twice_raises():
    x = t64([1.0, 2.0])
    loss = sum_all(mul(x, x))
    backward(loss)
    with pytest.raises(GraphConsumedError):
        backward(loss)


def test_grad_accumulates_across_graphs_until_zeroed():
    x = t64([3.0])
    backward(sum_all(mul(x, x)))
    backward(sum_all(mul(x, x)))
    assert x.grad[0] == pytest.approx(12.0)
    x.zero_grad()
    assert x.grad is None


def test_diamond_reuse_accumulates_within_one_pass():
    x = t64([2.0])
    y = mul(x, x)
    loss = sum_all(add(y, y))
    backward(loss)
    assert x.grad[0] == pytest.approx(8.0)


def test_no_grad_blocks_recording():
    x = t64([1.0])
    with no_grad():
        y = mul(x, x)
    assert not y.requires_grad and y.is_leaf()


# -- finite-difference property over the primitive set ------------------------

BINARY = [add, sub, mul, div]
UNARY = [relu, sigmoid, lambda x: add_const(x, 0.7), lambda x: mul_const(x, -1.3)]


@pytest.mark.parametrize("op", BINARY, ids=["add", "sub", "mul", "div"])
def test_fd_binary_ops(op):
    rng = np.random.default_rng(11)
    for _ in range(5):
        a = t64(away_from_zero(rng, (3, 4)))
        b = t64(away_from_zero(rng, (3, 4), lo=0.5))
        check_gradients(lambda: scalarize(op(a, b)), [a, b])


@pytest.mark.parametrize("op", UNARY, ids=["relu", "sigmoid", "add_const", "mul_const"])
def test_fd_unary_ops(op):
    rng = np.random.default_rng(12)
    for _ in range(5):
        x = t64(away_from_zero(rng, (2, 5)))
        check_gradients(lambda: scalarize(op(x)), [x])


def test_fd_sum_all():
    rng = np.random.default_rng(13)
    for _ in range(5):
        x = t64(rng.standard_normal((4, 4)))
        check_gradients(lambda: mul_const(sum_all(x), 1.5), [x])


def test_fd_composite_chain():
    rng = np.random.default_rng(14)
    for _ in range(5):
        x = t64(away_from_zero(rng, (2, 3)))
        w = t64(away_from_zero(rng, (2, 3)))

        def f():
            h = sigmoid(mul(x, w))
            h = add(h, relu(sub(x, mul_const(w, 0.5))))
            return sum_all(div(h, add_const(sigmoid(w), 1.0)))

        check_gradients(f, [x, w])


# -- optimizers ---------------------------------------------------------------

def test_sgd_step():
    w = Tensor(np.array([1.0], dtype=np.float32), requires_grad=True)
    w.grad = np.array([0.5], dtype=np.float32)
    SGD([w], lr=0.1).step()
    assert w.data[0] == pytest.approx(0.95)
    assert w.grad is None


def test_sgd_missing_grad():
    w = Tensor(np.array([1.0], dtype=np.float32), requires_grad=True)
    with pytest.raises(MissingGradError):
        SGD([w], lr=0.1).step()


def test_adam_first_step_hand_evaluated():
    # one step of the update rule at w=1, g=1:
    #   m=0.1, v=0.001, mhat=1, vhat=1 -> w - lr*1/(1+eps)
    lr, eps = 1e-3, 1e-8
    expected = 1.0 - lr * 1.0 / (1.0 + eps)
    w = Tensor(np.array([1.0], dtype=np.float64), requires_grad=True, dtype=np.float64)
    w.grad = np.array([1.0])
    opt = Adam([w], lr=lr)
    opt.step()
    assert w.data[0] == pytest.approx(expected, rel=1e-12)
    assert abs(w.data[0] - 0.999) < 1e-7
    assert w.grad is None


def test_adam_matches_reference_recurrence():
    # independent reference: textbook Adam recurrence on a scalar trajectory
    rng = np.random.default_rng(3)
    grads = rng.standard_normal(7)
    lr, b1, b2, eps = 0.01, 0.9, 0.999, 1e-8

    w_ref, m, v = 0.4, 0.0, 0.0
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        w_ref -= lr * (m / (1 - b1 ** t)) / (np.sqrt(v / (1 - b2 ** t)) + eps)

    w = Tensor(np.array([0.4]), requires_grad=True, dtype=np.float64)
    opt = Adam([w], lr=lr)
    for g in grads:
        w.grad = np.array([g])
        opt.step()
    assert w.data[0] == pytest.approx(w_ref, rel=1e-12)
