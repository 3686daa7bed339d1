"""Gradient correctness of every differentiable operation.

Each op's analytic backward pass is checked against central finite
differences of its forward value.  The same harness is reused (with more
instances) by the acceptance suite.
"""

import numpy as np
import pytest

from jointparser.autodiff import (
    Tensor,
    add,
    add_many,
    affine,
    backward,
    binary_log_loss,
    concat,
    constant,
    dot,
    embedding_row,
    gathered_scores,
    lstm_cell,
    mul,
    neg_log_softmax,
    no_grad,
    parameter,
    pick_slice,
    relu,
    scale,
    sigmoid_of,
    tanh_of,
    zero_grad,
)

STEP = 1e-5
TOL = 1e-4


def rel_err(analytic, numeric):
    denom = max(np.abs(analytic).max(initial=0.0),
                np.abs(numeric).max(initial=0.0), 1.0)
    return np.abs(analytic - numeric).max(initial=0.0) / denom


def check_gradients(build, params):
    """Compare autodiff gradients of a scalar graph against central
    differences, parameter by parameter."""
    loss = build()
    zero_grad(params)
    backward(loss)
    for p in params:
        analytic = p.grad.copy() if p.grad is not None else \
            np.zeros_like(p.value)
        numeric = np.zeros_like(p.value)
        flat_v = p.value.reshape(-1)
        flat_n = numeric.reshape(-1)
        for i in range(flat_v.size):
            orig = flat_v[i]
            flat_v[i] = orig + STEP
            up = build().value
            flat_v[i] = orig - STEP
            down = build().value
            flat_v[i] = orig
            flat_n[i] = (up - down) / (2 * STEP)
        err = rel_err(analytic, numeric)
        assert err < TOL, f"gradient mismatch {err:.2e}"


def vec(rng, n):
    return parameter(rng.standard_normal(n))


class TestElementwiseOps:
    def test_add(self):
        rng = np.random.default_rng(0)
        a, b, w = vec(rng, 5), vec(rng, 5), rng.standard_normal(5)
        check_gradients(lambda: dot(add(a, b), constant(w)), [a, b])

    def test_add_many(self):
        rng = np.random.default_rng(1)
        parts = [vec(rng, 4) for _ in range(3)]
        w = constant(rng.standard_normal(4))
        check_gradients(lambda: dot(add_many(parts), w), parts)

    def test_scale(self):
        rng = np.random.default_rng(2)
        a = vec(rng, 6)
        w = constant(rng.standard_normal(6))
        check_gradients(lambda: dot(scale(a, -2.5), w), [a])

    def test_mul(self):
        rng = np.random.default_rng(3)
        a, b = vec(rng, 5), vec(rng, 5)
        w = constant(rng.standard_normal(5))
        check_gradients(lambda: dot(mul(a, b), w), [a, b])

    def test_dot(self):
        rng = np.random.default_rng(4)
        a, b = vec(rng, 7), vec(rng, 7)
        check_gradients(lambda: dot(a, b), [a, b])

    def test_tanh(self):
        rng = np.random.default_rng(5)
        a = vec(rng, 5)
        w = constant(rng.standard_normal(5))
        check_gradients(lambda: dot(tanh_of(a), w), [a])

    def test_sigmoid(self):
        rng = np.random.default_rng(6)
        a = vec(rng, 5)
        w = constant(rng.standard_normal(5))
        check_gradients(lambda: dot(sigmoid_of(a), w), [a])

    def test_relu_away_from_kink(self):
        rng = np.random.default_rng(7)
        raw = rng.standard_normal(8)
        raw[np.abs(raw) < 0.1] = 0.5
        a = parameter(raw)
        w = constant(rng.standard_normal(8))
        check_gradients(lambda: dot(relu(a), w), [a])


class TestShapeOps:
    def test_concat(self):
        rng = np.random.default_rng(8)
        parts = [vec(rng, 3), vec(rng, 5), vec(rng, 2)]
        w = constant(rng.standard_normal(10))
        check_gradients(lambda: dot(concat(parts), w), parts)

    def test_pick_slice(self):
        rng = np.random.default_rng(9)
        a = vec(rng, 9)
        w = constant(rng.standard_normal(4))
        check_gradients(lambda: dot(pick_slice(a, 2, 6), w), [a])

    def test_affine(self):
        rng = np.random.default_rng(10)
        W = parameter(rng.standard_normal((4, 6)))
        x = vec(rng, 6)
        b = vec(rng, 4)
        w = constant(rng.standard_normal(4))
        check_gradients(lambda: dot(affine(W, x, b), w), [W, x, b])

    def test_embedding_row(self):
        rng = np.random.default_rng(11)
        table = parameter(rng.standard_normal((5, 4)))
        w = constant(rng.standard_normal(4))
        check_gradients(lambda: dot(embedding_row(table, 3), w), [table])


class TestLstmCell:
    def test_gradients_all_inputs(self):
        rng = np.random.default_rng(12)
        H, D = 4, 3
        x = vec(rng, D)
        h = vec(rng, H)
        c = vec(rng, H)
        Wx = parameter(rng.standard_normal((4 * H, D)) * 0.5)
        Wh = parameter(rng.standard_normal((4 * H, H)) * 0.5)
        b = vec(rng, 4 * H)
        w = constant(rng.standard_normal(2 * H))
        check_gradients(lambda: dot(lstm_cell(x, h, c, Wx, Wh, b), w),
                        [x, h, c, Wx, Wh, b])

    def test_output_packs_h_then_c(self):
        H = 3
        zeros = constant(np.zeros(H))
        x = constant(np.zeros(2))
        Wx = constant(np.zeros((4 * H, 2)))
        Wh = constant(np.zeros((4 * H, H)))
        b = constant(np.zeros(4 * H))
        out = lstm_cell(x, zeros, zeros, Wx, Wh, b)
        assert out.shape == (2 * H,)
        np.testing.assert_array_equal(out.value, np.zeros(2 * H))


class TestScoring:
    def test_gathered_scores_gradients(self):
        rng = np.random.default_rng(13)
        theta = parameter(rng.standard_normal((6, 4)))
        q = parameter(rng.standard_normal(6))
        y = vec(rng, 4)
        ids = np.array([4, 0, 2])
        w = constant(rng.standard_normal(3))
        check_gradients(
            lambda: dot(gathered_scores(theta, q, ids, y), w),
            [theta, q, y])

    def test_gathered_scores_repeated_ids(self):
        # Gradient accumulation must sum over duplicate rows.
        rng = np.random.default_rng(14)
        theta = parameter(rng.standard_normal((5, 3)))
        q = parameter(rng.standard_normal(5))
        y = vec(rng, 3)
        ids = np.array([2, 2, 1])
        w = constant(rng.standard_normal(3))
        check_gradients(
            lambda: dot(gathered_scores(theta, q, ids, y), w),
            [theta, q, y])

    def test_neg_log_softmax_gradients(self):
        rng = np.random.default_rng(15)
        s = vec(rng, 6)
        check_gradients(lambda: neg_log_softmax(s, 2), [s])

    def test_neg_log_softmax_singleton_is_exactly_zero(self):
        s = parameter(np.array([3.7]))
        assert neg_log_softmax(s, 0).value == 0.0

    def test_neg_log_softmax_uniform_is_log_k(self):
        for k in (2, 3, 7):
            s = parameter(np.zeros(k))
            assert neg_log_softmax(s, 0).value == pytest.approx(np.log(k))

    def test_neg_log_softmax_overflow_safe(self):
        s = parameter(np.array([1000.0, 0.0]))
        loss = neg_log_softmax(s, 0)
        assert np.isfinite(loss.value)
        assert loss.value == pytest.approx(0.0, abs=1e-12)

    def test_binary_log_loss_gradients(self):
        rng = np.random.default_rng(16)
        for target in (0.0, 1.0):
            z = parameter(np.array(rng.standard_normal()))
            check_gradients(lambda: binary_log_loss(z, target), [z])

    def test_binary_log_loss_at_zero(self):
        z = parameter(np.array(0.0))
        assert binary_log_loss(z, 1.0).value == pytest.approx(np.log(2))
        assert binary_log_loss(z, 0.0).value == pytest.approx(np.log(2))

    def test_binary_log_loss_extreme_z(self):
        z = parameter(np.array(500.0))
        assert np.isfinite(binary_log_loss(z, 0.0).value)


class TestGraphMechanics:
    def test_backward_accumulates_across_graphs(self):
        # Two losses built on the same parameter sum their gradients, as
        # when several steps of a sentence share the model tensors.
        a = parameter(np.array([1.0, 2.0]))
        w1 = constant(np.array([3.0, 0.0]))
        w2 = constant(np.array([0.0, 5.0]))
        backward(dot(a, w1))
        backward(dot(a, w2))
        np.testing.assert_allclose(a.grad, [3.0, 5.0])

    def test_zero_grad(self):
        a = parameter(np.array([1.0]))
        backward(scale(a, 3.0))
        zero_grad([a])
        assert a.grad is None

    def test_shared_subgraph_sums_paths(self):
        a = parameter(np.array([2.0]))
        loss = add(mul(a, a), scale(a, 3.0))
        backward(loss)
        # d/da (a^2 + 3a) = 2a + 3 = 7.
        np.testing.assert_allclose(a.grad, [7.0])

    def test_no_grad_detaches(self):
        a = parameter(np.array([1.0, 1.0]))
        with no_grad():
            loss = dot(a, a)
        assert loss.backward_fn is None
        backward(loss)
        assert a.grad is None

    def test_no_grad_restores_on_exit(self):
        a = parameter(np.array([2.0]))
        with no_grad():
            pass
        backward(scale(a, 2.0))
        np.testing.assert_allclose(a.grad, [2.0])

    def test_constant_gets_no_gradient(self):
        a = parameter(np.array([1.0]))
        c = constant(np.array([5.0]))
        backward(dot(a, c))
        assert c.grad is None
        np.testing.assert_allclose(a.grad, [5.0])

    def test_tensor_basics(self):
        t = parameter(np.ones((2, 3)))
        assert t.shape == (2, 3)
        assert constant(np.array(4.0)).item() == 4.0
        assert "Tensor" in repr(t)
