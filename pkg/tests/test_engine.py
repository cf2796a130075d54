"""Tests for the tape, the optimizer and gradient checking."""

import numpy as np
import pytest

from apl_survival.engine import AdamW, Parameter, Tape, Tensor, adamw_step, backward, grad_check, ops
from apl_survival.engine.ops import _finish
from apl_survival.errors import DimensionError, GradCheckError


class TestTensor:
    """Tests for tensor construction."""

    def test_scalar_becomes_shape_one(self):
        """A plain number is stored as a length-1 vector."""
        t = Tensor(3.5)
        assert t.shape == (1,)
        assert t.item() == 3.5

    def test_empty_tensor_rejected(self):
        """Zero-extent tensors are not allowed."""
        with pytest.raises(DimensionError):
            Tensor(np.empty((0, 3)))

    def test_item_needs_single_value(self):
        """item() on a vector is an error."""
        with pytest.raises(DimensionError):
            Tensor([1.0, 2.0]).item()

    def test_parameter_requires_grad(self):
        """Parameters are trainable and carry zeroed moment buffers."""
        p = Parameter.from_array("w", np.ones((2, 3)))
        assert p.tensor.requires_grad
        assert p.tensor.name == "w"
        assert np.all(p.grad == 0) and np.all(p.m == 0) and np.all(p.v == 0)


class TestTape:
    """Tests for recording and replaying operations."""

    def test_no_recording_outside_tape(self):
        """Without an active tape, ops only compute values."""
        w = Parameter.from_array("w", np.ones(3))
        out = ops.sum_all(ops.mul(w.tensor, Tensor([1.0, 2.0, 3.0])))
        assert out.item() == 6.0
        assert not out.requires_grad
        assert out.tape is None

    def test_constants_are_not_recorded(self):
        """Ops whose inputs need no gradient are left off the tape."""
        with Tape() as tape:
            ops.sigmoid(Tensor([0.0, 1.0]))
        assert len(tape) == 0

    def test_backward_populates_grad(self):
        """d/dw sum(w * x) = x."""
        w = Parameter.from_array("w", np.array([0.5, -1.0, 2.0]))
        x = Tensor([1.0, 2.0, 3.0])
        with Tape() as tape:
            loss = ops.sum_all(ops.mul(w.tensor, x))
            backward(loss)
        assert len(tape) == 2
        np.testing.assert_array_equal(w.grad, x.data)

    def test_gradients_accumulate_across_backward_calls(self):
        """Two backward passes without zeroing add their gradients."""
        w = Parameter.from_array("w", np.array([1.0, 2.0]))
        for _ in range(2):
            with Tape():
                backward(ops.sum_all(ops.mul(w.tensor, w.tensor)))
        np.testing.assert_allclose(w.grad, 2 * 2 * w.data)

    def test_zero_grad(self):
        """zero_grad resets accumulated gradients."""
        w = Parameter.from_array("w", np.array([1.0, 2.0]))
        with Tape():
            backward(ops.sum_all(w.tensor))
        w.zero_grad()
        assert np.all(w.grad == 0)

    def test_backward_needs_scalar(self):
        """A non-scalar root is rejected."""
        w = Parameter.from_array("w", np.ones(2))
        with Tape():
            out = ops.mul_scalar(w.tensor, 2.0)
            with pytest.raises(DimensionError):
                backward(out)

    def test_shared_subexpression(self):
        """A tensor used twice receives both adjoint contributions."""
        w = Parameter.from_array("w", np.array([3.0]))
        with Tape():
            y = ops.sigmoid(w.tensor)
            backward(ops.add(y, y))
        s = 1.0 / (1.0 + np.exp(-3.0))
        np.testing.assert_allclose(w.grad, [2 * s * (1 - s)], rtol=1e-14)

    def test_scaling_by_power_of_two_is_exact(self):
        """backward of c * f gives exactly c times the gradient of f."""
        rng = np.random.default_rng(0)
        x = Tensor(rng.normal(size=(3, 4)))
        w = Parameter.from_array("w", rng.normal(size=(4, 2)))

        def f():
            return ops.sum_all(ops.sigmoid(ops.matmul(x, w.tensor)))

        with Tape():
            backward(f())
        base = w.grad.copy()
        for c in (0.25, 4.0, 1024.0):
            w.zero_grad()
            with Tape():
                backward(ops.mul_scalar(f(), c))
            np.testing.assert_array_equal(w.grad, c * base)

    def test_mean_of_softmax_has_zero_gradient(self):
        """Softmax rows sum to one, so their overall mean is constant in x."""
        rng = np.random.default_rng(1)
        x = Parameter.from_array("x", rng.normal(size=(3, 5)) * 3.0)
        with Tape():
            y = ops.mul_scalar(ops.sum_all(ops.mean_rows(ops.softmax_rows(x.tensor))), 1.0 / 5)
            backward(y)
        assert y.item() == pytest.approx(0.2, abs=1e-15)
        assert abs(x.grad.sum()) < 1e-10
        assert np.abs(x.grad).max() < 1e-10

    def test_tape_deactivates_on_exit(self):
        """Ops after the with-block are not recorded."""
        w = Parameter.from_array("w", np.ones(2))
        with Tape() as tape:
            ops.sum_all(w.tensor)
        ops.sum_all(w.tensor)
        assert len(tape) == 1


class TestAdamW:
    """Tests for the decoupled-weight-decay optimizer."""

    def test_first_step_matches_closed_form(self):
        """After one step m_hat = g and v_hat = g**2."""
        w0 = np.array([0.5, -2.0, 1.0])
        g = np.array([0.1, -0.3, 0.0])
        p = Parameter.from_array("w", w0.copy())
        p.tensor.grad = g.copy()
        lr, wd, eps = 1e-2, 0.1, 1e-8
        adamw_step([p], lr=lr, wd=wd, betas=(0.9, 0.999), eps=eps, t=1)
        expected = w0 - lr * wd * w0 - lr * g / (np.abs(g) + eps)
        np.testing.assert_allclose(p.data, expected, rtol=1e-12, atol=1e-15)

    def test_zero_learning_rate_freezes_weights(self):
        """lr = 0 changes nothing, decay included."""
        p = Parameter.from_array("w", np.array([1.0, -1.0]))
        p.tensor.grad = np.array([5.0, 5.0])
        adamw_step([p], lr=0.0, wd=1e-3, betas=(0.9, 0.999), eps=1e-8, t=1)
        np.testing.assert_array_equal(p.data, [1.0, -1.0])

    def test_decay_without_gradient(self):
        """With a zero gradient only the decoupled shrinkage applies."""
        p = Parameter.from_array("w", np.array([2.0, -4.0]))
        adamw_step([p], lr=0.5, wd=0.1, betas=(0.9, 0.999), eps=1e-8, t=1)
        np.testing.assert_allclose(p.data, [2.0 * 0.95, -4.0 * 0.95], rtol=1e-15)

    def test_decay_does_not_enter_moments(self):
        """Moment buffers see only the gradient."""
        p = Parameter.from_array("w", np.array([3.0]))
        p.tensor.grad = np.array([0.2])
        adamw_step([p], lr=0.1, wd=0.5, betas=(0.9, 0.999), eps=1e-8, t=1)
        np.testing.assert_allclose(p.m, [0.1 * 0.2])
        np.testing.assert_allclose(p.v, [0.001 * 0.04])

    def test_step_count_must_be_positive(self):
        """Bias correction is undefined at t = 0."""
        p = Parameter.from_array("w", np.ones(1))
        with pytest.raises(ValueError):
            adamw_step([p], lr=0.1, wd=0.0, betas=(0.9, 0.999), eps=1e-8, t=0)

    def test_optimizer_counts_steps_and_zeroes(self):
        """AdamW.step advances t; zero_grad clears gradients."""
        p = Parameter.from_array("w", np.ones(2))
        opt = AdamW([p], lr=1e-3)
        p.tensor.grad = np.ones(2)
        opt.step()
        opt.step()
        assert opt.t == 2
        opt.zero_grad()
        assert np.all(p.grad == 0)

    def test_descends_a_quadratic(self):
        """Repeated steps move toward the minimum of sum((w - 3)^2)."""
        p = Parameter.from_array("w", np.zeros(4))
        opt = AdamW([p], lr=0.1, weight_decay=0.0)
        target = Tensor(np.full(4, 3.0))
        for _ in range(500):
            with Tape():
                diff = ops.sub(p.tensor, target)
                backward(ops.sum_all(ops.mul(diff, diff)))
            opt.step()
            opt.zero_grad()
        np.testing.assert_allclose(p.data, 3.0, atol=0.1)


class TestGradCheck:
    """Tests for finite-difference verification."""

    def test_correct_gradient_passes(self):
        """A smooth function built from recorded ops passes."""
        rng = np.random.default_rng(0)
        w = Parameter.from_array("w", rng.normal(size=(3, 2)))
        x = Tensor(rng.normal(size=(4, 3)))
        report = grad_check(lambda: ops.sum_all(ops.sigmoid(ops.matmul(x, w.tensor))), [w])
        assert report.passed
        assert report.n_coords == 6

    def test_wrong_backward_is_caught(self):
        """An op whose backward rule is off by a factor fails the check."""
        w = Parameter.from_array("w", np.array([1.0, 2.0]))

        def f():
            doubled = _finish("bad_double", w.tensor.data * 2.0, (w.tensor,), lambda g: (g * 3.0,))
            return ops.sum_all(doubled)

        report = grad_check(f, [w])
        assert not report.passed
        assert report.worst_param == "w"
        assert report.max_rel_error == pytest.approx(1.0 / 3.0, rel=1e-6)

    def test_max_coords_limits_work(self):
        """Only the requested number of coordinates is checked per parameter."""
        w = Parameter.from_array("w", np.ones((10, 10)))
        report = grad_check(lambda: ops.sum_all(ops.mul(w.tensor, w.tensor)), [w], max_coords=7)
        assert report.n_coords == 7
        assert report.passed

    def test_non_finite_function_raises(self):
        """An infinite objective cannot be differenced."""
        w = Parameter.from_array("w", np.ones(2))
        with pytest.raises(GradCheckError):
            grad_check(lambda: ops.add(ops.sum_all(w.tensor), Tensor([np.inf])), [w])
