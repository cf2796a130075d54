"""Tests for differentiable operations."""

import mpmath
import numpy as np
import pytest

from apl_survival.engine import Parameter, Tape, Tensor, backward, grad_check, ops
from apl_survival.engine.ops import ALPHA_PRIME, SELU_ALPHA, SELU_LAMBDA
from apl_survival.errors import DimensionError, EmptyInputError


def _param(rng, shape, name="x", low=None, high=None) -> Parameter:
    values = rng.uniform(low, high, size=shape) if low is not None else rng.normal(size=shape)
    return Parameter.from_array(name, values)


def _weighted_sum(out: Tensor, seed: int = 99) -> Tensor:
    """Contract an output with fixed random weights so every entry matters."""
    weights = Tensor(np.random.default_rng(seed).normal(size=out.shape))
    return ops.sum_all(ops.mul(out, weights))


class TestOpGradients:
    """Every op's backward rule against central differences."""

    def test_matmul(self):
        """Both operands of a matrix product."""
        rng = np.random.default_rng(1)
        a, b = _param(rng, (3, 4), "a"), _param(rng, (4, 2), "b")
        assert grad_check(lambda: _weighted_sum(ops.matmul(a.tensor, b.tensor)), [a, b]).passed

    def test_transpose(self):
        """Transposition routes gradients back unchanged."""
        rng = np.random.default_rng(2)
        x = _param(rng, (3, 5))
        assert grad_check(lambda: _weighted_sum(ops.transpose(x.tensor)), [x]).passed

    def test_add_with_row_broadcast(self):
        """A bias row broadcast over every row sums its gradient."""
        rng = np.random.default_rng(3)
        x, b = _param(rng, (4, 3), "x"), _param(rng, (3,), "b")
        assert grad_check(lambda: _weighted_sum(ops.add(x.tensor, b.tensor)), [x, b]).passed

    def test_sub_and_mul(self):
        """Elementwise difference and product."""
        rng = np.random.default_rng(4)
        a, b = _param(rng, (2, 3), "a"), _param(rng, (2, 3), "b")
        report = grad_check(lambda: _weighted_sum(ops.mul(ops.sub(a.tensor, b.tensor), a.tensor)), [a, b])
        assert report.passed

    def test_scalar_ops(self):
        """Scaling and shifting by constants."""
        rng = np.random.default_rng(5)
        x = _param(rng, (5,))
        f = lambda: _weighted_sum(ops.add_scalar(ops.mul_scalar(x.tensor, -2.5), 1.0))
        assert grad_check(f, [x]).passed

    def test_sigmoid_and_log(self):
        """log(sigmoid(x)) stays well inside the domain of log."""
        rng = np.random.default_rng(6)
        x = _param(rng, (6,))
        assert grad_check(lambda: _weighted_sum(ops.log(ops.sigmoid(x.tensor))), [x]).passed

    def test_clamp_min_away_from_threshold(self):
        """Unclamped entries pass the gradient, clamped ones block it."""
        x = Parameter.from_array("x", np.array([0.5, 1e-20, 2.0, -1.0]))
        with Tape():
            backward(_weighted_sum(ops.clamp_min(x.tensor, 1e-12), seed=0))
        weights = np.random.default_rng(0).normal(size=4)
        np.testing.assert_array_equal(x.grad, [weights[0], 0.0, weights[2], 0.0])

    def test_selu(self):
        """SELU on both sides of zero."""
        rng = np.random.default_rng(7)
        x = _param(rng, (3, 4))
        assert grad_check(lambda: _weighted_sum(ops.selu(x.tensor)), [x]).passed

    def test_relu(self):
        """ReLU away from the kink."""
        x = Parameter.from_array("x", np.array([[-1.2, 0.4], [2.0, -0.3]]))
        assert grad_check(lambda: _weighted_sum(ops.relu(x.tensor)), [x]).passed

    def test_alpha_dropout_with_fixed_mask(self):
        """With the mask held fixed the op is affine."""
        rng = np.random.default_rng(8)
        x = _param(rng, (4, 6))
        f = lambda: _weighted_sum(ops.alpha_dropout(x.tensor, 0.25, np.random.default_rng(3), True))
        assert grad_check(f, [x]).passed

    def test_softmax_rows(self):
        """Row-wise softmax."""
        rng = np.random.default_rng(9)
        x = _param(rng, (3, 5))
        assert grad_check(lambda: _weighted_sum(ops.softmax_rows(x.tensor)), [x]).passed

    def test_mean_rows_and_sum_all(self):
        """Column means and the full sum."""
        rng = np.random.default_rng(10)
        x = _param(rng, (4, 3))
        assert grad_check(lambda: _weighted_sum(ops.mean_rows(x.tensor)), [x]).passed
        assert grad_check(lambda: ops.sum_all(x.tensor), [x]).passed

    def test_concat_and_split(self):
        """Joining and splitting row blocks."""
        rng = np.random.default_rng(11)
        a, b = _param(rng, (2, 3), "a"), _param(rng, (3, 3), "b")

        def f():
            top, bottom = ops.split_rows(ops.concat_rows(a.tensor, b.tensor), 1)
            return ops.add(_weighted_sum(top, 1), _weighted_sum(ops.concat([bottom, a.tensor]), 2))

        assert grad_check(f, [a, b]).passed

    def test_reshape_and_slice(self):
        """Views of the same values."""
        rng = np.random.default_rng(12)
        x = _param(rng, (2, 6))
        f = lambda: _weighted_sum(ops.slice_rows(ops.reshape(x.tensor, (4, 3)), 1, 3))
        assert grad_check(f, [x]).passed

    def test_cumprod(self):
        """Cumulative product of a vector."""
        x = Parameter.from_array("x", np.array([0.9, 0.5, 1.3, 0.7]))
        assert grad_check(lambda: _weighted_sum(ops.cumprod(x.tensor)), [x]).passed

    def test_cumprod_with_zero_entry(self):
        """The backward rule never divides, so an exact zero is fine."""
        x = Parameter.from_array("x", np.array([0.8, 0.0, 0.6, 0.9]))
        assert grad_check(lambda: _weighted_sum(ops.cumprod(x.tensor)), [x]).passed

    def test_take(self):
        """Selecting one element."""
        x = Parameter.from_array("x", np.array([1.0, 2.0, 3.0]))
        with Tape():
            backward(ops.mul_scalar(ops.take(x.tensor, 1), 4.0))
        np.testing.assert_array_equal(x.grad, [0.0, 4.0, 0.0])


class TestOpValues:
    """Forward values and shape checks."""

    def test_softmax_rows_sum_to_one(self):
        """10,000 random rows each sum to one."""
        x = np.random.default_rng(0).normal(scale=5.0, size=(10_000, 7))
        y = ops.softmax_rows(x).data
        np.testing.assert_allclose(y.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(y >= 0)

    def test_softmax_is_stable_for_large_scores(self):
        """Huge scores do not overflow."""
        y = ops.softmax_rows(np.array([[1000.0, 1000.0, -1000.0]])).data
        np.testing.assert_allclose(y, [[0.5, 0.5, 0.0]], atol=1e-300)

    def test_selu_matches_high_precision(self):
        """SELU constants and values agree with mpmath."""
        x = np.array([-2.0, -0.5, 0.0, 1.5])
        y = ops.selu(x).data
        with mpmath.workdps(40):
            for xi, yi in zip(x, y):
                ref = SELU_LAMBDA * (xi if xi > 0 else SELU_ALPHA * (mpmath.e ** mpmath.mpf(xi) - 1))
                assert yi == pytest.approx(float(ref), rel=1e-15, abs=1e-300)

    def test_cumprod_matches_numpy(self):
        """Forward cumprod equals numpy's."""
        x = np.array([0.5, 0.25, 2.0])
        np.testing.assert_array_equal(ops.cumprod(x).data, np.cumprod(x))

    def test_matmul_shape_mismatch(self):
        """Inner extents must agree."""
        with pytest.raises(DimensionError):
            ops.matmul(np.ones((2, 3)), np.ones((2, 3)))

    def test_add_incompatible_shapes(self):
        """Non-broadcastable shapes are rejected."""
        with pytest.raises(DimensionError):
            ops.add(np.ones((2, 3)), np.ones(4))

    def test_mean_of_zero_rows(self):
        """Averaging an empty token set is an error."""
        with pytest.raises(EmptyInputError):
            ops.mean_rows(np.empty((0, 4)))

    def test_concat_rows_column_mismatch(self):
        """Row stacking needs equal widths."""
        with pytest.raises(DimensionError):
            ops.concat_rows(np.ones((1, 2)), np.ones((1, 3)))

    def test_take_out_of_range(self):
        """Index beyond the vector."""
        with pytest.raises(DimensionError):
            ops.take(np.ones(3), 3)

    def test_split_point_must_be_interior(self):
        """Both halves must be non-empty."""
        with pytest.raises(DimensionError):
            ops.split_rows(np.ones((3, 2)), 3)


class TestAlphaDropout:
    """Tests for alpha-dropout."""

    def test_identity_in_eval_mode(self):
        """Outside training the input passes through untouched."""
        x = Tensor(np.random.default_rng(0).normal(size=(3, 4)))
        assert ops.alpha_dropout(x, 0.25, None, training=False) is x

    def test_identity_when_p_is_zero(self):
        """No units dropped at p = 0."""
        x = Tensor(np.ones((2, 2)))
        assert ops.alpha_dropout(x, 0.0, np.random.default_rng(0), training=True) is x

    def test_training_needs_generator(self):
        """Masks cannot be drawn without a generator."""
        with pytest.raises(ValueError):
            ops.alpha_dropout(np.ones((2, 2)), 0.25, None, training=True)

    def test_preserves_standardized_moments(self):
        """Zero-mean unit-variance inputs keep mean 0 and variance 1."""
        rng = np.random.default_rng(42)
        x = rng.normal(size=(400, 500))
        y = ops.alpha_dropout(x, 0.25, rng, training=True).data
        assert abs(y.mean()) < 0.01
        assert y.var() == pytest.approx(1.0, abs=0.02)

    def test_dropped_units_take_the_saturation_value(self):
        """Dropped positions all equal a * alpha' + b; about p of them are dropped."""
        p = 0.25
        q = 1.0 - p
        a = (q + ALPHA_PRIME ** 2 * q * p) ** -0.5
        b = -a * p * ALPHA_PRIME
        x = np.full((200, 200), 7.0)
        y = ops.alpha_dropout(x, p, np.random.default_rng(1), training=True).data
        dropped = np.isclose(y, a * ALPHA_PRIME + b, rtol=0, atol=1e-12)
        kept = np.isclose(y, a * 7.0 + b, rtol=0, atol=1e-12)
        assert np.all(dropped | kept)
        assert dropped.mean() == pytest.approx(p, abs=0.02)
