"""Differentiable operations.

Every op computes its value with numpy and, when a Tape is active and any
input requires a gradient, records a backward rule that maps the output
adjoint to input adjoints.
"""

from typing import Optional, Sequence

import numpy as np
from scipy.special import expit

from ..errors import DimensionError, EmptyInputError
from .tensor import BackwardFn, Tensor, active_tape


SELU_LAMBDA = 1.0507009873554805
SELU_ALPHA = 1.6732632423543772
# -lambda * alpha, the SELU saturation value used by alpha-dropout
ALPHA_PRIME = -SELU_LAMBDA * SELU_ALPHA


def as_tensor(x) -> Tensor:
    """Wrap arrays and numbers as constant tensors; pass tensors through."""
    return x if isinstance(x, Tensor) else Tensor(x)


def _finish(name: str, data: np.ndarray, inputs: tuple[Tensor, ...],
            backward_fn: BackwardFn) -> Tensor:
    if __debug__:
        if not np.all(np.isfinite(data)) and all(np.all(np.isfinite(t.data)) for t in inputs):
            raise AssertionError(f"{name} produced non-finite values from finite inputs")
    tape = active_tape()
    needs_grad = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor.__new__(Tensor)
    out.data = data
    out.requires_grad = needs_grad
    out.grad = None
    out.name = None
    out.tape = None
    if needs_grad:
        tape.record(name, inputs, out, backward_fn)
    return out


def _require_2d(name: str, t: Tensor) -> None:
    if t.data.ndim != 2:
        raise DimensionError(f"{name} expects a 2-D tensor, got shape {t.shape}")


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _broadcast_shape(name: str, a: Tensor, b: Tensor) -> tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{name}: shapes {a.shape} and {b.shape} do not broadcast") from None


# ---------------------------------------------------------------- linear algebra

def matmul(a, b) -> Tensor:
    """Matrix product of an m x k and a k x n tensor."""
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: cannot multiply shapes {a.shape} and {b.shape}")
    a_data, b_data = a.data, b.data

    def backward_fn(g):
        return g @ b_data.T, a_data.T @ g

    return _finish("matmul", a_data @ b_data, (a, b), backward_fn)


def transpose(x) -> Tensor:
    x = as_tensor(x)
    _require_2d("transpose", x)
    return _finish("transpose", x.data.T.copy(), (x,), lambda g: (g.T,))


# ---------------------------------------------------------------- elementwise

def add(a, b) -> Tensor:
    """Elementwise sum; ``b`` may be a row vector broadcast over the rows of ``a``."""
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("add", a, b)
    a_shape, b_shape = a.shape, b.shape
    return _finish("add", a.data + b.data, (a, b),
                   lambda g: (_unbroadcast(g, a_shape), _unbroadcast(g, b_shape)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("sub", a, b)
    a_shape, b_shape = a.shape, b.shape
    return _finish("sub", a.data - b.data, (a, b),
                   lambda g: (_unbroadcast(g, a_shape), _unbroadcast(-g, b_shape)))


def mul(a, b) -> Tensor:
    """Elementwise product with broadcasting."""
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("mul", a, b)
    a_data, b_data = a.data, b.data

    def backward_fn(g):
        return _unbroadcast(g * b_data, a_data.shape), _unbroadcast(g * a_data, b_data.shape)

    return _finish("mul", a_data * b_data, (a, b), backward_fn)


def mul_scalar(x, c: float) -> Tensor:
    x = as_tensor(x)
    c = float(c)
    return _finish("mul_scalar", x.data * c, (x,), lambda g: (g * c,))


def add_scalar(x, c: float) -> Tensor:
    x = as_tensor(x)
    return _finish("add_scalar", x.data + float(c), (x,), lambda g: (g,))


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    y = expit(x.data)
    return _finish("sigmoid", y, (x,), lambda g: (g * y * (1.0 - y),))


def log(x) -> Tensor:
    x = as_tensor(x)
    x_data = x.data
    return _finish("log", np.log(x_data), (x,), lambda g: (g / x_data,))


def clamp_min(x, eps: float) -> Tensor:
    """max(x, eps); the gradient flows only through unclamped entries."""
    x = as_tensor(x)
    keep = x.data > eps
    return _finish("clamp_min", np.where(keep, x.data, eps), (x,),
                   lambda g: (g * keep,))


def selu(x) -> Tensor:
    x = as_tensor(x)
    x_data = x.data
    neg = np.minimum(x_data, 0.0)
    y = SELU_LAMBDA * np.where(x_data > 0, x_data, SELU_ALPHA * np.expm1(neg))

    def backward_fn(g):
        slope = np.where(x_data > 0, 1.0, SELU_ALPHA * np.exp(neg))
        return (g * SELU_LAMBDA * slope,)

    return _finish("selu", y, (x,), backward_fn)


def relu(x) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0
    return _finish("relu", x.data * mask, (x,), lambda g: (g * mask,))


def alpha_dropout(x, p: float, rng: Optional[np.random.Generator], training: bool) -> Tensor:
    """Alpha-dropout: drop to the SELU saturation value, then an affine correction.

    Keeps zero mean and unit variance of SELU-normalized activations. Identity
    outside training or when ``p`` is zero.
    """
    x = as_tensor(x)
    if not training or p <= 0.0:
        return x
    if rng is None:
        raise ValueError("alpha_dropout needs a random generator in training mode")
    q = 1.0 - p
    a = (q + ALPHA_PRIME ** 2 * q * p) ** -0.5
    b = -a * p * ALPHA_PRIME
    keep = (rng.random(x.shape) < q).astype(np.float64)
    y = a * (x.data * keep + ALPHA_PRIME * (1.0 - keep)) + b
    return _finish("alpha_dropout", y, (x,), lambda g: (g * a * keep,))


# ---------------------------------------------------------------- reductions and reshaping

def softmax_rows(x) -> Tensor:
    """Row-wise softmax computed with per-row max subtraction."""
    x = as_tensor(x)
    _require_2d("softmax_rows", x)
    shifted = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=1, keepdims=True)

    def backward_fn(g):
        return (y * (g - np.sum(g * y, axis=1, keepdims=True)),)

    return _finish("softmax_rows", y, (x,), backward_fn)


def mean_rows(x) -> Tensor:
    """Column-wise mean of an m x n tensor, giving a length-n vector."""
    if not isinstance(x, Tensor) and np.ndim(x) == 2 and np.shape(x)[0] == 0:
        raise EmptyInputError("mean_rows: cannot average zero rows")
    x = as_tensor(x)
    _require_2d("mean_rows", x)
    m = x.shape[0]
    return _finish("mean_rows", x.data.mean(axis=0), (x,),
                   lambda g: (np.broadcast_to(g / m, x.data.shape).copy(),))


def sum_all(x) -> Tensor:
    x = as_tensor(x)
    shape = x.shape
    return _finish("sum_all", np.array([x.data.sum()]), (x,),
                   lambda g: (np.full(shape, g[0]),))


def concat_rows(a, b) -> Tensor:
    """Stack the rows of ``a`` on top of the rows of ``b``."""
    a, b = as_tensor(a), as_tensor(b)
    _require_2d("concat_rows", a)
    _require_2d("concat_rows", b)
    if a.shape[1] != b.shape[1]:
        raise DimensionError(f"concat_rows: column counts differ, {a.shape} vs {b.shape}")
    m = a.shape[0]
    return _finish("concat_rows", np.concatenate([a.data, b.data], axis=0), (a, b),
                   lambda g: (g[:m], g[m:]))


def concat(tensors: Sequence[Tensor]) -> Tensor:
    """Join tensors along their first axis (vectors end to end, matrices by rows)."""
    tensors = tuple(as_tensor(t) for t in tensors)
    if not tensors:
        raise EmptyInputError("concat: nothing to join")
    trailing = tensors[0].shape[1:]
    for t in tensors:
        if t.shape[1:] != trailing:
            raise DimensionError(f"concat: trailing shapes differ, {tensors[0].shape} vs {t.shape}")
    bounds = np.cumsum([0] + [t.shape[0] for t in tensors])

    def backward_fn(g):
        return tuple(g[bounds[i]:bounds[i + 1]] for i in range(len(tensors)))

    return _finish("concat", np.concatenate([t.data for t in tensors], axis=0), tensors, backward_fn)


def reshape(x, shape: tuple[int, ...]) -> Tensor:
    x = as_tensor(x)
    in_shape = x.shape
    try:
        y = x.data.reshape(shape)
    except ValueError:
        raise DimensionError(f"reshape: cannot view {in_shape} as {shape}") from None
    return _finish("reshape", y.copy(), (x,), lambda g: (g.reshape(in_shape),))


def slice_rows(x, start: int, stop: int) -> Tensor:
    x = as_tensor(x)
    _require_2d("slice_rows", x)
    shape = x.shape

    def backward_fn(g):
        full = np.zeros(shape)
        full[start:stop] = g
        return (full,)

    return _finish("slice_rows", x.data[start:stop].copy(), (x,), backward_fn)


def split_rows(x, m: int) -> tuple[Tensor, Tensor]:
    """Inverse of concat_rows: the first ``m`` rows and the rest."""
    x = as_tensor(x)
    if not 0 < m < x.shape[0]:
        raise DimensionError(f"split_rows: split point {m} outside (0, {x.shape[0]})")
    return slice_rows(x, 0, m), slice_rows(x, m, x.shape[0])


def cumprod(x) -> Tensor:
    """Cumulative product of a 1-D tensor."""
    x = as_tensor(x)
    if x.data.ndim != 1:
        raise DimensionError(f"cumprod expects a 1-D tensor, got shape {x.shape}")
    x_data = x.data
    n = x_data.shape[0]

    def backward_fn(g):
        # d y_t / d x_j = prod_{i<=t, i!=j} x_i, computed without division
        grad = np.zeros(n)
        for j in range(n):
            partial = 1.0
            for i in range(j):
                partial *= x_data[i]
            acc = 0.0
            for t in range(j, n):
                if t > j:
                    partial *= x_data[t]
                acc += g[t] * partial
            grad[j] = acc
        return (grad,)

    return _finish("cumprod", np.cumprod(x_data), (x,), backward_fn)


def take(x, index: int) -> Tensor:
    """Select one element of a 1-D tensor as a shape-(1,) tensor."""
    x = as_tensor(x)
    if x.data.ndim != 1 or not 0 <= index < x.shape[0]:
        raise DimensionError(f"take: index {index} invalid for shape {x.shape}")
    shape = x.shape

    def backward_fn(g):
        full = np.zeros(shape)
        full[index] = g[0]
        return (full,)

    return _finish("take", x.data[index:index + 1].copy(), (x,), backward_fn)


def linear(x, weight, bias=None) -> Tensor:
    """x @ W (+ b) with W stored as in_features x out_features."""
    y = matmul(x, weight)
    return add(y, bias) if bias is not None else y
