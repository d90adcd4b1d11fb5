"""Elementwise, reduction, shape and linear-algebra operations.

All backward rules here are composed of other recorded operations, so they
support double backward.  Binary operations broadcast one-sidedly: the result
shape must equal the shape of one of the operands (a scalar, a trailing-axis
row such as a bias, or size-1 axes may expand; two operands may not expand
each other into an outer product).
"""
from __future__ import annotations

import numpy as np

from .tensor import (
    DimensionError,
    DomainError,
    Function,
    Tensor,
    as_tensor,
    is_grad_enabled,
)


def _broadcast_shape(a: tuple, b: tuple, opname: str) -> tuple:
    try:
        out = np.broadcast_shapes(a, b)
    except ValueError:
        raise DimensionError(f"{opname}: cannot broadcast shapes {a} and {b}") from None
    if out != a and out != b:
        raise DimensionError(
            f"{opname}: shapes {a} and {b} would expand each other; only one-sided broadcast is allowed")
    return out


def _reduce_to(grad: Tensor, shape: tuple) -> Tensor:
    return grad if grad.shape == shape else sum_to(grad, shape)


# -- binary elementwise -------------------------------------------------------

class _Binary(Function):
    def forward(self, a, b):
        _broadcast_shape(a.shape, b.shape, self.name)
        return self.compute(a, b)


class Add(_Binary):
    name = "add"

    def compute(self, a, b):
        return a + b

    def backward(self, grad):
        a, b = self.inputs
        return (_reduce_to(grad, a.shape) if self.needs_input_grad[0] else None,
                _reduce_to(grad, b.shape) if self.needs_input_grad[1] else None)


class Sub(_Binary):
    name = "sub"

    def compute(self, a, b):
        return a - b

    def backward(self, grad):
        a, b = self.inputs
        return (_reduce_to(grad, a.shape) if self.needs_input_grad[0] else None,
                _reduce_to(neg(grad), b.shape) if self.needs_input_grad[1] else None)


class Mul(_Binary):
    name = "mul"

    def compute(self, a, b):
        return a * b

    def backward(self, grad):
        a, b = self.inputs
        return (_reduce_to(grad * b, a.shape) if self.needs_input_grad[0] else None,
                _reduce_to(grad * a, b.shape) if self.needs_input_grad[1] else None)


class Div(_Binary):
    name = "div"

    def compute(self, a, b):
        if np.any(b == 0):
            raise DomainError("div: division by zero")
        return a / b

    def backward(self, grad):
        a, b = self.inputs
        ga = _reduce_to(grad / b, a.shape) if self.needs_input_grad[0] else None
        gb = _reduce_to(neg(grad * a / (b * b)), b.shape) if self.needs_input_grad[1] else None
        return ga, gb


def add(a, b) -> Tensor:
    return Add.apply(a, b)


def sub(a, b) -> Tensor:
    return Sub.apply(a, b)


def mul(a, b) -> Tensor:
    return Mul.apply(a, b)


def div(a, b) -> Tensor:
    return Div.apply(a, b)


# -- unary elementwise --------------------------------------------------------

class Neg(Function):
    name = "neg"

    def forward(self, x):
        return -x

    def backward(self, grad):
        return (neg(grad),)


class Exp(Function):
    name = "exp"

    def forward(self, x):
        self.out = np.exp(x)
        return self.out

    def backward(self, grad):
        y = exp(self.inputs[0]) if is_grad_enabled() else Tensor(self.out)
        return (grad * y,)


class Log(Function):
    name = "log"

    def forward(self, x):
        if np.any(x <= 0):
            raise DomainError("log: argument must be strictly positive")
        return np.log(x)

    def backward(self, grad):
        return (grad / self.inputs[0],)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class Sigmoid(Function):
    name = "sigmoid"

    def forward(self, x):
        self.out = _sigmoid(x)
        return self.out

    def backward(self, grad):
        s = sigmoid(self.inputs[0]) if is_grad_enabled() else Tensor(self.out)
        return (grad * s * (1.0 - s),)


class Tanh(Function):
    name = "tanh"

    def forward(self, x):
        self.out = np.tanh(x)
        return self.out

    def backward(self, grad):
        t = tanh(self.inputs[0]) if is_grad_enabled() else Tensor(self.out)
        return (grad * (1.0 - t * t),)


class _Masked(Function):
    """Piecewise-linear ops: the derivative is a constant mask a.e."""

    def backward(self, grad):
        return (grad * Tensor(self.mask),)


class Relu(_Masked):
    name = "relu"

    def forward(self, x):
        self.mask = (x > 0).astype(np.float64)
        return x * self.mask


class LeakyRelu(_Masked):
    name = "leaky_relu"

    def forward(self, x, slope=0.2):
        self.mask = np.where(x > 0, 1.0, slope)
        return x * self.mask


class Clip(_Masked):
    name = "clip"

    def forward(self, x, lo=-np.inf, hi=np.inf):
        self.mask = ((x >= lo) & (x <= hi)).astype(np.float64)
        return np.clip(x, lo, hi)


class Pow(Function):
    name = "pow"

    def forward(self, x, p=2.0):
        self.p = float(p)
        if self.p != int(self.p) and np.any(x < 0):
            raise DomainError("pow: negative base with fractional exponent")
        if self.p < 1 and np.any(x == 0):
            raise DomainError("pow: zero base with exponent below one has no derivative")
        return np.power(x, self.p)

    def backward(self, grad):
        x = self.inputs[0]
        if self.p == 1.0:
            return (grad,)
        if self.p == 2.0:
            return (grad * x * 2.0,)
        return (grad * pow(x, self.p - 1.0) * self.p,)


def neg(x) -> Tensor:
    return Neg.apply(x)


def exp(x) -> Tensor:
    return Exp.apply(x)


def log(x) -> Tensor:
    return Log.apply(x)


def sigmoid(x) -> Tensor:
    return Sigmoid.apply(x)


def tanh(x) -> Tensor:
    return Tanh.apply(x)


def relu(x) -> Tensor:
    return Relu.apply(x)


def leaky_relu(x, slope: float = 0.2) -> Tensor:
    return LeakyRelu.apply(x, slope=slope)


def clip(x, lo: float, hi: float) -> Tensor:
    return Clip.apply(x, lo=lo, hi=hi)


def pow(x, p: float) -> Tensor:
    return Pow.apply(x, p=p)


def sqrt(x) -> Tensor:
    return Pow.apply(x, p=0.5)


def square(x) -> Tensor:
    return Pow.apply(x, p=2.0)


def elementwise(op: str, *args) -> Tensor:
    """Dispatch by name: add, mul, sub, sigmoid, tanh, relu, log, exp, neg."""
    table = {"add": add, "mul": mul, "sub": sub, "div": div, "sigmoid": sigmoid, "tanh": tanh,
             "relu": relu, "log": log, "exp": exp, "neg": neg, "leaky_relu": leaky_relu}
    if op not in table:
        raise ValueError(f"unknown elementwise op {op!r}")
    return table[op](*args)


# -- reductions and broadcasting ------------------------------------------------

class Sum(Function):
    name = "sum"

    def forward(self, x, axis=None, keepdims=False):
        self.axis, self.keepdims = axis, keepdims
        return np.sum(x, axis=axis, keepdims=keepdims)

    def backward(self, grad):
        shape = self.inputs[0].shape
        if self.axis is not None and not self.keepdims:
            axes = (self.axis,) if isinstance(self.axis, int) else tuple(self.axis)
            kept = list(shape)
            for ax in axes:
                kept[ax % len(shape)] = 1
            grad = reshape(grad, tuple(kept))
        elif self.axis is None:
            grad = reshape(grad, (1,) * len(shape))
        return (broadcast_to(grad, shape),)


class SumTo(Function):
    name = "sum_to"

    def forward(self, x, shape=()):
        self.shape = tuple(shape)
        lead = x.ndim - len(self.shape)
        axes = tuple(range(lead)) + tuple(
            lead + i for i, n in enumerate(self.shape) if n == 1 and x.shape[lead + i] != 1)
        out = np.sum(x, axis=axes, keepdims=True) if axes else x
        return out.reshape(self.shape)

    def backward(self, grad):
        return (broadcast_to(grad, self.inputs[0].shape),)


class BroadcastTo(Function):
    name = "broadcast_to"

    def forward(self, x, shape=()):
        return np.broadcast_to(x, tuple(shape)).copy()

    def backward(self, grad):
        return (sum_to(grad, self.inputs[0].shape),)


def sum(x, axis=None, keepdims=False) -> Tensor:  # noqa: A001
    return Sum.apply(x, axis=axis, keepdims=keepdims)


def mean(x, axis=None, keepdims=False) -> Tensor:
    x = as_tensor(x)
    if axis is None:
        n = x.size
    else:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        n = int(np.prod([x.shape[a] for a in axes]))
    return Sum.apply(x, axis=axis, keepdims=keepdims) * (1.0 / n)


def sum_to(x, shape) -> Tensor:
    return SumTo.apply(x, shape=tuple(shape))


def broadcast_to(x, shape) -> Tensor:
    return BroadcastTo.apply(x, shape=tuple(shape))


# -- shape manipulation -------------------------------------------------------

class Reshape(Function):
    name = "reshape"

    def forward(self, x, shape=()):
        return x.reshape(shape)

    def backward(self, grad):
        return (reshape(grad, self.inputs[0].shape),)


class Transpose(Function):
    name = "transpose"

    def forward(self, x):
        if x.ndim != 2:
            raise DimensionError(f"transpose: expects a matrix, got shape {x.shape}")
        return x.T.copy()

    def backward(self, grad):
        return (transpose(grad),)


class GetItem(Function):
    name = "getitem"

    def forward(self, x, index=None):
        self.index = index
        return np.array(x[index], dtype=np.float64)

    def backward(self, grad):
        return (Scatter.apply(grad, shape=self.inputs[0].shape, index=self.index),)


class Scatter(Function):
    """Adjoint of GetItem: place values into zeros of ``shape`` (summing repeats)."""

    name = "scatter"

    def forward(self, x, shape=(), index=None):
        self.index = index
        out = np.zeros(shape)
        np.add.at(out, index, x)
        return out

    def backward(self, grad):
        return (getitem(grad, self.index),)


class Concat(Function):
    name = "concat"

    def forward(self, *xs, axis=0):
        self.axis = axis
        for x in xs[1:]:
            if x.ndim != xs[0].ndim or any(
                    n != m for i, (n, m) in enumerate(zip(x.shape, xs[0].shape)) if i != axis % x.ndim):
                raise DimensionError(
                    f"concat: shapes {[y.shape for y in xs]} disagree off axis {axis}")
        self.sizes = [x.shape[axis] for x in xs]
        return np.concatenate(xs, axis=axis)

    def backward(self, grad):
        out, start = [], 0
        for need, n in zip(self.needs_input_grad, self.sizes):
            if need:
                idx = [slice(None)] * grad.ndim
                idx[self.axis] = slice(start, start + n)
                out.append(getitem(grad, tuple(idx)))
            else:
                out.append(None)
            start += n
        return tuple(out)


def reshape(x, shape) -> Tensor:
    return Reshape.apply(x, shape=tuple(shape))


def transpose(x) -> Tensor:
    return Transpose.apply(x)


def getitem(x, index) -> Tensor:
    return GetItem.apply(x, index=index)


def concat(xs, axis: int = 0) -> Tensor:
    return Concat.apply(*xs, axis=axis)


def flip(x, axis: int = 0) -> Tensor:
    x = as_tensor(x)
    idx = [slice(None)] * x.ndim
    idx[axis] = slice(None, None, -1)
    return getitem(x, tuple(idx))


# -- linear algebra -------------------------------------------------------------

class MatMul(Function):
    name = "matmul"

    def forward(self, a, b):
        if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
            raise DimensionError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
        return a @ b

    def backward(self, grad):
        a, b = self.inputs
        ga = matmul(grad, transpose(b)) if self.needs_input_grad[0] else None
        gb = matmul(transpose(a), grad) if self.needs_input_grad[1] else None
        return ga, gb


def matmul(a, b) -> Tensor:
    return MatMul.apply(a, b)
