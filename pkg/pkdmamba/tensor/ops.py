from __future__ import annotations

from typing import Sequence

import numpy as np

from ..errors import LabelIndexError, ParameterError, ShapeError
from .core import Function, Tensor, as_tensor

# Clamp inside log terms.
LOG_EPS = 1e-12


# === elementwise arithmetic ===

class Add(Function):
    def forward(self, a, b):
        return a + b

    def backward(self, grad):
        return grad, grad


class Sub(Function):
    def forward(self, a, b):
        return a - b

    def backward(self, grad):
        return grad, -grad


class Mul(Function):
    def forward(self, a, b):
        self.a, self.b = a, b
        return a * b

    def backward(self, grad):
        return grad * self.b, grad * self.a


class Div(Function):
    def forward(self, a, b):
        self.a, self.b = a, b
        return a / b

    def backward(self, grad):
        return grad / self.b, -grad * self.a / (self.b * self.b)


class Neg(Function):
    def forward(self, a):
        return -a

    def backward(self, grad):
        return (-grad,)


class Pow(Function):
    def forward(self, a, exponent: float):
        self.a, self.exponent = a, exponent
        return a ** exponent

    def backward(self, grad):
        return (grad * self.exponent * self.a ** (self.exponent - 1),)


class Exp(Function):
    def forward(self, a):
        self.out = np.exp(a)
        return self.out

    def backward(self, grad):
        return (grad * self.out,)


class Log(Function):
    def forward(self, a):
        self.a = a
        return np.log(a)

    def backward(self, grad):
        return (grad / self.a,)


class Sigmoid(Function):
    def forward(self, a):
        self.out = _sigmoid(a)
        return self.out

    def backward(self, grad):
        return (grad * self.out * (1 - self.out),)


class Softplus(Function):
    def forward(self, a):
        self.a = a
        return np.logaddexp(np.zeros_like(a), a)

    def backward(self, grad):
        return (grad * _sigmoid(self.a),)


class SiLU(Function):
    def forward(self, a):
        self.a = a
        self.sig = _sigmoid(a)
        return a * self.sig

    def backward(self, grad):
        sig = self.sig
        return (grad * (sig + self.a * sig * (1 - sig)),)


class Clip(Function):
    def forward(self, a, low: float, high: float):
        self.mask = (a >= low) & (a <= high)
        return np.clip(a, low, high)

    def backward(self, grad):
        return (grad * self.mask,)


def _sigmoid(a: np.ndarray) -> np.ndarray:
    e = np.exp(-np.abs(a))
    return np.where(a >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(a.dtype, copy=False)


# === linear algebra ===

class MatMul(Function):
    def forward(self, a, b):
        self.a, self.b = a, b
        return np.matmul(a, b)

    def backward(self, grad):
        grad_a = np.matmul(grad, np.swapaxes(self.b, -1, -2))
        grad_b = np.matmul(np.swapaxes(self.a, -1, -2), grad)
        return grad_a, grad_b


# === reductions and shape ===

class Sum(Function):
    def forward(self, a, axis=None, keepdims: bool = False):
        self.shape, self.axis, self.keepdims = a.shape, axis, keepdims
        return np.asarray(a.sum(axis=axis, keepdims=keepdims))

    def backward(self, grad):
        if self.axis is not None and not self.keepdims:
            axes = (self.axis,) if isinstance(self.axis, int) else tuple(self.axis)
            axes = tuple(ax % len(self.shape) for ax in axes)
            grad = np.expand_dims(grad, axes)
        return (np.broadcast_to(grad, self.shape),)


class Reshape(Function):
    def forward(self, a, shape):
        self.shape = a.shape
        return a.reshape(shape)

    def backward(self, grad):
        return (grad.reshape(self.shape),)


class Transpose(Function):
    def forward(self, a, axes=None):
        self.axes = axes
        return np.transpose(a, axes)

    def backward(self, grad):
        if self.axes is None:
            return (np.transpose(grad),)
        return (np.transpose(grad, np.argsort(self.axes)),)


class GetItem(Function):
    def forward(self, a, index):
        self.shape, self.dtype, self.index = a.shape, a.dtype, index
        return np.asarray(a[index])

    def backward(self, grad):
        full = np.zeros(self.shape, dtype=self.dtype)
        np.add.at(full, self.index, grad)
        return (full,)


class Concat(Function):
    def forward(self, *arrays, axis: int = 0):
        self.axis = axis
        self.sizes = [arr.shape[axis] for arr in arrays]
        return np.concatenate(arrays, axis=axis)

    def backward(self, grad):
        cuts = np.cumsum(self.sizes)[:-1]
        return tuple(np.split(grad, cuts, axis=self.axis))


# === softmax family ===

def log_softmax_array(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - x.max(axis=axis, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))


def softmax_array(x: np.ndarray, axis: int = -1) -> np.ndarray:
    e = np.exp(x - x.max(axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


class LogSoftmax(Function):
    def forward(self, a, axis: int = -1):
        self.axis = axis
        self.out = log_softmax_array(a, axis)
        return self.out

    def backward(self, grad):
        probs = np.exp(self.out)
        return (grad - probs * grad.sum(axis=self.axis, keepdims=True),)


class Softmax(Function):
    def forward(self, a, axis: int = -1):
        self.axis = axis
        self.out = softmax_array(a, axis)
        return self.out

    def backward(self, grad):
        inner = (grad * self.out).sum(axis=self.axis, keepdims=True)
        return (self.out * (grad - inner),)


# === convolution ===

class CausalConv1d(Function):
    """Depthwise causal convolution over the time axis of [B, T, d] with zero left padding."""

    def forward(self, x, weight, bias):
        width = weight.shape[1]
        steps = x.shape[1]
        pad = np.zeros((x.shape[0], width - 1, x.shape[2]), dtype=x.dtype)
        self.xp = np.concatenate([pad, x], axis=1)
        self.weight, self.steps = weight, steps
        out = np.broadcast_to(bias, x.shape).copy()
        for j in range(width):
            out += self.xp[:, j:j + steps, :] * weight[:, j]
        return out

    def backward(self, grad):
        width = self.weight.shape[1]
        steps = self.steps
        grad_xp = np.zeros_like(self.xp)
        grad_w = np.empty_like(self.weight)
        for j in range(width):
            grad_xp[:, j:j + steps, :] += grad * self.weight[:, j]
            grad_w[:, j] = (grad * self.xp[:, j:j + steps, :]).sum(axis=(0, 1))
        return grad_xp[:, width - 1:, :], grad_w, grad.sum(axis=(0, 1))


# === public API ===

def add(a, b) -> Tensor:
    return Add.apply(a, b)


def sub(a, b) -> Tensor:
    return Sub.apply(a, b)


def mul(a, b) -> Tensor:
    return Mul.apply(a, b)


def div(a, b) -> Tensor:
    return Div.apply(a, b)


def neg(a) -> Tensor:
    return Neg.apply(a)


def power(a, exponent: float) -> Tensor:
    return Pow.apply(a, exponent=float(exponent))


def exp(a) -> Tensor:
    return Exp.apply(a)


def log(a) -> Tensor:
    return Log.apply(a)


def sigmoid(a) -> Tensor:
    return Sigmoid.apply(a)


def softplus(a) -> Tensor:
    return Softplus.apply(a)


def silu(x) -> Tensor:
    """Swish activation x * sigmoid(x)."""
    return SiLU.apply(x)


def clip(a, low: float, high: float) -> Tensor:
    return Clip.apply(a, low=low, high=high)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs operands of rank >= 2, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")
    return MatMul.apply(a, b)


def sum(a, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    return Sum.apply(a, axis=axis, keepdims=keepdims)


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    if axis is None:
        count = a.size
    else:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        count = int(np.prod([a.shape[ax] for ax in axes]))
    return div(sum(a, axis=axis, keepdims=keepdims), float(count))


def reshape(a, shape: Sequence[int]) -> Tensor:
    return Reshape.apply(a, shape=tuple(shape))


def transpose(a, axes: Sequence[int] | None = None) -> Tensor:
    return Transpose.apply(a, axes=None if axes is None else tuple(axes))


def getitem(a, index) -> Tensor:
    return GetItem.apply(a, index=index)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if len(tensors) == 1:
        return tensors[0]
    return Concat.apply(*tensors, axis=axis)


def log_softmax(logits, axis: int = -1) -> Tensor:
    return LogSoftmax.apply(logits, axis=axis)


def softmax(logits, axis: int = -1) -> Tensor:
    return Softmax.apply(logits, axis=axis)


def softmax_t(logits, temperature: float = 1.0) -> Tensor:
    """Softmax over the last axis of ``logits / temperature``."""
    if not temperature > 0:
        raise ParameterError(f"temperature must be > 0, got {temperature}")
    logits = as_tensor(logits)
    if temperature != 1.0:
        logits = div(logits, float(temperature))
    return softmax(logits)


def causal_conv1d(x, weight, bias) -> Tensor:
    x, weight, bias = as_tensor(x), as_tensor(weight), as_tensor(bias)
    if x.ndim != 3 or weight.ndim != 2 or weight.shape[0] != x.shape[2]:
        raise ShapeError(f"causal_conv1d expects x[B,T,d], weight[d,K]; got {x.shape}, {weight.shape}")
    return CausalConv1d.apply(x, weight, bias)


def _check_targets(targets, n_rows: int, n_labels: int) -> np.ndarray:
    targets = np.asarray(targets)
    if targets.shape != (n_rows,):
        raise ShapeError(f"expected {n_rows} targets, got shape {targets.shape}")
    if n_labels < 2:
        raise ParameterError(f"need at least 2 labels, got {n_labels}")
    if targets.size and (targets.min() < 0 or targets.max() >= n_labels):
        bad = targets[(targets < 0) | (targets >= n_labels)][0]
        raise LabelIndexError(f"target {bad} outside [0, {n_labels})")
    return targets.astype(np.int64)


def cross_entropy(inputs, targets, from_logits: bool = True) -> Tensor:
    """Mean negative log-likelihood of ``targets`` under [B, L] logits or probabilities.

    Probabilities are clamped to [eps, 1 - eps] before the log.
    """
    inputs = as_tensor(inputs)
    if inputs.ndim != 2:
        raise ShapeError(f"cross_entropy expects [B, L], got {inputs.shape}")
    rows, labels = inputs.shape
    targets = _check_targets(targets, rows, labels)
    index = (np.arange(rows), targets)
    if from_logits:
        picked = getitem(log_softmax(inputs), index)
    else:
        picked = log(clip(getitem(inputs, index), LOG_EPS, 1.0 - LOG_EPS))
    return neg(mean(picked))
