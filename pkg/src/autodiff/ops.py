"""Differentiable operations over `Tensor`.

Each operation is a `Function` subclass with an explicit backward rule and a
thin public wrapper that validates arguments. Broadcasting is limited to what
numpy does for the elementwise operations; everything else is shape-checked.
"""
from typing import Any, Optional, Sequence, Tuple

import numpy as np

from src.autodiff.tensor import Function, Tensor, backward, default_dtype
from src.common.errors import EmptyNeighborhoodError, ShapeError

__all__ = [
    "as_tensor", "add", "sub", "mul", "neg", "scale", "matmul", "leaky_relu",
    "sigmoid", "masked_softmax", "softmax", "sum", "mean", "reshape", "transpose",
    "concat", "take", "replace_rows", "max", "dropout", "cross_entropy_with_logits",
    "binary_cross_entropy_with_logits", "backward",
]


def as_tensor(value: Any) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value, requires_grad=False)


class Add(Function):
    def forward(self, a, b):
        self.shapes = (a.shape, b.shape)
        return a + b

    def backward(self, grad):
        return (self.unbroadcast(grad, self.shapes[0]), self.unbroadcast(grad, self.shapes[1]))


class Sub(Function):
    def forward(self, a, b):
        self.shapes = (a.shape, b.shape)
        return a - b

    def backward(self, grad):
        return (self.unbroadcast(grad, self.shapes[0]), self.unbroadcast(-grad, self.shapes[1]))


class Mul(Function):
    def forward(self, a, b):
        self.a, self.b = a, b
        return a * b

    def backward(self, grad):
        return (
            self.unbroadcast(grad * self.b, self.a.shape),
            self.unbroadcast(grad * self.a, self.b.shape),
        )


class Neg(Function):
    def forward(self, x):
        return -x

    def backward(self, grad):
        return (-grad,)


class Scale(Function):
    def forward(self, x, factor: float = 1.0):
        self.factor = factor
        return x * factor

    def backward(self, grad):
        return (grad * self.factor,)


class MatMul(Function):
    def forward(self, a, b):
        self.a, self.b = a, b
        return a @ b

    def backward(self, grad):
        return (grad @ self.b.T, self.a.T @ grad)


class LeakyReLU(Function):
    def forward(self, x, slope: float = 0.2):
        self.local = np.where(x >= 0, 1.0, slope).astype(x.dtype)
        return x * self.local

    def backward(self, grad):
        return (grad * self.local,)


class Sigmoid(Function):
    def forward(self, x):
        self.out = _sigmoid(x)
        return self.out

    def backward(self, grad):
        return (grad * self.out * (1.0 - self.out),)


class MaskedSoftmax(Function):
    def forward(self, logits, mask: np.ndarray = None, axis: int = -1):
        self.axis = axis
        shifted = np.where(mask, logits, -np.inf)
        peak = shifted.max(axis=axis, keepdims=True)
        weights = np.exp(np.where(mask, logits - peak, -np.inf))
        self.out = weights / weights.sum(axis=axis, keepdims=True)
        return self.out

    def backward(self, grad):
        inner = (grad * self.out).sum(axis=self.axis, keepdims=True)
        return (self.out * (grad - inner),)


class Sum(Function):
    def forward(self, x, axis: Optional[int] = None, keepdims: bool = False):
        self.shape, self.axis, self.keepdims = x.shape, axis, keepdims
        return np.asarray(x.sum(axis=axis, keepdims=keepdims))

    def backward(self, grad):
        if self.axis is not None and not self.keepdims:
            grad = np.expand_dims(grad, self.axis)
        return (np.broadcast_to(grad, self.shape),)


class Reshape(Function):
    def forward(self, x, shape: Tuple[int, ...] = ()):
        self.shape = x.shape
        return x.reshape(shape)

    def backward(self, grad):
        return (grad.reshape(self.shape),)


class Transpose(Function):
    def forward(self, x):
        return x.T

    def backward(self, grad):
        return (grad.T,)


class Concat(Function):
    def forward(self, *arrays, axis: int = 0):
        self.axis = axis
        self.splits = np.cumsum([a.shape[axis] for a in arrays])[:-1]
        return np.concatenate(arrays, axis=axis)

    def backward(self, grad):
        return tuple(np.split(grad, self.splits, axis=self.axis))


class Take(Function):
    def forward(self, x, key: Any = None):
        self.shape, self.key = x.shape, key
        return np.array(x[key])

    def backward(self, grad):
        full = np.zeros(self.shape, dtype=grad.dtype)
        np.add.at(full, self.key, grad)
        return (full,)


class ReplaceRows(Function):
    def forward(self, base, rows_values, rows: np.ndarray = None):
        self.rows = rows
        out = base.copy()
        out[rows] = rows_values
        return out

    def backward(self, grad):
        base_grad = grad.copy()
        base_grad[self.rows] = 0.0
        return (base_grad, grad[self.rows])


class Max(Function):
    def forward(self, x, axis: int = -1):
        self.shape, self.axis = x.shape, axis
        self.argmax = np.expand_dims(np.argmax(x, axis=axis), axis)
        return np.take_along_axis(x, self.argmax, axis=axis).squeeze(axis)

    def backward(self, grad):
        full = np.zeros(self.shape, dtype=grad.dtype)
        np.put_along_axis(full, self.argmax, np.expand_dims(grad, self.axis), axis=self.axis)
        return (full,)


class Dropout(Function):
    def forward(self, x, keep: np.ndarray = None):
        self.keep = keep
        return x * keep

    def backward(self, grad):
        return (grad * self.keep,)


class CrossEntropyWithLogits(Function):
    def forward(self, logits, target: int = 0):
        peak = logits.max()
        shifted = logits - peak
        log_norm = np.log(np.exp(shifted).sum())
        self.probs = np.exp(shifted - log_norm)
        self.target = target
        return np.asarray(log_norm - shifted[target])

    def backward(self, grad):
        local = self.probs.copy()
        local[self.target] -= 1.0
        return (grad * local,)


class BinaryCrossEntropyWithLogits(Function):
    def forward(self, logits, targets: np.ndarray = None):
        self.targets = targets.astype(logits.dtype)
        self.probs = _sigmoid(logits)
        per_item = (
            np.maximum(logits, 0.0) - logits * self.targets + np.log1p(np.exp(-np.abs(logits)))
        )
        return np.asarray(per_item.mean())

    def backward(self, grad):
        return (grad * (self.probs - self.targets) / self.probs.size,)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    positive = x >= 0
    z = np.exp(-np.abs(x))
    return np.where(positive, 1.0 / (1.0 + z), z / (1.0 + z)).astype(x.dtype)


def add(a: Tensor, b: Tensor) -> Tensor:
    return Add.apply(a, b)


def sub(a: Tensor, b: Tensor) -> Tensor:
    return Sub.apply(a, b)


def mul(a: Tensor, b: Tensor) -> Tensor:
    return Mul.apply(a, b)


def neg(x: Tensor) -> Tensor:
    return Neg.apply(x)


def scale(x: Tensor, factor: float) -> Tensor:
    return Scale.apply(x, factor=factor)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul expects 2-d operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(
            f"matmul dimension mismatch: {a.shape} @ {b.shape} "
            f"(inner extents {a.shape[1]} != {b.shape[0]})"
        )
    return MatMul.apply(a, b)


def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    if not 0.0 < slope < 1.0:
        raise ValueError(f"leaky_relu slope must lie in (0, 1), got {slope}")
    return LeakyReLU.apply(x, slope=slope)


def sigmoid(x: Tensor) -> Tensor:
    return Sigmoid.apply(x)


def masked_softmax(logits: Tensor, mask: Any, axis: int = -1) -> Tensor:
    """Softmax over the masked-true entries along `axis`; masked-false entries are exactly 0."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != logits.shape:
        raise ShapeError(f"mask shape {mask.shape} does not match logits shape {logits.shape}")
    if not mask.any(axis=axis).all():
        raise EmptyNeighborhoodError("empty neighborhood")
    return MaskedSoftmax.apply(logits, mask=mask, axis=axis)


def softmax(logits: Tensor, axis: int = -1) -> Tensor:
    return masked_softmax(logits, np.ones(logits.shape, dtype=bool), axis=axis)


def sum(x: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    return Sum.apply(x, axis=axis, keepdims=keepdims)


def mean(x: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    count = x.size if axis is None else x.shape[axis]
    if count == 0:
        raise ShapeError(f"mean over an empty extent of shape {x.shape}")
    return scale(sum(x, axis=axis, keepdims=keepdims), 1.0 / count)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    return Reshape.apply(x, shape=tuple(shape))


def transpose(x: Tensor) -> Tensor:
    if x.ndim != 2:
        raise ShapeError(f"transpose expects a 2-d tensor, got {x.shape}")
    return Transpose.apply(x)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise ShapeError("concat needs at least one tensor")
    return Concat.apply(*tensors, axis=axis)


def take(x: Tensor, key: Any) -> Tensor:
    """Numpy-style indexing; the backward pass scatter-adds, so repeated indices accumulate."""
    return Take.apply(x, key=key)


def replace_rows(base: Tensor, rows_values: Tensor, rows: Any) -> Tensor:
    """Copy of `base` whose listed rows are replaced; every other row is passed through untouched."""
    rows = np.asarray(rows, dtype=np.int64)
    if len(np.unique(rows)) != len(rows):
        raise ShapeError("replace_rows needs distinct row indices")
    expected = (len(rows),) + base.shape[1:]
    if rows_values.shape != expected:
        raise ShapeError(f"replacement rows have shape {rows_values.shape}, expected {expected}")
    return ReplaceRows.apply(base, rows_values, rows=rows)


def max(x: Tensor, axis: int = -1) -> Tensor:
    return Max.apply(x, axis=axis)


def dropout(x: Tensor, p: float, training: bool, rng: Optional[np.random.Generator] = None) -> Tensor:
    """Inverted dropout: Bernoulli keep-mask scaled by 1/(1-p) in training, identity otherwise."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must lie in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    if rng is None:
        raise ValueError("dropout in training mode needs a random generator")
    keep = (rng.random(x.shape) >= p).astype(x.data.dtype) / (1.0 - p)
    return Dropout.apply(x, keep=keep)


def cross_entropy_with_logits(logits: Tensor, target: int) -> Tensor:
    """Categorical cross-entropy of a 1-d logit vector against a class index."""
    if logits.ndim != 1 or logits.shape[0] == 0:
        raise ShapeError(f"cross entropy expects a non-empty 1-d logit vector, got {logits.shape}")
    if not 0 <= target < logits.shape[0]:
        raise ShapeError(f"target {target} outside [0, {logits.shape[0]})")
    return CrossEntropyWithLogits.apply(logits, target=int(target))


def binary_cross_entropy_with_logits(logits: Tensor, targets: Any) -> Tensor:
    """Mean binary cross-entropy over a 1-d logit vector."""
    targets = np.asarray(targets, dtype=default_dtype())
    if logits.ndim != 1 or targets.shape != logits.shape or logits.shape[0] == 0:
        raise ShapeError(
            f"binary cross entropy expects matching non-empty 1-d shapes, "
            f"got {logits.shape} and {targets.shape}"
        )
    return BinaryCrossEntropyWithLogits.apply(logits, targets=targets)
