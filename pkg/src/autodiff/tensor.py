"""Dense tensors with tape-based reverse-mode gradients.

A `Tape` records every differentiable operation executed while it is active.
`Tape.backward(loss)` replays the record in reverse, so each recorded
operation is visited exactly once, and accumulates gradients into the `grad`
of the leaf tensors (tensors not produced on that tape) that require them.
Operations executed with no active tape are not recorded and their outputs do
not require grad, which is how inference runs.
"""
import threading
from typing import Any, Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from src.common.errors import TapeError

_state = threading.local()
_default_dtype = np.dtype(np.float64)


def set_default_dtype(dtype: Any) -> None:
    global _default_dtype
    dtype = np.dtype(dtype)
    if dtype not in (np.dtype(np.float64), np.dtype(np.float32)):
        raise ValueError(f"Unsupported precision: {dtype}")
    _default_dtype = dtype


def default_dtype() -> np.dtype:
    return _default_dtype


def _tape_stack() -> List["Tape"]:
    if not hasattr(_state, "tapes"):
        _state.tapes = []
    return _state.tapes


def current_tape() -> Optional["Tape"]:
    stack = _tape_stack()
    return stack[-1] if stack else None


class Tensor:
    def __init__(self, data: Any, requires_grad: bool = False, name: Optional[str] = None,
                 dtype: Any = None):
        self.data = np.array(data, dtype=dtype or _default_dtype)
        self.requires_grad = requires_grad
        self.name = name
        self._grad: Optional[np.ndarray] = None
        self._tape: Optional["Tape"] = None

    @classmethod
    def _wrap(cls, data: np.ndarray, requires_grad: bool) -> "Tensor":
        out = cls.__new__(cls)
        out.data = data
        out.requires_grad = requires_grad
        out.name = None
        out._grad = None
        out._tape = None
        return out

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def grad(self) -> Optional[np.ndarray]:
        if not self.requires_grad:
            return None
        if self._grad is None:
            self._grad = np.zeros_like(self.data)
        return self._grad

    def zero_grad(self) -> None:
        self._grad = None

    def accumulate_grad(self, grad: np.ndarray) -> None:
        if grad.shape != self.data.shape:
            raise TapeError(
                f"Gradient shape {grad.shape} does not match tensor shape {self.data.shape}"
            )
        self._grad = self.grad + grad

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def __repr__(self) -> str:
        label = f" name={self.name}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"

    def __add__(self, other: Any) -> "Tensor":
        from src.autodiff import ops
        return ops.add(self, ops.as_tensor(other))

    __radd__ = __add__

    def __sub__(self, other: Any) -> "Tensor":
        from src.autodiff import ops
        return ops.sub(self, ops.as_tensor(other))

    def __rsub__(self, other: Any) -> "Tensor":
        from src.autodiff import ops
        return ops.sub(ops.as_tensor(other), self)

    def __mul__(self, other: Any) -> "Tensor":
        from src.autodiff import ops
        if isinstance(other, (int, float)):
            return ops.scale(self, float(other))
        return ops.mul(self, ops.as_tensor(other))

    __rmul__ = __mul__

    def __neg__(self) -> "Tensor":
        from src.autodiff import ops
        return ops.neg(self)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        from src.autodiff import ops
        return ops.matmul(self, other)

    def __getitem__(self, key: Any) -> "Tensor":
        from src.autodiff import ops
        return ops.take(self, key)

    @property
    def T(self) -> "Tensor":
        from src.autodiff import ops
        return ops.transpose(self)


class Function:
    """Base class for differentiable operations.

    `forward` receives the operands' arrays (plus keyword options) and returns
    the output array; `backward` receives the gradient with respect to the
    output and returns one gradient (or None) per operand.
    """

    def forward(self, *arrays: np.ndarray, **kwargs: Any) -> np.ndarray:
        raise NotImplementedError("Forward pass not implemented for this function")

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        raise NotImplementedError("Backward pass not implemented for this function")

    @classmethod
    def apply(cls, *tensors: Tensor, **kwargs: Any) -> Tensor:
        func = cls()
        out_data = np.asarray(func.forward(*(t.data for t in tensors), **kwargs))
        tape = current_tape()
        requires_grad = tape is not None and any(t.requires_grad for t in tensors)
        out = Tensor._wrap(out_data, requires_grad=requires_grad)
        if requires_grad:
            tape.record(func, tensors, out)
        return out

    @staticmethod
    def unbroadcast(grad: np.ndarray, to_shape: Tuple[int, ...]) -> np.ndarray:
        """Sum out broadcast dimensions so that grad matches to_shape."""
        if grad.shape == to_shape:
            return grad
        while grad.ndim > len(to_shape):
            grad = grad.sum(axis=0)
        for dim, extent in enumerate(to_shape):
            if extent == 1 and grad.shape[dim] != 1:
                grad = grad.sum(axis=dim, keepdims=True)
        return grad


class TapeEntry(NamedTuple):
    function: Function
    inputs: Tuple[Tensor, ...]
    output: Tensor


class Tape:
    """Ordered record of executed operations, confined to one thread."""

    def __init__(self):
        self.entries: List[TapeEntry] = []
        self._outputs: Dict[int, Tensor] = {}

    def __enter__(self) -> "Tape":
        _tape_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        stack = _tape_stack()
        if stack and stack[-1] is self:
            stack.pop()

    def __len__(self) -> int:
        return len(self.entries)

    def record(self, function: Function, inputs: Tuple[Tensor, ...], output: Tensor) -> None:
        output._tape = self
        self.entries.append(TapeEntry(function, tuple(inputs), output))
        self._outputs[id(output)] = output

    def _propagate(self, loss: Tensor) -> Dict[int, Tuple[Tensor, np.ndarray]]:
        if loss.size != 1:
            raise TapeError(f"backward requires a scalar loss, got shape {loss.shape}")
        if id(loss) not in self._outputs:
            raise TapeError("loss is not on the tape")

        pending: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        leaves: Dict[int, Tuple[Tensor, np.ndarray]] = {}
        for entry in reversed(self.entries):
            upstream = pending.pop(id(entry.output), None)
            if upstream is None:
                continue
            input_grads = entry.function.backward(upstream)
            for tensor, grad in zip(entry.inputs, input_grads):
                if grad is None or not tensor.requires_grad:
                    continue
                key = id(tensor)
                if key in self._outputs:
                    pending[key] = pending[key] + grad if key in pending else grad
                elif key in leaves:
                    leaves[key] = (tensor, leaves[key][1] + grad)
                else:
                    leaves[key] = (tensor, grad)
        return leaves

    def gradients(self, loss: Tensor, wrt: Iterable[Tensor]) -> List[np.ndarray]:
        """Return d loss / d t for every t in wrt without touching `.grad`."""
        leaves = self._propagate(loss)
        result = []
        for tensor in wrt:
            entry = leaves.get(id(tensor))
            result.append(np.array(entry[1]) if entry else np.zeros_like(tensor.data))
        return result

    def backward(self, loss: Tensor) -> None:
        for tensor, grad in self._propagate(loss).values():
            tensor.accumulate_grad(np.asarray(grad, dtype=tensor.data.dtype))


def backward(loss: Tensor) -> None:
    """Accumulate d loss / d leaf into every reachable leaf's `grad`."""
    if not isinstance(loss, Tensor):
        raise TapeError("backward expects a Tensor")
    if loss._tape is None:
        if loss.size != 1:
            raise TapeError(f"backward requires a scalar loss, got shape {loss.shape}")
        raise TapeError("loss is not on the tape")
    loss._tape.backward(loss)
