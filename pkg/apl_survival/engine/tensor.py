"""Tensors, parameters and the operation tape.

Operations executed inside ``with Tape():`` are recorded in execution order;
``backward`` replays that record in reverse. Outside a tape, operations only
compute values.
"""

import contextvars
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ..errors import DimensionError


_ACTIVE_TAPE: contextvars.ContextVar[Optional["Tape"]] = contextvars.ContextVar(
    "apl_active_tape", default=None
)


class Tensor:
    """Dense float64 array that can take part in reverse-mode differentiation."""

    __slots__ = ("data", "requires_grad", "grad", "name", "tape")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1)
        if arr.size == 0:
            raise DimensionError(f"Tensor extents must be positive, got shape {arr.shape}")
        self.data = arr
        self.requires_grad = requires_grad
        self.grad = np.zeros_like(arr) if requires_grad else None
        self.name = name
        self.tape: Optional["Tape"] = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return int(self.data.size)

    def item(self) -> float:
        if self.data.size != 1:
            raise DimensionError(f"item() needs a single value, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def zero_grad(self) -> None:
        if self.requires_grad:
            self.grad = np.zeros_like(self.data)

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"


@dataclass
class Parameter:
    """A learnable tensor with its AdamW moment buffers."""

    name: str
    tensor: Tensor
    m: np.ndarray = field(init=False)
    v: np.ndarray = field(init=False)

    def __post_init__(self):
        self.tensor.requires_grad = True
        if self.tensor.grad is None:
            self.tensor.grad = np.zeros_like(self.tensor.data)
        self.tensor.name = self.name
        self.m = np.zeros_like(self.tensor.data)
        self.v = np.zeros_like(self.tensor.data)

    @classmethod
    def from_array(cls, name: str, values: np.ndarray) -> "Parameter":
        return cls(name=name, tensor=Tensor(values, requires_grad=True))

    @property
    def data(self) -> np.ndarray:
        return self.tensor.data

    @property
    def grad(self) -> np.ndarray:
        return self.tensor.grad

    @property
    def shape(self) -> tuple[int, ...]:
        return self.tensor.shape

    def zero_grad(self) -> None:
        self.tensor.zero_grad()


BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


@dataclass
class TapeOp:
    """One recorded operation: inputs, output and the rule mapping dOut to dInputs."""

    name: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    backward: BackwardFn


class Tape:
    """Ordered record of differentiable operations.

    Use as a context manager; tapes are per thread/context, so independent
    models can be trained concurrently.
    """

    def __init__(self):
        self.ops: list[TapeOp] = []
        self._token = None

    def __enter__(self) -> "Tape":
        self._token = _ACTIVE_TAPE.set(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        _ACTIVE_TAPE.reset(self._token)
        self._token = None

    def __len__(self) -> int:
        return len(self.ops)

    def record(self, name: str, inputs: tuple[Tensor, ...], output: Tensor,
               backward_fn: BackwardFn) -> None:
        output.tape = self
        self.ops.append(TapeOp(name, inputs, output, backward_fn))


def active_tape() -> Optional[Tape]:
    return _ACTIVE_TAPE.get()


def backward(root: Tensor) -> None:
    """Accumulate d(root)/d(t) into ``t.grad`` for every reachable requires_grad tensor.

    Args:
        root: Scalar tensor produced under a Tape

    Raises:
        DimensionError: If root holds more than one value
    """
    if root.size != 1:
        raise DimensionError(f"backward() needs a scalar root, got shape {root.shape}")
    if not root.requires_grad:
        return

    adjoints: dict[int, np.ndarray] = {id(root): np.ones_like(root.data)}
    touched: dict[int, Tensor] = {id(root): root}

    tape = root.tape
    ops = tape.ops if tape is not None else []
    for op in reversed(ops):
        g_out = adjoints.get(id(op.output))
        if g_out is None:
            continue
        grads = op.backward(g_out)
        for tensor, g in zip(op.inputs, grads):
            if g is None or not tensor.requires_grad:
                continue
            key = id(tensor)
            if key in adjoints:
                adjoints[key] = adjoints[key] + g
            else:
                adjoints[key] = g
                touched[key] = tensor

    for key, tensor in touched.items():
        if tensor.grad is None:
            tensor.grad = np.zeros_like(tensor.data)
        tensor.grad += adjoints[key]


def zero_grad(params: Sequence[Parameter]) -> None:
    for p in params:
        p.zero_grad()
