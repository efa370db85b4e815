"""
Dense tensors and tape-based reverse-mode differentiation.

A `Tensor` wraps a read-only numpy array. Primitive operations (see `wearnet.functional`)
append a `Node` to the active `Tape` whenever one of their inputs requires a gradient;
`reverse_pass` walks the tape backwards and returns the gradient of a scalar loss with
respect to every tensor the tape saw that requires one.

    with Tape() as tape:
        loss = F.sum(F.relu(x))
    grads = reverse_pass(tape, loss)
    grads[x]
"""

from __future__ import annotations

import contextvars
import logging
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .utils import ShapeError, TapeError, shape_mismatch

logger = logging.getLogger(__name__)

_precision: contextvars.ContextVar[type] = contextvars.ContextVar(
    "wearnet_precision", default=np.float32
)
_active_tape: contextvars.ContextVar[Optional["Tape"]] = contextvars.ContextVar(
    "wearnet_active_tape", default=None
)
_grad_enabled: contextvars.ContextVar[bool] = contextvars.ContextVar(
    "wearnet_grad_enabled", default=True
)


def default_dtype() -> type:
    return _precision.get()


@contextmanager
def checking_mode():
    """Create tensors in 64-bit precision for the duration of the block."""
    token = _precision.set(np.float64)
    try:
        yield
    finally:
        _precision.reset(token)


@contextmanager
def no_grad():
    """Nothing computed inside the block is recorded, even with an active tape."""
    token = _grad_enabled.set(False)
    try:
        yield
    finally:
        _grad_enabled.reset(token)


class Tensor:
    """
    Dense N-dimensional array with an optional gradient requirement.

    Args:
        data: Anything `numpy.asarray` accepts. Copied and cast to the current default dtype
            (float32, or float64 inside `checking_mode()`) unless `dtype` is given.
        requires_grad: Whether reverse passes should produce a gradient for this tensor.
        name: Optional label, used for parameters and diagnostics.
    """

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        array = np.array(data, dtype=dtype or default_dtype())
        self._data = _freeze(array)
        self.requires_grad = requires_grad
        self.name = name

    @classmethod
    def _wrap(cls, array: np.ndarray, requires_grad: bool = False) -> "Tensor":
        tensor = cls.__new__(cls)
        tensor._data = _freeze(np.asarray(array))
        tensor.requires_grad = requires_grad
        tensor.name = None
        return tensor

    @classmethod
    def zeros(cls, shape: Sequence[int], requires_grad: bool = False, name: Optional[str] = None):
        return cls(np.zeros(tuple(shape)), requires_grad=requires_grad, name=name)

    @classmethod
    def ones(cls, shape: Sequence[int], requires_grad: bool = False, name: Optional[str] = None):
        return cls(np.ones(tuple(shape)), requires_grad=requires_grad, name=name)

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def shape(self) -> Tuple[int, ...]:
        return self._data.shape

    @property
    def ndim(self) -> int:
        return self._data.ndim

    @property
    def size(self) -> int:
        return self._data.size

    @property
    def dtype(self) -> np.dtype:
        return self._data.dtype

    def numpy(self) -> np.ndarray:
        return self._data.copy()

    def item(self) -> float:
        if self.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self._data.reshape(-1)[0])

    def assign(self, values) -> None:
        """The one in-place update: replace the values, keeping shape and dtype."""
        array = np.asarray(values, dtype=self.dtype)
        if array.shape != self.shape:
            raise shape_mismatch(f"assign to {self.name or 'tensor'}", array.shape, self.shape)
        self._data = _freeze(array.copy())

    def detach(self) -> "Tensor":
        return Tensor._wrap(self._data)

    def __repr__(self):
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad}{label})"

    # operator sugar over wearnet.functional

    def __add__(self, other):
        from . import functional as F

        return F.add(self, other)

    def __mul__(self, other):
        from . import functional as F

        return F.mul(self, other)

    __rmul__ = __mul__

    def relu(self):
        from . import functional as F

        return F.relu(self)

    def sigmoid(self):
        from . import functional as F

        return F.sigmoid(self)

    def sum(self):
        from . import functional as F

        return F.sum(self)

    def mean(self):
        from . import functional as F

        return F.mean(self)

    def reshape(self, *shape):
        from . import functional as F

        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return F.reshape(self, shape)


def _freeze(array: np.ndarray) -> np.ndarray:
    if any(extent < 1 for extent in array.shape):
        raise ShapeError(f"tensor extents must all be >= 1, got shape {array.shape}")
    array.flags.writeable = False
    return array


BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


@dataclass(frozen=True)
class Node:
    """One recorded primitive application."""

    op: str
    inputs: Tuple[Tensor, ...]
    output: Tensor
    backward: BackwardFn


class Tape:
    """
    Ordered record of primitive applications.

    Nodes are appended in execution order, so every node's inputs were produced by an
    earlier node or are leaves.
    """

    def __init__(self):
        self.nodes: List[Node] = []
        self._producer: Dict[int, int] = {}
        self._token = None

    def __enter__(self) -> "Tape":
        self._token = _active_tape.set(self)
        return self

    def __exit__(self, *exc):
        _active_tape.reset(self._token)
        self._token = None
        return False

    def __len__(self):
        return len(self.nodes)

    def __iter__(self) -> Iterator[Node]:
        return iter(self.nodes)

    def record(self, node: Node) -> None:
        self._producer[id(node.output)] = len(self.nodes)
        self.nodes.append(node)

    def index_of(self, tensor: Tensor) -> Optional[int]:
        index = self._producer.get(id(tensor))
        if index is not None and self.nodes[index].output is tensor:
            return index
        return None

    def leaves(self) -> List[Tensor]:
        """Tensors requiring a gradient that enter the tape without being produced on it."""
        seen = set()
        leaves = []
        for node in self.nodes:
            for tensor in node.inputs:
                if tensor.requires_grad and id(tensor) not in seen and self.index_of(tensor) is None:
                    seen.add(id(tensor))
                    leaves.append(tensor)
        return leaves


def record(op: str, inputs: Sequence[Tensor], output: np.ndarray, backward: BackwardFn) -> Tensor:
    """Wrap a primitive's result and put it on the active tape when a gradient is needed."""
    tape = _active_tape.get()
    tracked = (
        tape is not None and _grad_enabled.get() and any(t.requires_grad for t in inputs)
    )
    out = Tensor._wrap(output, requires_grad=tracked)
    if tracked:
        tape.record(Node(op=op, inputs=tuple(inputs), output=out, backward=backward))
    return out


def reverse_pass(tape: Tape, loss: Tensor) -> Dict[Tensor, np.ndarray]:
    """
    Propagate d(loss)/d(.) backwards over `tape`.

    Returns a dict keyed by tensor identity holding a gradient for every leaf of the tape
    (zeros for leaves that do not contribute to `loss`) and for every recorded intermediate
    that received one.

    Raises:
        TapeError: `loss` is not a scalar produced on `tape`.
    """
    if loss.size != 1:
        raise TapeError(f"loss must be a scalar, got shape {loss.shape}")
    end = tape.index_of(loss)
    if end is None:
        raise TapeError("loss was not recorded on this tape")

    grads: Dict[int, np.ndarray] = {id(loss): np.ones(loss.shape, dtype=loss.dtype)}
    owners: Dict[int, Tensor] = {id(loss): loss}
    for node in reversed(tape.nodes[: end + 1]):
        g_out = grads.get(id(node.output))
        if g_out is None:
            continue
        for tensor, g in zip(node.inputs, node.backward(g_out)):
            if g is None or not tensor.requires_grad:
                continue
            if g.shape != tensor.shape:
                raise shape_mismatch(f"gradient of {node.op}", g.shape, tensor.shape)
            key = id(tensor)
            grads[key] = grads[key] + g if key in grads else g
            owners[key] = tensor

    result = {owners[key]: grad for key, grad in grads.items()}
    for leaf in tape.leaves():
        if leaf not in result:
            result[leaf] = np.zeros(leaf.shape, dtype=leaf.dtype)
    logger.debug(f"reverse pass over {end + 1} nodes, {len(result)} gradients")
    return result
