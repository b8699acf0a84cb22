"""Dense single-precision tensor: the sole numeric carrier of the toolkit.

Every value that crosses a module boundary is a `Tensor`: a C-contiguous
float32 ndarray of rank >= 1 with all extents >= 1. Arithmetic is delegated
to numpy, with BLAS pinned to a single thread at import so that results are
bit-identical across runs regardless of the ambient thread configuration.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError

try:
    from threadpoolctl import threadpool_limits

    # One BLAS thread makes reduction order fixed, so matmul results are
    # reproducible bit-for-bit whatever OMP_NUM_THREADS says.
    _BLAS_LIMIT = threadpool_limits(limits=1, user_api="blas")
except ImportError:  # pragma: no cover
    _BLAS_LIMIT = None

EW_KINDS = ("add", "sub", "mul", "sigmoid", "tanh", "relu")
REDUCE_KINDS = ("sum", "mean", "argmax")


class Tensor:
    """Immutable-by-convention wrapper around a C-contiguous float32 array."""

    __slots__ = ("array",)

    def __init__(self, values):
        arr = np.ascontiguousarray(values, dtype=np.float32)
        if arr.ndim == 0:
            arr = arr.reshape(1)
        if any(extent < 1 for extent in arr.shape):
            raise DimensionError(f"all extents must be >= 1, got shape {arr.shape}")
        self.array = arr

    @property
    def shape(self) -> tuple[int, ...]:
        return self.array.shape

    @property
    def rank(self) -> int:
        return self.array.ndim

    @property
    def data(self) -> np.ndarray:
        """Flat row-major view of the payload."""
        return self.array.reshape(-1)

    def tolist(self):
        return self.array.tolist()

    def item(self) -> float:
        if self.array.size != 1:
            raise DimensionError(f"item() needs a single value, shape is {self.shape}")
        return float(self.array.reshape(-1)[0])

    def copy(self) -> "Tensor":
        return Tensor(self.array.copy())

    def __repr__(self) -> str:
        return f"Tensor(shape={list(self.shape)})"

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Tensor)
            and self.shape == other.shape
            and np.array_equal(self.array, other.array)
        )

    def __hash__(self):
        return id(self)


def zeros(*shape: int) -> Tensor:
    return Tensor(np.zeros(shape, dtype=np.float32))


def full(shape, value: float) -> Tensor:
    return Tensor(np.full(shape, value, dtype=np.float32))


def identity(n: int) -> Tensor:
    return Tensor(np.eye(n, dtype=np.float32))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of two rank-2 tensors with deterministic accumulation."""
    if a.rank != 2 or b.rank != 2:
        raise DimensionError(
            f"matmul needs rank-2 operands, got {list(a.shape)} and {list(b.shape)}"
        )
    if a.shape[1] != b.shape[0]:
        raise DimensionError(
            f"matmul inner extents differ: {list(a.shape)} x {list(b.shape)}"
        )
    return Tensor(a.array @ b.array)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # Split by sign to avoid overflow in exp for large |x|.
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def ew(op_kind: str, a: Tensor, b: Tensor | float | None = None) -> Tensor:
    """Elementwise op. Binary kinds need identical shapes or a scalar `b`."""
    if op_kind not in EW_KINDS:
        raise ValueError(f"unknown elementwise kind {op_kind!r}")
    x = a.array
    if op_kind in ("add", "sub", "mul"):
        if b is None:
            raise DimensionError(f"{op_kind} needs a second operand")
        if isinstance(b, Tensor):
            if b.shape != a.shape:
                raise DimensionError(
                    f"{op_kind} shapes differ: {list(a.shape)} vs {list(b.shape)}"
                )
            y = b.array
        else:
            y = np.float32(b)
        if op_kind == "add":
            return Tensor(x + y)
        if op_kind == "sub":
            return Tensor(x - y)
        return Tensor(x * y)
    if b is not None:
        raise DimensionError(f"{op_kind} is unary")
    if op_kind == "sigmoid":
        return Tensor(_sigmoid(x))
    if op_kind == "tanh":
        return Tensor(np.tanh(x))
    return Tensor(np.maximum(x, np.float32(0.0)))


def reduce(op_kind: str, a: Tensor, axis: int) -> Tensor:
    """Reduce one axis away. `argmax` breaks ties toward the lowest index."""
    if op_kind not in REDUCE_KINDS:
        raise ValueError(f"unknown reduce kind {op_kind!r}")
    if not 0 <= axis < a.rank:
        raise DimensionError(f"axis {axis} out of range for shape {list(a.shape)}")
    if op_kind == "sum":
        out = a.array.sum(axis=axis, dtype=np.float32)
    elif op_kind == "mean":
        out = a.array.mean(axis=axis, dtype=np.float32)
    else:
        out = np.argmax(a.array, axis=axis).astype(np.float32)
    return Tensor(out)
