"""Dense fp64 array primitives with pinned summation order.

Everything downstream (gates, the three attention forms, the gradient
oracles) is built on the three operations here.  The important contract is
determinism: ``matmul`` accumulates strictly in ascending inner-index order,
so two code paths that claim "exact equality" actually mean it bit for bit.
BLAS reorders sums and breaks that claim, which is why the product is done
by hand here.
"""

from __future__ import annotations

import numpy as np

__all__ = ["SeqTensor", "State", "matmul", "hadamard", "suffix_sum"]


def _as_f64(data) -> np.ndarray:
    a = np.asarray(data, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise ValueError("non-finite value (NaN/Inf) in tensor data")
    return a


class SeqTensor:
    """A rows x cols fp64 matrix, row-major, finite, immutable.

    Carries sequences: Q, K are L x dk, V, O are L x dv, gradients mirror
    their primal shapes.
    """

    __slots__ = ("rows", "cols", "data")

    def __init__(self, data):
        a = _as_f64(data)
        if a.ndim == 1:
            a = a.reshape(1, -1)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise ValueError(f"SeqTensor needs a non-empty 2-D array, got shape {a.shape}")
        a = np.ascontiguousarray(a)
        a.setflags(write=False)
        object.__setattr__(self, "rows", a.shape[0])
        object.__setattr__(self, "cols", a.shape[1])
        object.__setattr__(self, "data", a)

    def __setattr__(self, name, value):  # immutable after construction
        raise AttributeError("SeqTensor is immutable")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    def row(self, t: int) -> np.ndarray:
        return self.data[t]

    def __repr__(self) -> str:
        return f"SeqTensor({self.rows}x{self.cols})"


class State:
    """The dk x dv recurrent state matrix."""

    __slots__ = ("dk", "dv", "data")

    def __init__(self, data):
        a = _as_f64(data)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise ValueError(f"State needs a non-empty 2-D array, got shape {a.shape}")
        a = np.ascontiguousarray(a)
        a.setflags(write=False)
        object.__setattr__(self, "dk", a.shape[0])
        object.__setattr__(self, "dv", a.shape[1])
        object.__setattr__(self, "data", a)

    def __setattr__(self, name, value):
        raise AttributeError("State is immutable")

    def __repr__(self) -> str:
        return f"State({self.dk}x{self.dv})"


def mm(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Raw ndarray product with ascending-k accumulation.

    out[i, j] = sum_k a[i, k] * b[k, j], the partial sums formed in k order
    0, 1, 2, ...  Matches a naive triple loop bitwise (multiply then add,
    no FMA, no reassociation).
    """
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul dimension mismatch: {a.shape} x {b.shape}")
    out = np.multiply.outer(a[:, 0], b[0, :])
    for k in range(1, a.shape[1]):
        out += np.multiply.outer(a[:, k], b[k, :])
    return out


def matmul(a: SeqTensor, b: SeqTensor) -> SeqTensor:
    """Exact fp64 dense product of two SeqTensors (ascending-k sums)."""
    return SeqTensor(mm(a.data, b.data))


def hadamard(a: SeqTensor, b: SeqTensor) -> SeqTensor:
    """Elementwise product; b may be a single row broadcast over a's rows."""
    if a.shape == b.shape:
        return SeqTensor(a.data * b.data)
    if b.rows == 1 and b.cols == a.cols:
        return SeqTensor(a.data * b.data[0])
    raise ValueError(f"hadamard shape mismatch: {a.shape} vs {b.shape}")


def suffix_sum_arr(x: np.ndarray) -> np.ndarray:
    """out[t] = sum_{i >= t} x[i], accumulated back to front."""
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError("suffix_sum needs a non-empty 2-D array")
    out = np.empty_like(x)
    out[-1] = x[-1]
    for t in range(x.shape[0] - 2, -1, -1):
        out[t] = x[t] + out[t + 1]
    return out


def suffix_sum(x: SeqTensor) -> SeqTensor:
    """Per-column suffix sums; row t holds the sum of rows t..L-1."""
    return SeqTensor(suffix_sum_arr(x.data))
