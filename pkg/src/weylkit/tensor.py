"""Small dense tensors at a point.

Everything here is sized for spacetime-scale work (n <= 6): rank-3 tensors have
at most 216 entries, so storage is a plain numpy array.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

__all__ = [
    "MAX_DIM",
    "DEGENERACY_THRESHOLD",
    "DegenerateMetricError",
    "PointTensor",
    "SymMatrix",
    "contract",
    "invert",
    "max_abs_diff",
    "signature",
]

MAX_DIM = 6
DEGENERACY_THRESHOLD = 1e-12


class DegenerateMetricError(ValueError):
    """A metric is (numerically) degenerate; ``det`` holds the offending determinant."""

    def __init__(self, message: str, det: float):
        super().__init__(message)
        self.det = det


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class PointTensor:
    """Numeric tensor at one point with declared symmetric index pairs.

    Declared symmetries are enforced by symmetrization on construction; for
    input that is already symmetric this is exact in floating point.
    """

    data: np.ndarray
    symmetries: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        rank = data.ndim
        if rank:
            n = data.shape[0]
            if any(s != n for s in data.shape):
                raise ValueError(f"all index ranges must agree, got shape {data.shape}")
            if n > MAX_DIM:
                raise ValueError(f"dimension {n} exceeds supported maximum {MAX_DIM}")
        if not np.all(np.isfinite(data)):
            raise ValueError("tensor entries must be finite")
        pairs = tuple(tuple(sorted((int(a), int(b)))) for a, b in self.symmetries)
        for a, b in pairs:
            if a == b or not (0 <= a < rank and 0 <= b < rank):
                raise ValueError(f"invalid symmetric pair ({a}, {b}) for rank {rank}")
            data = 0.5 * (data + np.swapaxes(data, a, b))
        object.__setattr__(self, "data", _frozen(data))
        object.__setattr__(self, "symmetries", pairs)

    @property
    def rank(self) -> int:
        return self.data.ndim

    @property
    def dim(self) -> int:
        return self.data.shape[0] if self.data.ndim else 0

    @classmethod
    def zeros(cls, dim: int, rank: int, symmetries: Iterable[tuple[int, int]] = ()) -> "PointTensor":
        return cls(np.zeros((dim,) * rank), tuple(symmetries))

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    def __repr__(self):
        return f"PointTensor(rank={self.rank}, dim={self.dim}, symmetries={self.symmetries})"


class SymMatrix(PointTensor):
    """Symmetric n x n matrix, e.g. a metric at a point."""

    def __init__(self, data, symmetries=((0, 1),)):
        super().__init__(data, ((0, 1),))
        if self.rank != 2:
            raise ValueError(f"SymMatrix needs a square matrix, got shape {self.data.shape}")

    def scale(self) -> float:
        return float(np.max(np.abs(self.data))) if self.data.size else 0.0

    def det(self) -> float:
        return float(np.linalg.det(self.data))

    def __repr__(self):
        return f"SymMatrix({self.data.tolist()})"


def contract(t: PointTensor, slot_a: int, slot_b: int) -> PointTensor:
    """Trace over two index slots; rank drops by two."""
    rank = t.rank
    if slot_a == slot_b:
        raise ValueError("contraction slots must differ")
    if not (0 <= slot_a < rank and 0 <= slot_b < rank):
        raise IndexError(f"slots ({slot_a}, {slot_b}) out of range for rank {rank}")
    data = np.trace(t.data, axis1=slot_a, axis2=slot_b)
    lo, hi = sorted((slot_a, slot_b))

    def shift(i):
        return i - (i > lo) - (i > hi)

    syms = tuple(
        (shift(a), shift(b)) for a, b in t.symmetries if not {a, b} & {slot_a, slot_b}
    )
    return PointTensor(data, syms)


def _check_nondegenerate(m: SymMatrix, threshold: float) -> float:
    n = m.dim
    scale = m.scale()
    det = m.det()
    if scale == 0.0 or abs(det) <= threshold * scale**n:
        raise DegenerateMetricError(f"degenerate metric: det = {det!r}", det)
    return det


def invert(m: SymMatrix, threshold: float = DEGENERACY_THRESHOLD) -> SymMatrix:
    """Inverse of a nondegenerate symmetric matrix (``|det| > threshold * scale**n``)."""
    _check_nondegenerate(m, threshold)
    return SymMatrix(np.linalg.inv(m.data))


def max_abs_diff(a: PointTensor, b: PointTensor) -> float:
    """L-infinity distance between two tensors of the same shape."""
    if a.data.shape != b.data.shape:
        raise ValueError(f"shape mismatch: {a.data.shape} vs {b.data.shape}")
    if a.data.size == 0:
        return 0.0
    return float(np.max(np.abs(a.data - b.data)))


def signature(m: SymMatrix, threshold: float = DEGENERACY_THRESHOLD) -> tuple[int, int]:
    """Return ``(p, q)``: counts of positive and negative eigenvalues."""
    scale = m.scale()
    eig = np.linalg.eigvalsh(m.data)
    if scale == 0.0 or np.min(np.abs(eig)) <= threshold * scale:
        raise DegenerateMetricError(
            f"degenerate metric: eigenvalues {eig.tolist()}", float(np.prod(eig))
        )
    return int(np.sum(eig > 0)), int(np.sum(eig < 0))
