"""Row-major dense matrix container used for Q/K/V/Z values."""

from __future__ import annotations

import numpy as np

from . import rng


class DenseMatrix:
    """A 2-D row-major matrix of finite real scalars.

    Thin wrapper over a numpy array that enforces the container contract
    (two dimensions, every entry finite on construction). ``data`` is the
    backing array; computation kernels operate on it directly.
    """

    __slots__ = ("data",)

    def __init__(self, data, dtype=None):
        if dtype is None:
            existing = getattr(data, "dtype", None)
            dtype = existing if existing in (np.float32, np.float64) else np.float64
        arr = np.array(data, dtype=dtype)
        if arr.ndim != 2:
            raise ValueError(f"expected a 2-D array, got ndim={arr.ndim}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("matrix entries must all be finite")
        self.data = arr

    @classmethod
    def from_flat(cls, rows: int, cols: int, values, dtype=None) -> "DenseMatrix":
        flat = np.asarray(values, dtype=dtype if dtype is not None else np.float64)
        if flat.size != rows * cols:
            raise ValueError(f"need {rows * cols} values for a {rows}x{cols} matrix, got {flat.size}")
        return cls(flat.reshape(rows, cols), dtype=dtype)

    @classmethod
    def zeros(cls, rows: int, cols: int, dtype=np.float64) -> "DenseMatrix":
        return cls(np.zeros((rows, cols), dtype=dtype), dtype=dtype)

    @classmethod
    def uniform(cls, rows: int, cols: int, seed: int, label: int,
                lo: float = -1.0, hi: float = 1.0, dtype=np.float64) -> "DenseMatrix":
        """Deterministic matrix with entries uniform in [lo, hi).

        Entry (i, j) is element i*cols + j of the stream keyed by
        ``derive_key(seed, label)`` (see :mod:`winattn.rng`).
        """
        key = rng.derive_key(seed, label)
        values = rng.uniform_values(key, rows * cols, lo, hi)
        return cls(values.reshape(rows, cols).astype(dtype), dtype=dtype)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def row(self, i: int) -> np.ndarray:
        return self.data[i]

    def __array__(self, dtype=None):
        return self.data if dtype is None else self.data.astype(dtype)

    def __repr__(self):
        return f"DenseMatrix({self.rows}x{self.cols}, dtype={self.data.dtype})"


def as_array(m) -> np.ndarray:
    """Accept a DenseMatrix or a 2-D ndarray and return the ndarray."""
    if isinstance(m, DenseMatrix):
        return m.data
    arr = np.asarray(m)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got ndim={arr.ndim}")
    return arr


def random_qkv(seed: int, seq_len: int, head_dim: int,
               dtype=np.float64) -> tuple[DenseMatrix, DenseMatrix, DenseMatrix]:
    """Deterministic Q, K, V test matrices, uniform in [-1, 1)."""
    q = DenseMatrix.uniform(seq_len, head_dim, seed, rng.LABEL_Q, dtype=dtype)
    k = DenseMatrix.uniform(seq_len, head_dim, seed, rng.LABEL_K, dtype=dtype)
    v = DenseMatrix.uniform(seq_len, head_dim, seed, rng.LABEL_V, dtype=dtype)
    return q, k, v
