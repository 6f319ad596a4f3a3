"""Sparse containers shared by the kernel, solver and data modules.

Two conventions hold everywhere:

* indices are 0-based, strictly increasing within a sample, and live in
  ``[0, dim)``;
* explicitly stored zeros are never kept, so ``nnz`` always equals the
  number of genuinely nonzero entries.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

__all__ = ["SparseVector", "SampleMatrix"]


def _index_array(indices) -> np.ndarray:
    out = np.ascontiguousarray(indices, dtype=np.int64)
    if out.ndim != 1:
        raise ValueError("indices must be one-dimensional")
    return out


def _value_array(values) -> np.ndarray:
    out = np.ascontiguousarray(values, dtype=np.float64)
    if out.ndim != 1:
        raise ValueError("values must be one-dimensional")
    return out


@dataclass(frozen=True)
class SparseVector:
    """A single sample: index/value pairs over a nominal dimension.

    Parameters
    ----------
    dim : int
        Nominal dimensionality (positive).
    indices : array of int
        Strictly increasing positions of the nonzero entries.
    values : array of float
        Entry values; zeros are rejected.
    """

    dim: int
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "indices", _index_array(self.indices))
        object.__setattr__(self, "values", _value_array(self.values))
        if self.dim < 1:
            raise ValueError(f"dim must be positive, got {self.dim}")
        if self.indices.shape != self.values.shape:
            raise ValueError("indices and values must have equal length")
        if self.indices.size:
            if self.indices[0] < 0 or self.indices[-1] >= self.dim:
                raise ValueError("indices out of range [0, dim)")
            if np.any(np.diff(self.indices) <= 0):
                raise ValueError("indices must be strictly increasing")
        if np.any(self.values == 0.0):
            raise ValueError("explicit zero values are not stored")

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    @classmethod
    def from_dense(cls, arr, dim: int | None = None) -> "SparseVector":
        arr = np.asarray(arr, dtype=np.float64).ravel()
        if dim is None:
            dim = arr.size
        idx = np.nonzero(arr)[0]
        return cls(dim, idx, arr[idx])

    @classmethod
    def from_support(cls, dim: int, indices, values) -> "SparseVector":
        """Build from a candidate support, silently dropping exact zeros.

        Gradients of the kernels can carry exact zeros on the input's
        support; this constructor canonicalizes them away.
        """
        indices = _index_array(indices)
        values = _value_array(values)
        keep = values != 0.0
        return cls(dim, indices[keep], values[keep])

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim)
        out[self.indices] = self.values
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseVector):
            return NotImplemented
        return (self.dim == other.dim
                and np.array_equal(self.indices, other.indices)
                and np.array_equal(self.values, other.values))


class SampleMatrix:
    """Sample-major sparse matrix with a lazily built feature-major twin.

    Stores compressed sparse rows directly (int64 ``indptr``/``indices``,
    float64 ``data``) so the numeric backends can consume the raw arrays;
    the feature-major layout is materialized on first use and reused by
    the coordinate-descent solver.
    """

    def __init__(self, n: int, d: int, indptr, indices, data, check: bool = True):
        self.n = int(n)
        self.d = int(d)
        self.indptr = _index_array(indptr)
        self.indices = _index_array(indices)
        self.data = _value_array(data)
        self._csc: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None
        self._scipy: sp.csr_matrix | None = None
        if check:
            self._validate()

    def _validate(self):
        if self.n < 0 or self.d < 0:
            raise ValueError("negative matrix shape")
        if self.indptr.size != self.n + 1 or self.indptr[0] != 0:
            raise ValueError("malformed row pointer array")
        if self.indptr[-1] != self.indices.size or self.indices.size != self.data.size:
            raise ValueError("row pointers inconsistent with stored entries")
        if np.any(np.diff(self.indptr) < 0):
            raise ValueError("row pointers must be non-decreasing")
        if self.indices.size:
            if self.indices.min() < 0 or self.indices.max() >= self.d:
                raise ValueError("feature indices out of range [0, d)")
            row_of = np.repeat(np.arange(self.n), np.diff(self.indptr))
            interior = row_of[1:] == row_of[:-1]
            if np.any(np.diff(self.indices)[interior] <= 0):
                raise ValueError("indices must be strictly increasing within a row")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("non-finite feature values")
        if np.any(self.data == 0.0):
            raise ValueError("explicit zero values are not stored")

    # -- constructors -------------------------------------------------

    @classmethod
    def from_rows(cls, rows, dim: int | None = None) -> "SampleMatrix":
        rows = list(rows)
        if dim is None:
            if not rows:
                raise ValueError("cannot infer dimension from zero rows")
            dim = max(r.dim for r in rows)
        indptr = np.zeros(len(rows) + 1, dtype=np.int64)
        chunks_i, chunks_v = [], []
        for i, r in enumerate(rows):
            if r.dim > dim:
                raise ValueError(f"row {i} has dim {r.dim} > matrix dim {dim}")
            indptr[i + 1] = indptr[i] + r.nnz
            chunks_i.append(r.indices)
            chunks_v.append(r.values)
        indices = np.concatenate(chunks_i) if chunks_i else np.empty(0, np.int64)
        data = np.concatenate(chunks_v) if chunks_v else np.empty(0, np.float64)
        return cls(len(rows), dim, indptr, indices, data)

    @classmethod
    def from_dense(cls, arr) -> "SampleMatrix":
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError("expected a 2-D array")
        return cls.from_scipy(sp.csr_matrix(arr), d=arr.shape[1])

    @classmethod
    def from_scipy(cls, mat, d: int | None = None) -> "SampleMatrix":
        mat = sp.csr_matrix(mat, dtype=np.float64)
        mat.sort_indices()
        mat.eliminate_zeros()
        if d is None:
            d = mat.shape[1]
        return cls(mat.shape[0], d, mat.indptr, mat.indices, mat.data)

    # -- accessors ----------------------------------------------------

    @property
    def nnz(self) -> int:
        return int(self.data.size)

    def row(self, i: int) -> SparseVector:
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return SparseVector(self.d, self.indices[lo:hi], self.values_slice(lo, hi))

    def values_slice(self, lo, hi) -> np.ndarray:
        return self.data[lo:hi]

    def row_nnz(self) -> np.ndarray:
        return np.diff(self.indptr)

    @property
    def csc(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Feature-major layout ``(indptr, sample_ids, values)``; built once."""
        if self._csc is None:
            mat = self.tocsr().tocsc()
            mat.sort_indices()
            self._csc = (
                np.ascontiguousarray(mat.indptr, dtype=np.int64),
                np.ascontiguousarray(mat.indices, dtype=np.int64),
                np.ascontiguousarray(mat.data, dtype=np.float64),
            )
        return self._csc

    def tocsr(self) -> sp.csr_matrix:
        if self._scipy is None:
            self._scipy = sp.csr_matrix(
                (self.data, self.indices, self.indptr), shape=(self.n, self.d)
            )
        return self._scipy

    def dot(self, w: np.ndarray) -> np.ndarray:
        """Matrix-vector product; empty matrices short-circuit to zeros."""
        if self.nnz == 0:
            return np.zeros(self.n)
        return self.tocsr() @ np.asarray(w, dtype=np.float64)

    def __repr__(self):
        return f"SampleMatrix(n={self.n}, d={self.d}, nnz={self.nnz})"
