"""Compressed sparse row matrices whose sparsity pattern is fixed at creation.

Every kernel accepts either a vector or a stack of column vectors (a 2-D
array whose first axis is the matrix dimension), so a minibatch goes through
one call. Row sums are taken over entries in ascending column order, so
results are reproducible bit for bit.
"""

from __future__ import annotations

from typing import Callable, Optional

import numba
import numpy as np

from sparsenet.topology import BipartiteTopology


class DimensionMismatch(ValueError):
    pass


class CsrMatrix:
    __slots__ = ("rows", "cols", "row_offsets", "col_indices", "values", "_row_of")

    def __init__(self, rows, cols, row_offsets, col_indices, values):
        self.rows = int(rows)
        self.cols = int(cols)
        self.row_offsets = np.asarray(row_offsets, dtype=np.int64)
        self.col_indices = np.asarray(col_indices, dtype=np.int64)
        self.values = np.ascontiguousarray(values, dtype=np.float64)
        ro, ci = self.row_offsets, self.col_indices
        if ro.shape != (self.rows + 1,) or ro[0] != 0 or np.any(np.diff(ro) < 0):
            raise ValueError("row_offsets must be non-decreasing, start at 0, length rows+1")
        if ro[-1] != ci.size or ci.size != self.values.size:
            raise ValueError("row_offsets[-1], col_indices and values disagree on nnz")
        if ci.size and (ci.min() < 0 or ci.max() >= self.cols):
            raise ValueError("column index out of range")
        self._row_of = np.repeat(np.arange(self.rows), np.diff(ro))
        if ci.size > 1:
            same_row = self._row_of[1:] == self._row_of[:-1]
            if np.any(np.diff(ci)[same_row] <= 0):
                raise ValueError("column indices must be strictly ascending within a row")
        ro.setflags(write=False)
        ci.setflags(write=False)

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    @property
    def shape(self):
        return (self.rows, self.cols)

    @property
    def row_indices(self) -> np.ndarray:
        return self._row_of

    def with_values(self, values) -> "CsrMatrix":
        """A matrix sharing this pattern but holding ``values``."""
        out = CsrMatrix.__new__(CsrMatrix)
        out.rows, out.cols = self.rows, self.cols
        out.row_offsets, out.col_indices = self.row_offsets, self.col_indices
        out._row_of = self._row_of
        values = np.ascontiguousarray(values, dtype=np.float64)
        if values.shape != (self.nnz,):
            raise DimensionMismatch(f"expected {self.nnz} values, got {values.shape}")
        out.values = values
        return out

    def zeros_like(self) -> "CsrMatrix":
        return self.with_values(np.zeros(self.nnz))

    def copy(self) -> "CsrMatrix":
        return self.with_values(self.values.copy())

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.rows, self.cols))
        out[self._row_of, self.col_indices] = self.values
        return out

    def mask(self) -> np.ndarray:
        out = np.zeros((self.rows, self.cols), dtype=bool)
        out[self._row_of, self.col_indices] = True
        return out

    def __repr__(self):
        return f"CsrMatrix({self.rows}x{self.cols}, nnz={self.nnz})"


def csr_from_topology(
    t: BipartiteTopology, init: Optional[Callable[[int], np.ndarray]] = None
) -> CsrMatrix:
    """CSR matrix with exactly the edges of ``t``; ``init(nnz)`` supplies values in row-major edge order."""
    nnz = t.edge_count
    values = np.zeros(nnz) if init is None else np.asarray(init(nnz), dtype=np.float64)
    if values.shape != (nnz,):
        raise DimensionMismatch(f"init produced {values.shape}, expected ({nnz},)")
    if not np.all(np.isfinite(values)):
        raise ValueError("init produced non-finite values")
    return CsrMatrix(t.n, t.m, t.row_offsets, t.col_indices, values)


@numba.njit(cache=True)
def _spmv_kernel(offsets, cols, values, x, out):
    for r in range(offsets.size - 1):
        for p in range(offsets[r], offsets[r + 1]):
            c = cols[p]
            v = values[p]
            for b in range(x.shape[1]):
                out[r, b] += v * x[c, b]


@numba.njit(cache=True)
def _spmv_transpose_kernel(offsets, cols, values, x, out):
    for r in range(offsets.size - 1):
        for p in range(offsets[r], offsets[r + 1]):
            c = cols[p]
            v = values[p]
            for b in range(x.shape[1]):
                out[c, b] += v * x[r, b]


@numba.njit(cache=True)
def _outer_kernel(rows, cols, u, v, out):
    for p in range(rows.size):
        r = rows[p]
        c = cols[p]
        s = 0.0
        for b in range(u.shape[1]):
            s += u[r, b] * v[c, b]
        out[p] = s


def _as_columns(x: np.ndarray, length: int, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[0] != length:
        raise DimensionMismatch(f"{what} has shape {x.shape}, expected leading dimension {length}")
    return x


def _stack(x: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(x[:, None] if x.ndim == 1 else x)


def spmv(M: CsrMatrix, x) -> np.ndarray:
    """y[r] = sum_c M[r, c] x[c]."""
    x = _as_columns(x, M.cols, "x")
    out = np.zeros((M.rows, 1 if x.ndim == 1 else x.shape[1]))
    _spmv_kernel(M.row_offsets, M.col_indices, M.values, _stack(x), out)
    return out[:, 0] if x.ndim == 1 else out


def spmv_transpose(M: CsrMatrix, x) -> np.ndarray:
    """y[c] = sum_r M[r, c] x[r]."""
    x = _as_columns(x, M.rows, "x")
    out = np.zeros((M.cols, 1 if x.ndim == 1 else x.shape[1]))
    _spmv_transpose_kernel(M.row_offsets, M.col_indices, M.values, _stack(x), out)
    return out[:, 0] if x.ndim == 1 else out


def sp_outer(M: CsrMatrix, u, v) -> np.ndarray:
    """Values of u v^T sampled at the stored positions of M.

    With 2-D ``u`` (rows x B) and ``v`` (cols x B) the B outer products are summed.
    """
    u = _as_columns(u, M.rows, "u")
    v = _as_columns(v, M.cols, "v")
    if u.ndim != v.ndim or (u.ndim == 2 and u.shape[1] != v.shape[1]):
        raise DimensionMismatch(f"u {u.shape} and v {v.shape} do not pair up")
    out = np.empty(M.nnz)
    _outer_kernel(M.row_indices, M.col_indices, _stack(u), _stack(v), out)
    return out


def sp_outer_accumulate(M: CsrMatrix, u, v, scale: float) -> None:
    """M[r, c] += scale * u[r] * v[c] at stored (r, c) only, in place."""
    M.values += scale * sp_outer(M, u, v)
