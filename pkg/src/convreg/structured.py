"""Explicit sparse form of the matrix induced by a convolution kernel.

The linear map vec(X) -> vec(K * X) is a block matrix with one
N^2 x N^2 block per (output channel c, input channel d) pair; block
(c, d) occupies rows (c-1)N^2+1..cN^2 and columns (d-1)N^2+1..dN^2 and
is a doubly banded Toeplitz matrix built from the kernel slice
K[:, :, d, c].  Every stored entry is a verbatim copy of one kernel
entry; no arithmetic happens during the build.

For a fixed kernel entry (p, q, z, y) the set of (row, col) positions
holding that entry is computed analytically from the Toeplitz offsets:
with m = ceil(k/2), a = p - m and b = q - m, the positions are

    row = (y-1)N^2 + (s-1)N + r,   col = (z-1)N^2 + (s+b-1)N + (r+a)

over all r, s for which both (r, s) and (r+a, s+b) lie in [1, N].  That
gives exactly (N - |a|)(N - |b|) positions, all with distinct rows and
distinct columns.  The brute-force one-hot scan in convreg.validate is
the independent oracle for this arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse

from .tensors import KernelTensor, ProblemDims, overlap_range

__all__ = [
    "OmegaIndexSet",
    "StructuredMatrix",
    "omega",
    "omega_count",
    "omega_count_grid",
    "build_single",
    "build_multi",
    "frobenius_norm_sq",
    "write_matrix_market",
]


@dataclass(frozen=True)
class OmegaIndexSet:
    """All (row, col) positions of the structured matrix holding kernel entry (p, q, z, y)."""

    p: int
    q: int
    z: int
    y: int
    positions: np.ndarray  # (count, 2) int64, 1-based, sorted by (row, col)

    @property
    def count(self) -> int:
        return self.positions.shape[0]

    def as_set(self) -> set[tuple[int, int]]:
        return {(int(r), int(c)) for r, c in self.positions}


def _check_kernel_index(dims: ProblemDims, p: int, q: int, z: int, y: int) -> None:
    if not (1 <= p <= dims.k and 1 <= q <= dims.k):
        raise ValueError(f"filter index ({p}, {q}) out of range for k={dims.k}")
    if not (1 <= z <= dims.g):
        raise ValueError(f"input channel {z} out of range for g={dims.g}")
    if not (1 <= y <= dims.h):
        raise ValueError(f"output channel {y} out of range for h={dims.h}")


def omega_count(dims: ProblemDims, p: int, q: int) -> int:
    """Cardinality of the index set: (N - |p-m|) * (N - |q-m|), clipped at 0."""
    n = dims.N
    return max(0, n - abs(p - dims.m)) * max(0, n - abs(q - dims.m))


def omega_count_grid(dims: ProblemDims) -> np.ndarray:
    """(k, k) array with entry [p-1, q-1] = omega_count(dims, p, q)."""
    n = dims.N
    side = np.maximum(0, n - np.abs(np.arange(1, dims.k + 1) - dims.m))
    return np.outer(side, side)


def _omega_positions(dims: ProblemDims, p: int, q: int, z: int, y: int) -> tuple[np.ndarray, np.ndarray]:
    n = dims.N
    a = p - dims.m
    b = q - dims.m
    r_lo, r_hi = overlap_range(n, a)
    s_lo, s_hi = overlap_range(n, b)
    if r_lo > r_hi or s_lo > s_hi:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty
    r = np.arange(r_lo, r_hi + 1, dtype=np.int64)
    s = np.arange(s_lo, s_hi + 1, dtype=np.int64)
    n2 = n * n
    # s slow, r fast: rows ascend, so positions come out sorted by (row, col)
    rows = (y - 1) * n2 + (np.repeat(s, r.size) - 1) * n + np.tile(r, s.size)
    cols = (z - 1) * n2 + (np.repeat(s + b, r.size) - 1) * n + np.tile(r + a, s.size)
    return rows, cols


def omega(dims: ProblemDims, p: int, q: int, z: int, y: int) -> OmegaIndexSet:
    """Analytic index set for kernel entry (p, q, z, y); no matrix is built."""
    _check_kernel_index(dims, p, q, z, y)
    rows, cols = _omega_positions(dims, p, q, z, y)
    positions = np.stack([rows, cols], axis=1)
    positions.flags.writeable = False
    return OmegaIndexSet(p, q, z, y, positions)


@dataclass(frozen=True)
class StructuredMatrix:
    """Sparse h*N^2 x g*N^2 matrix as sorted (row, col, value) triples, 1-based."""

    dims: ProblemDims
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray

    @property
    def n_rows(self) -> int:
        return self.dims.n_out

    @property
    def n_cols(self) -> int:
        return self.dims.n_in

    @property
    def nnz(self) -> int:
        return self.vals.size

    @cached_property
    def _csr(self) -> scipy.sparse.csr_matrix:
        return scipy.sparse.csr_matrix(
            (self.vals, (self.rows - 1, self.cols - 1)), shape=(self.n_rows, self.n_cols)
        )

    def matvec(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float).reshape(-1)
        if v.size != self.n_cols:
            raise ValueError(f"expected vector of length {self.n_cols}, got {v.size}")
        return self._csr @ v

    def rmatvec(self, w: np.ndarray) -> np.ndarray:
        w = np.asarray(w, dtype=float).reshape(-1)
        if w.size != self.n_rows:
            raise ValueError(f"expected vector of length {self.n_rows}, got {w.size}")
        return self._csr.T @ w

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.n_rows, self.n_cols))
        dense[self.rows - 1, self.cols - 1] = self.vals
        return dense


def build_multi(kernel: KernelTensor, N: int) -> StructuredMatrix:
    """Explicit matrix for a multi-channel kernel; block (c, d) comes from slice K[:, :, d, c]."""
    dims = kernel.dims(N)
    rows_parts: list[np.ndarray] = []
    cols_parts: list[np.ndarray] = []
    vals_parts: list[np.ndarray] = []
    for y in range(1, dims.h + 1):
        for z in range(1, dims.g + 1):
            for q in range(1, dims.k + 1):
                for p in range(1, dims.k + 1):
                    rows, cols = _omega_positions(dims, p, q, z, y)
                    if rows.size == 0:
                        continue
                    rows_parts.append(rows)
                    cols_parts.append(cols)
                    vals_parts.append(np.full(rows.size, kernel.values[p - 1, q - 1, z - 1, y - 1]))
    if rows_parts:
        rows = np.concatenate(rows_parts)
        cols = np.concatenate(cols_parts)
        vals = np.concatenate(vals_parts)
    else:
        rows = np.zeros(0, dtype=np.int64)
        cols = np.zeros(0, dtype=np.int64)
        vals = np.zeros(0)
    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    for arr in (rows, cols, vals):
        arr.flags.writeable = False
    return StructuredMatrix(dims, rows, cols, vals)


def build_single(kernel: KernelTensor, N: int) -> StructuredMatrix:
    """Explicit N^2 x N^2 matrix for a single-channel kernel (g = h = 1)."""
    if kernel.g != 1 or kernel.h != 1:
        raise ValueError(f"build_single needs g = h = 1, got g={kernel.g}, h={kernel.h}")
    return build_multi(kernel, N)


def frobenius_norm_sq(matrix: StructuredMatrix) -> float:
    """Sum of squares of the stored entries."""
    return float(np.dot(matrix.vals, matrix.vals))


def write_matrix_market(matrix: StructuredMatrix, path) -> None:
    """Coordinate text export (1-based indices) readable by standard tools."""
    with open(path, "w") as f:
        f.write("%%MatrixMarket matrix coordinate real general\n")
        f.write(f"{matrix.n_rows} {matrix.n_cols} {matrix.nnz}\n")
        for r, c, v in zip(matrix.rows, matrix.cols, matrix.vals):
            f.write(f"{r} {c} {v:.17g}\n")
