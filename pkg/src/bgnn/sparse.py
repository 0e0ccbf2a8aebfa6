"""Compressed sparse row matrices for graph adjacency operators.

Only the handful of operations the models need: construction from COO
triples, dense conversion, sparse @ dense, and transposition (cached,
since the backward pass of every product needs it). Values are float64;
indices are int64. No scipy.
"""

from __future__ import annotations

import numpy as np

from .errors import FormatError, ShapeError


class SparseMatrix:
    """CSR matrix: within each row, column indices strictly increase."""

    __slots__ = ("n_rows", "n_cols", "row_offsets", "col_indices", "values", "_transpose")

    def __init__(self, n_rows: int, n_cols: int, row_offsets, col_indices, values):
        self.n_rows = int(n_rows)
        self.n_cols = int(n_cols)
        self.row_offsets = np.asarray(row_offsets, dtype=np.int64)
        self.col_indices = np.asarray(col_indices, dtype=np.int64)
        self.values = np.asarray(values, dtype=np.float64)
        self._transpose: "SparseMatrix | None" = None
        self._validate()

    def _validate(self) -> None:
        ro, ci = self.row_offsets, self.col_indices
        if self.n_rows < 0 or self.n_cols < 0:
            raise FormatError("negative matrix dimension")
        if ro.shape != (self.n_rows + 1,):
            raise FormatError(f"row_offsets length {ro.shape[0]} != n_rows+1 = {self.n_rows + 1}")
        if ro[0] != 0 or ro[-1] != ci.shape[0]:
            raise FormatError("row_offsets must start at 0 and end at nnz")
        if np.any(np.diff(ro) < 0):
            raise FormatError("row_offsets must be non-decreasing")
        if ci.shape != self.values.shape:
            raise FormatError("col_indices and values lengths differ")
        if ci.size:
            if ci.min() < 0 or ci.max() >= self.n_cols:
                raise FormatError(f"column index out of range [0, {self.n_cols})")
            # strictly increasing within each row <=> increasing except at row starts
            interior = np.ones(ci.size, dtype=bool)
            starts = ro[1:-1]
            interior[starts[starts < ci.size]] = False  # first entry of each later row
            interior[0] = False
            if np.any(ci[interior] <= np.roll(ci, 1)[interior]):
                raise FormatError("column indices must strictly increase within each row")

    @property
    def nnz(self) -> int:
        return self.col_indices.shape[0]

    @classmethod
    def from_coo(cls, n_rows: int, n_cols: int, rows, cols, values) -> "SparseMatrix":
        """Build from coordinate triples; duplicate (row, col) entries are summed."""
        r = np.asarray(rows, dtype=np.int64)
        c = np.asarray(cols, dtype=np.int64)
        v = np.asarray(values, dtype=np.float64)
        if not (r.shape == c.shape == v.shape) or r.ndim != 1:
            raise FormatError("rows, cols, values must be equal-length vectors")
        if r.size:
            if r.min() < 0 or r.max() >= n_rows:
                raise FormatError(f"row index out of range [0, {n_rows})")
            if c.min() < 0 or c.max() >= n_cols:
                raise FormatError(f"column index out of range [0, {n_cols})")
        order = np.lexsort((c, r))
        r, c, v = r[order], c[order], v[order]
        if r.size:
            # collapse duplicates by summing their values
            new_group = np.empty(r.size, dtype=bool)
            new_group[0] = True
            new_group[1:] = (r[1:] != r[:-1]) | (c[1:] != c[:-1])
            group_id = np.cumsum(new_group) - 1
            n_groups = group_id[-1] + 1
            summed = np.zeros(n_groups)
            np.add.at(summed, group_id, v)
            r, c, v = r[new_group], c[new_group], summed
        row_offsets = np.zeros(n_rows + 1, dtype=np.int64)
        np.add.at(row_offsets, r + 1, 1)
        np.cumsum(row_offsets, out=row_offsets)
        return cls(n_rows, n_cols, row_offsets, c, v)

    def to_dense(self) -> np.ndarray:
        d = np.zeros((self.n_rows, self.n_cols))
        row_of = np.repeat(np.arange(self.n_rows), np.diff(self.row_offsets))
        d[row_of, self.col_indices] = self.values
        return d

    def matmul_dense(self, d: np.ndarray) -> np.ndarray:
        """self @ d for a dense matrix d of shape (n_cols, k)."""
        d = np.asarray(d, dtype=np.float64)
        if d.ndim != 2 or d.shape[0] != self.n_cols:
            raise ShapeError(
                f"matmul_dense: sparse {self.n_rows}x{self.n_cols} incompatible with {d.shape}"
            )
        out = np.zeros((self.n_rows, d.shape[1]))
        row_of = np.repeat(np.arange(self.n_rows), np.diff(self.row_offsets))
        np.add.at(out, row_of, self.values[:, None] * d[self.col_indices])
        return out

    def transpose(self) -> "SparseMatrix":
        """Transposed copy; computed once and cached on both matrices."""
        if self._transpose is None:
            row_of = np.repeat(np.arange(self.n_rows), np.diff(self.row_offsets))
            t = SparseMatrix.from_coo(
                self.n_cols, self.n_rows, self.col_indices, row_of, self.values
            )
            t._transpose = self
            self._transpose = t
        return self._transpose

    def __repr__(self) -> str:
        return f"SparseMatrix({self.n_rows}x{self.n_cols}, nnz={self.nnz})"
