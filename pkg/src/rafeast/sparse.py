"""Symmetric CSR storage, products, and Matrix Market I/O.

Matrices are stored in full (both triangles) compressed sparse row form.
Products are delegated to ``scipy.sparse``'s CSR kernels, which accumulate
each output entry in row-major, ascending-column order; that order is fixed
so seeded runs reproduce bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import (
    AsymmetricInput,
    DimensionMismatch,
    IndexOutOfRange,
    NonFiniteValue,
    ParseError,
    UnsupportedKind,
)

__all__ = [
    "SymmetricSparseMatrix",
    "csr_from_triplets",
    "spmv",
    "spmm",
    "read_matrix_market",
    "write_matrix_market",
]


@dataclass(frozen=True, eq=False)
class SymmetricSparseMatrix:
    """Real symmetric matrix in full CSR storage.

    Use :func:`csr_from_triplets` rather than calling the constructor
    directly; the constructor only validates.
    """

    n: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray
    _check: bool = field(default=True, repr=False)

    def __post_init__(self):
        ro = np.ascontiguousarray(self.row_offsets, dtype=np.int64)
        ci = np.ascontiguousarray(self.col_indices, dtype=np.int64)
        va = np.ascontiguousarray(self.values, dtype=np.float64)
        for arr in (ro, ci, va):
            arr.setflags(write=False)
        object.__setattr__(self, "row_offsets", ro)
        object.__setattr__(self, "col_indices", ci)
        object.__setattr__(self, "values", va)
        if self._check:
            _validate_csr(self.n, ro, ci, va)

    @property
    def nnz(self) -> int:
        return int(self.row_offsets[-1])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    @cached_property
    def _csr(self) -> sp.csr_matrix:
        m = sp.csr_matrix(
            (self.values, self.col_indices, self.row_offsets), shape=self.shape
        )
        m.has_sorted_indices = True
        return m

    def to_scipy(self) -> sp.csr_matrix:
        """Read-only scipy view (do not mutate)."""
        return self._csr

    def toarray(self) -> np.ndarray:
        return self._csr.toarray()

    def diagonal(self) -> np.ndarray:
        return self._csr.diagonal()

    def frobenius_norm(self) -> float:
        return float(np.sqrt(np.dot(self.values, self.values)))

    def gershgorin_bounds(self) -> tuple[float, float]:
        """Interval containing every eigenvalue."""
        d = self.diagonal()
        radius = np.asarray(abs(self._csr).sum(axis=1)).ravel() - np.abs(d)
        return float(np.min(d - radius)), float(np.max(d + radius))

    def __matmul__(self, other):
        other = np.asarray(other)
        if other.ndim == 1:
            return spmv(self, other)
        return spmm(self, other)

    def __eq__(self, other):
        if not isinstance(other, SymmetricSparseMatrix):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.row_offsets, other.row_offsets)
            and np.array_equal(self.col_indices, other.col_indices)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    def __repr__(self):
        return f"SymmetricSparseMatrix(n={self.n}, nnz={self.nnz})"

    @classmethod
    def from_scipy(cls, m) -> "SymmetricSparseMatrix":
        """Build from any scipy sparse matrix that is already symmetric."""
        m = sp.csr_matrix(m, dtype=np.float64)
        m.sum_duplicates()
        m.sort_indices()
        if m.shape[0] != m.shape[1]:
            raise DimensionMismatch(f"matrix is {m.shape}, expected square")
        return cls(m.shape[0], m.indptr, m.indices, m.data)


def _validate_csr(n, ro, ci, va):
    if n < 0:
        raise ValueError("n must be non-negative")
    if ro.shape != (n + 1,) or ro[0] != 0:
        raise ValueError("row_offsets must have length n+1 and start at 0")
    if np.any(np.diff(ro) < 0):
        raise ValueError("row_offsets must be non-decreasing")
    nnz = int(ro[-1])
    if ci.shape != (nnz,) or va.shape != (nnz,):
        raise ValueError("col_indices/values length must equal nnz")
    if nnz and (ci.min() < 0 or ci.max() >= n):
        raise IndexOutOfRange("column index outside [0, n)")
    if not np.all(np.isfinite(va)):
        raise NonFiniteValue("matrix contains non-finite values")
    rows = np.repeat(np.arange(n), np.diff(ro))
    same_row = rows[1:] == rows[:-1]
    if np.any(same_row & (ci[1:] <= ci[:-1])):
        raise ValueError("column indices must be strictly increasing within each row")
    # symmetry: the transposed triplet list, re-sorted, must match exactly
    order = np.lexsort((rows, ci))
    if not (
        np.array_equal(ci[order], rows)
        and np.array_equal(rows[order], ci)
        and np.array_equal(va[order], va)
    ):
        raise AsymmetricInput("matrix is not structurally and numerically symmetric")


def csr_from_triplets(
    entries: Iterable[tuple[int, int, float]] | tuple[Sequence, Sequence, Sequence],
    n: int,
) -> SymmetricSparseMatrix:
    """Assemble a symmetric CSR matrix from (row, col, value) triplets.

    Duplicates are summed first. Each off-diagonal entry is then mirrored;
    if both (i, j) and (j, i) were supplied their summed values must agree
    exactly, otherwise :class:`AsymmetricInput` is raised.

    ``entries`` may be an iterable of triplets or a tuple of three
    equal-length arrays ``(rows, cols, values)``.
    """
    if isinstance(entries, tuple) and len(entries) == 3 and not np.isscalar(entries[0]):
        rows, cols, vals = (np.asarray(a) for a in entries)
    else:
        entries = list(entries)
        if entries:
            rows, cols, vals = (np.asarray(a) for a in zip(*entries))
        else:
            rows = cols = np.empty(0, dtype=np.int64)
            vals = np.empty(0)
    rows = rows.astype(np.int64, copy=False)
    cols = cols.astype(np.int64, copy=False)
    vals = vals.astype(np.float64, copy=False)
    if not (rows.shape == cols.shape == vals.shape):
        raise DimensionMismatch("rows, cols and values must have equal length")
    if rows.size and (min(rows.min(), cols.min()) < 0 or max(rows.max(), cols.max()) >= n):
        raise IndexOutOfRange(f"triplet index outside [0, {n})")
    if not np.all(np.isfinite(vals)):
        raise NonFiniteValue("non-finite value in triplets")

    # sum duplicates, keeping explicit zeros
    keys = rows * n + cols
    uniq, inverse = np.unique(keys, return_inverse=True)
    summed = np.bincount(inverse, weights=vals, minlength=uniq.size)
    r, c = np.divmod(uniq, n)

    # pair each off-diagonal entry with its mirror
    lo, hi = np.minimum(r, c), np.maximum(r, c)
    canon = lo * n + hi
    ckeys, cinv, ccount = np.unique(canon, return_inverse=True, return_counts=True)
    both = ccount[cinv] == 2
    if np.any(both):
        idx = np.nonzero(both)[0]
        order = idx[np.argsort(canon[idx], kind="stable")]
        first, second = summed[order[0::2]], summed[order[1::2]]
        bad = first != second
        if np.any(bad):
            k = order[0::2][np.argmax(bad)]
            raise AsymmetricInput(
                f"entries ({r[k]}, {c[k]}) and mirror disagree: "
                f"{float(first[np.argmax(bad)])!r} vs {float(second[np.argmax(bad)])!r}"
            )
    single_off = (~both) & (r != c)
    full_r = np.concatenate([r, c[single_off]])
    full_c = np.concatenate([c, r[single_off]])
    full_v = np.concatenate([summed, summed[single_off]])

    order = np.lexsort((full_c, full_r))
    full_r, full_c, full_v = full_r[order], full_c[order], full_v[order]
    row_offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(full_r, minlength=n), out=row_offsets[1:])
    return SymmetricSparseMatrix(n, row_offsets, full_c, full_v)


def spmv(A: SymmetricSparseMatrix, x) -> np.ndarray:
    """y = A @ x for a vector x of length n."""
    x = np.asarray(x)
    if x.shape != (A.n,):
        raise DimensionMismatch(f"vector of shape {x.shape} vs n={A.n}")
    return A._csr @ x


def spmm(A: SymmetricSparseMatrix, X) -> np.ndarray:
    """Y = A @ X for an n-by-k block; bitwise equal to column-by-column spmv."""
    X = np.asarray(X)
    if X.ndim != 2 or X.shape[0] != A.n:
        raise DimensionMismatch(f"block of shape {X.shape} vs n={A.n}")
    return A._csr @ X


_MM_HEADER = "%%matrixmarket"


def read_matrix_market(path) -> SymmetricSparseMatrix:
    """Read a coordinate Matrix Market file (real symmetric or real general)."""
    path = Path(path)
    with path.open("r") as fh:
        header = fh.readline()
        tokens = header.strip().lower().split()
        if len(tokens) != 5 or tokens[0] != _MM_HEADER or tokens[1] != "matrix":
            raise ParseError(f"{path}: missing or malformed MatrixMarket header")
        fmt, field_, symmetry = tokens[2:]
        if fmt != "coordinate":
            raise UnsupportedKind(f"{path}: only coordinate format is supported, got {fmt}")
        if field_ not in ("real", "integer", "double"):
            raise UnsupportedKind(f"{path}: unsupported field {field_!r}")
        if symmetry not in ("symmetric", "general"):
            raise UnsupportedKind(f"{path}: unsupported symmetry {symmetry!r}")

        line = fh.readline()
        while line and (line.startswith("%") or not line.strip()):
            line = fh.readline()
        try:
            nrows, ncols, nnz = (int(t) for t in line.split())
        except ValueError as exc:
            raise ParseError(f"{path}: bad size line {line!r}") from exc
        if nrows != ncols:
            raise AsymmetricInput(f"{path}: matrix is {nrows}x{ncols}, not square")

        rows = np.empty(nnz, dtype=np.int64)
        cols = np.empty(nnz, dtype=np.int64)
        vals = np.empty(nnz)
        k = 0
        for lineno, line in enumerate(fh, start=3):
            s = line.strip()
            if not s or s.startswith("%"):
                continue
            parts = s.split()
            if len(parts) != 3 or k >= nnz:
                raise ParseError(f"{path}:{lineno}: unexpected entry {s!r}")
            try:
                i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: cannot parse {s!r}") from exc
            if not (1 <= i <= nrows and 1 <= j <= ncols):
                raise ParseError(f"{path}:{lineno}: index ({i}, {j}) outside 1..{nrows}")
            rows[k], cols[k], vals[k] = i - 1, j - 1, v
            k += 1
        if k != nnz:
            raise ParseError(f"{path}: expected {nnz} entries, found {k}")

    if symmetry == "symmetric" and np.any(cols > rows):
        # the format stores one triangle; normalise to the lower one
        up = cols > rows
        rows[up], cols[up] = cols[up], rows[up].copy()
    return csr_from_triplets((rows, cols, vals), nrows)


def write_matrix_market(A: SymmetricSparseMatrix, path) -> None:
    """Write the lower triangle with 17 significant digits (exact round trip)."""
    m = A.to_scipy().tocoo()
    keep = m.row >= m.col
    r, c, v = m.row[keep], m.col[keep], m.data[keep]
    with Path(path).open("w") as fh:
        fh.write("%%MatrixMarket matrix coordinate real symmetric\n")
        fh.write(f"{A.n} {A.n} {r.size}\n")
        for i, j, x in zip(r.tolist(), c.tolist(), v.tolist()):
            fh.write(f"{i + 1} {j + 1} {x:.17g}\n")
