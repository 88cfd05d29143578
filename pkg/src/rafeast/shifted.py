"""Solvers for the shifted block systems (z I - A) X = B with complex z.

Two paths are provided: a direct LU factorisation (dense by default, sparse
LU optionally) that is reused across right-hand sides and FEAST iterations,
and a restart-free GMRES that runs to a relaxed tolerance and reports the
residual it actually reached.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Literal, NamedTuple

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as sla

from .errors import DimensionMismatch, SingularShift
from .sparse import SymmetricSparseMatrix

__all__ = [
    "SolverConfig",
    "ShiftedFactorization",
    "IterativeSolveResult",
    "factor_shifted",
    "solve_block",
    "iterative_solve_block",
    "block_residuals",
]

SINGULAR_PIVOT_RTOL = 1e-14


@dataclass(frozen=True)
class SolverConfig:
    mode: Literal["direct", "iterative"] = "direct"
    tolerance: float = 1e-12
    max_inner_iterations: int = 200
    backend: Literal["dense", "sparse"] = "dense"

    def __post_init__(self):
        if self.mode not in ("direct", "iterative"):
            raise ValueError(f"unknown solver mode {self.mode!r}")
        if self.backend not in ("dense", "sparse"):
            raise ValueError(f"unknown direct backend {self.backend!r}")
        if not 0.0 < self.tolerance < 1.0:
            raise ValueError("tolerance must lie in (0, 1)")
        if self.max_inner_iterations < 1:
            raise ValueError("max_inner_iterations must be >= 1")


class ShiftedFactorization:
    """LU factors of ``z I - A``, reusable for any number of solves."""

    def __init__(self, n, shift, backend, factors):
        self.n = n
        self.shift = complex(shift)
        self.backend = backend
        self._factors = factors

    def solve(self, B) -> np.ndarray:
        return solve_block(self, B)

    def __repr__(self):
        return f"ShiftedFactorization(n={self.n}, shift={self.shift}, backend={self.backend!r})"


def factor_shifted(A: SymmetricSparseMatrix, z, backend: str = "dense") -> ShiftedFactorization:
    """Factor ``z I - A``.

    Raises :class:`SingularShift` when a pivot falls below ``1e-14`` times
    the largest entry of the shifted matrix.
    """
    z = complex(z)
    n = A.n
    if backend == "dense":
        M = -A.toarray().astype(np.complex128)
        M[np.diag_indices(n)] += z
        scale = np.max(np.abs(M)) if n else 1.0
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", la.LinAlgWarning)
            lu, piv = la.lu_factor(M, overwrite_a=True, check_finite=False)
        pivots = np.abs(np.diag(lu))
        if n and pivots.min() <= SINGULAR_PIVOT_RTOL * scale:
            raise SingularShift(f"shift {z} is numerically on the spectrum (min pivot {pivots.min():.3e})")
        return ShiftedFactorization(n, z, backend, (lu, piv))
    if backend == "sparse":
        M = (sp.identity(n, dtype=np.complex128, format="csc") * z - A.to_scipy().astype(np.complex128)).tocsc()
        scale = abs(M).max() if n else 1.0
        try:
            lu = sla.splu(M)
        except RuntimeError as exc:
            raise SingularShift(f"shift {z} is numerically on the spectrum ({exc})") from exc
        pivots = np.abs(lu.U.diagonal())
        if n and pivots.min() <= SINGULAR_PIVOT_RTOL * scale:
            raise SingularShift(f"shift {z} is numerically on the spectrum (min pivot {pivots.min():.3e})")
        return ShiftedFactorization(n, z, backend, lu)
    raise ValueError(f"unknown backend {backend!r}")


def solve_block(f: ShiftedFactorization, B) -> np.ndarray:
    """Solve ``(z I - A) X = B`` for an n-by-k (or length-n) right-hand side."""
    B = np.asarray(B)
    if B.shape[0] != f.n:
        raise DimensionMismatch(f"right-hand side has {B.shape[0]} rows, expected {f.n}")
    B = B.astype(np.complex128, copy=False)
    if f.backend == "dense":
        return la.lu_solve(f._factors, B, check_finite=False)
    return f._factors.solve(np.asfortranarray(B))


def block_residuals(A: SymmetricSparseMatrix, z, X, B) -> np.ndarray:
    """Per-column ``||(z I - A) x - b|| / ||b||`` (0 for zero columns)."""
    X = np.asarray(X)
    B = np.asarray(B)
    vec = X.ndim == 1
    if vec:
        X, B = X[:, None], B[:, None]
    R = complex(z) * X - (A.to_scipy() @ X) - B
    bn = np.linalg.norm(B, axis=0)
    rn = np.linalg.norm(R, axis=0)
    out = np.where(bn > 0, rn / np.where(bn > 0, bn, 1.0), rn)
    return out[0] if vec else out


class IterativeSolveResult(NamedTuple):
    solution: np.ndarray
    residuals: np.ndarray  # true relative residual per column
    iterations: np.ndarray  # Krylov steps taken per column
    converged: np.ndarray  # per column; False marks a flagged (non-fatal) outcome


def iterative_solve_block(
    A: SymmetricSparseMatrix, z, B, cfg: SolverConfig
) -> IterativeSolveResult:
    """Restart-free GMRES on every column of ``B`` at once.

    Each column keeps its own Arnoldi basis; columns drop out of the sweep
    once their residual estimate reaches ``cfg.tolerance`` (or on a lucky
    breakdown). Columns that hit ``max_inner_iterations`` first are
    returned with ``converged=False`` and their true residual.
    """
    B = np.asarray(B)
    vec = B.ndim == 1
    if vec:
        B = B[:, None]
    n, k = B.shape
    if n != A.n:
        raise DimensionMismatch(f"right-hand side has {n} rows, expected {A.n}")
    z = complex(z)
    Acsr = A.to_scipy()
    B = B.astype(np.complex128)
    tol = cfg.tolerance
    kmax = min(cfg.max_inner_iterations, n)

    bnorm = np.linalg.norm(B, axis=0)
    X = np.zeros((n, k), dtype=np.complex128)
    iters = np.zeros(k, dtype=np.int64)
    active = bnorm > 0

    V = np.zeros((kmax + 1, n, k), dtype=np.complex128)
    H = np.zeros((k, kmax + 1, kmax), dtype=np.complex128)
    cs = np.zeros((k, kmax), dtype=np.complex128)
    sn = np.zeros((k, kmax), dtype=np.complex128)
    g = np.zeros((k, kmax + 1), dtype=np.complex128)
    safe = np.where(active, bnorm, 1.0)
    V[0] = B / safe
    g[:, 0] = np.where(active, bnorm, 0.0)

    for j in range(kmax):
        if not active.any():
            break
        cols = np.nonzero(active)[0]
        w = z * V[j][:, cols] - Acsr @ V[j][:, cols]
        # modified Gram-Schmidt, applied twice for stability
        for _ in range(2):
            for i in range(j + 1):
                hij = np.einsum("nk,nk->k", V[i][:, cols].conj(), w)
                w -= V[i][:, cols] * hij
                H[cols, i, j] += hij
        hnext = np.linalg.norm(w, axis=0)
        H[cols, j + 1, j] = hnext
        V[j + 1][:, cols] = w / np.where(hnext > 0, hnext, 1.0)

        # apply previous rotations, then build the new one
        h = H[cols, : j + 2, j]
        for i in range(j):
            t = cs[cols, i] * h[:, i] + sn[cols, i] * h[:, i + 1]
            h[:, i + 1] = -np.conj(sn[cols, i]) * h[:, i] + np.conj(cs[cols, i]) * h[:, i + 1]
            h[:, i] = t
        a, b = h[:, j], h[:, j + 1]
        denom = np.sqrt(np.abs(a) ** 2 + np.abs(b) ** 2)
        denom = np.where(denom > 0, denom, 1.0)
        # unitary rotation [c s; -conj(s) conj(c)] zeroing the subdiagonal
        c_new = np.conj(a) / denom
        s_new = np.conj(b) / denom
        h[:, j] = c_new * a + s_new * b
        h[:, j + 1] = 0.0
        H[cols, : j + 2, j] = h
        cs[cols, j], sn[cols, j] = c_new, s_new
        gj = g[cols, j]
        g[cols, j + 1] = -np.conj(s_new) * gj
        g[cols, j] = c_new * gj
        iters[cols] = j + 1

        est = np.abs(g[cols, j + 1]) / bnorm[cols]
        done = (est <= tol) | (hnext <= 1e-14 * np.abs(h[:, j]).clip(min=1e-300))
        active[cols[done]] = False

    for col in range(k):
        m = iters[col]
        if m == 0:
            continue
        y = la.solve_triangular(H[col, :m, :m], g[col, :m], check_finite=False)
        X[:, col] = np.tensordot(y, V[:m, :, col], axes=(0, 0))

    res = block_residuals(A, z, X, B)
    converged = (res <= tol) | (bnorm == 0)
    if vec:
        return IterativeSolveResult(X[:, 0], res[:1], iters[:1], converged[:1])
    return IterativeSolveResult(X, res, iters, converged)
