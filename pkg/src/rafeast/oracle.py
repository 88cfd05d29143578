"""Dense symmetric eigensolver used as ground truth.

``dense_eigh`` reduces the matrix to tridiagonal form with Householder
reflections and then runs implicit-shift QL iterations (Wilkinson shift) on
the tridiagonal. The reduction uses level-2 BLAS on the shrinking trailing
block; the QL sweep is compiled with numba.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.linalg import blas

from .contour import SpectralInterval
from .errors import (
    DimensionMismatch,
    LengthMismatch,
    NoConvergence,
    NotSymmetric,
    TooLargeForOracle,
)
from .sparse import SymmetricSparseMatrix

__all__ = [
    "FullEigendecomposition",
    "dense_eigh",
    "tridiagonalize",
    "tridiagonal_ql",
    "ground_truth_in_interval",
    "max_error_metric",
    "canonical_angles",
    "ORACLE_MAX_N",
]

ORACLE_MAX_N = 6000


@dataclass(frozen=True)
class FullEigendecomposition:
    eigenvalues: np.ndarray  # ascending
    eigenvectors: np.ndarray | None  # column k pairs with eigenvalues[k]


def tridiagonalize(A, want_q=False):
    """Householder reduction ``Q^T A Q = T``.

    Returns ``(d, e, Q)`` with ``d`` the diagonal, ``e`` the sub-diagonal
    (length n-1) and ``Q`` the accumulated orthogonal factor (or ``None``).
    Only the lower triangle of ``A`` is referenced.
    """
    S = np.array(A, dtype=np.float64, order="F", copy=True)
    n = S.shape[0]
    d = np.zeros(n)
    e = np.zeros(max(n - 1, 0))
    if n == 0:
        return d, e, (np.eye(0) if want_q else None)
    reflectors = []
    for k in range(n - 2):
        x = S[1:, 0].copy()
        d[k] = S[0, 0]
        S = np.asfortranarray(S[1:, 1:])
        alpha = np.sqrt(x @ x)
        if alpha == 0.0:
            reflectors.append(None)
            continue
        if x[0] > 0:
            alpha = -alpha
        v = x
        v[0] -= alpha
        tau = 2.0 / (v @ v)
        p = blas.dsymv(tau, S, v, lower=1)
        w = p - (0.5 * tau * (p @ v)) * v
        S = blas.dsyr2(-1.0, v, w, a=S, lower=1, overwrite_a=1)
        e[k] = alpha
        reflectors.append((tau, v))
    if n >= 2:
        d[n - 2], d[n - 1], e[n - 2] = S[-2, -2], S[-1, -1], S[-1, -2]
    else:
        d[0] = S[0, 0]

    Q = None
    if want_q:
        # backward accumulation: only the trailing block is touched at step k
        Q = np.eye(n)
        for k in range(len(reflectors) - 1, -1, -1):
            ref = reflectors[k]
            if ref is None:
                continue
            tau, v = ref
            blk = Q[k + 1 :, k + 1 :]
            blk -= np.outer(tau * v, v @ blk)
    return d, e, Q


@njit(cache=True)
def _ql_implicit(d, e, zt, want_vectors, max_sweeps):
    # d: diagonal (n), e: off-diagonal padded to length n (e[n-1] = 0)
    # zt: rows are the basis being rotated (transposed eigenvector matrix)
    n = d.shape[0]
    eps = np.finfo(np.float64).eps
    sweeps = 0
    for l in range(n):
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= eps * dd:
                    break
                m += 1
            if m == l:
                break
            sweeps += 1
            if sweeps > max_sweeps:
                return False
            # Wilkinson shift from the leading 2x2 block
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = np.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + (r if g >= 0 else -r))
            s = 1.0
            c = 1.0
            p = 0.0
            deflated = False
            i = m - 1
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = np.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    deflated = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                if want_vectors:
                    for k in range(zt.shape[1]):
                        f = zt[i + 1, k]
                        zt[i + 1, k] = s * zt[i, k] + c * f
                        zt[i, k] = c * zt[i, k] - s * f
                i -= 1
            if deflated:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return True


def tridiagonal_ql(d, e, Z=None):
    """Eigen-decomposition of the symmetric tridiagonal (d, e).

    If ``Z`` is given (n-by-n), the returned vectors are ``Z @ V_T``, which
    turns tridiagonal eigenvectors into eigenvectors of the original matrix
    when ``Z`` is the Householder factor.
    """
    n = d.shape[0]
    dd = np.array(d, dtype=np.float64)
    ee = np.zeros(n)
    ee[: n - 1] = e[: n - 1]
    want = Z is not None
    zt = np.ascontiguousarray(Z.T) if want else np.zeros((1, 1))
    if n and not _ql_implicit(dd, ee, zt, want, 30 * n):
        raise NoConvergence(f"implicit QL exceeded {30 * n} sweeps")
    order = np.argsort(dd, kind="stable")
    vals = dd[order]
    if not want:
        return vals, None
    V = zt[order].T.copy()
    return vals, V


def _fix_signs(V):
    # first clearly nonzero component positive
    if V.size == 0:
        return V
    mag = np.abs(V)
    thresh = 1e-10 * mag.max(axis=0)
    first = np.argmax(mag > thresh, axis=0)
    signs = np.sign(V[first, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def dense_eigh(A, vectors: bool = True, check_symmetry: bool = True) -> FullEigendecomposition:
    """Full eigendecomposition of a dense real symmetric matrix.

    Eigenvalues ascend; eigenvectors are normalised so that the first
    component that is not negligible is positive.
    """
    if isinstance(A, SymmetricSparseMatrix):
        A = A.toarray()
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {A.shape}")
    if check_symmetry and A.size:
        scale = np.max(np.abs(A))
        if np.max(np.abs(A - A.T)) > 1e-12 * scale:
            raise NotSymmetric("matrix is not symmetric to 1e-12 relative")
    d, e, Q = tridiagonalize(A, want_q=vectors)
    vals, V = tridiagonal_ql(d, e, Q)
    if vectors:
        V = _fix_signs(V)
    return FullEigendecomposition(vals, V)


def ground_truth_in_interval(
    A: SymmetricSparseMatrix, interval: SpectralInterval, vectors: bool = True
):
    """Eigenpairs of ``A`` inside the closed interval, by dense decomposition.

    Returns ``(eigenvalues, eigenvectors, count)``; ``eigenvectors`` is None
    when ``vectors`` is False.
    """
    if A.n > ORACLE_MAX_N:
        raise TooLargeForOracle(f"n={A.n} exceeds the dense oracle limit {ORACLE_MAX_N}")
    full = dense_eigh(A.toarray(), vectors=vectors, check_symmetry=False)
    mask = (full.eigenvalues >= interval.lambda_min) & (full.eigenvalues <= interval.lambda_max)
    vals = full.eigenvalues[mask]
    vecs = full.eigenvectors[:, mask] if vectors else None
    return vals, vecs, int(mask.sum())


def max_error_metric(approx, truth) -> float:
    """Largest |approx_i - truth_i| after greedy nearest-unmatched pairing."""
    approx = np.sort(np.asarray(approx, dtype=np.float64))
    truth = np.sort(np.asarray(truth, dtype=np.float64))
    if approx.size > truth.size:
        raise LengthMismatch(f"{approx.size} approximate vs {truth.size} true eigenvalues")
    if approx.size == 0:
        return 0.0
    free = np.ones(truth.size, dtype=bool)
    worst = 0.0
    for lam in approx:
        dist = np.where(free, np.abs(truth - lam), np.inf)
        j = int(np.argmin(dist))
        free[j] = False
        worst = max(worst, float(dist[j]))
    return worst


def canonical_angles(Q1, Q2) -> np.ndarray:
    """Principal angles between span(Q1) and span(Q2), descending.

    Both inputs need orthonormal columns and the same shape. Small angles
    come from the sines (eigenvalues of the Gram matrix of the component of
    Q2 orthogonal to Q1), large ones from the cosines, so that neither end
    loses accuracy to cancellation.
    """
    Q1 = np.asarray(Q1, dtype=np.float64)
    Q2 = np.asarray(Q2, dtype=np.float64)
    if Q1.ndim == 1:
        Q1 = Q1[:, None]
    if Q2.ndim == 1:
        Q2 = Q2[:, None]
    if Q1.shape != Q2.shape:
        raise DimensionMismatch(f"bases of shape {Q1.shape} and {Q2.shape}")
    m = Q1.shape[1]
    if m == 0:
        return np.zeros(0)
    M = Q1.T @ Q2
    W = Q2 - Q1 @ M
    cos2 = dense_eigh(_sym(M.T @ M), vectors=False, check_symmetry=False).eigenvalues
    sin2 = dense_eigh(_sym(W.T @ W), vectors=False, check_symmetry=False).eigenvalues
    cos = np.sqrt(np.clip(cos2[::-1], 0.0, 1.0))  # descending cosines -> ascending angles
    sin = np.sqrt(np.clip(sin2, 0.0, 1.0))  # ascending sines -> ascending angles
    theta = np.where(sin * sin < 0.5, np.arcsin(sin), np.arccos(cos))
    return np.clip(theta, 0.0, np.pi / 2)[::-1]


def _sym(M):
    return 0.5 * (M + M.T)
