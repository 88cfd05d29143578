"""Contour-filtered subspace iteration (FEAST) with an optional randomized warmstart.

One iteration applies the rational filter to the current basis by solving
the shifted systems at every stored quadrature node, re-orthonormalises with
column-pivoted QR and performs Rayleigh-Ritz. Direct factorisations are
computed once per node and reused across iterations.
"""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as la

from .contour import Contour, SpectralInterval, build_contour, filter_deviation
from .errors import DimensionMismatch, EmptySelection
from .oracle import canonical_angles, dense_eigh
from .shifted import (
    SolverConfig,
    block_residuals,
    factor_shifted,
    iterative_solve_block,
)
from .sparse import SymmetricSparseMatrix
from .warmstart import (
    ScaledOperator,
    WarmstartConfig,
    WarmstartInfo,
    gaussian_test_matrix,
    randomized_subspace,
)

__all__ = [
    "FeastConfig",
    "IterationTrace",
    "EigResult",
    "apply_filter",
    "orthonormalize_pivoted",
    "rayleigh_ritz",
    "filter_ritz_pairs",
    "eigenpair_residuals",
    "subspace_error",
    "containment_error",
    "feast_standard",
    "ra_feast",
]


@dataclass(frozen=True)
class FeastConfig:
    """Phase-2 parameters.

    ``max_iter`` caps the number of filter applications; the loop also stops
    once every in-window Ritz pair has residual ``<= residual_tolerance``.
    """

    interval: SpectralInterval
    m0: int
    n_c: int = 8
    max_iter: int = 20
    solver: SolverConfig = field(default_factory=SolverConfig)
    residual_tolerance: float = 1e-10
    warmstart: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    seed: int = 0
    parallel_quadrature: bool = False
    slack: Optional[float] = None

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not 0.0 < self.residual_tolerance < 1.0:
            raise ValueError("residual_tolerance must lie in (0, 1)")
        if self.m0 < 1:
            raise ValueError("m0 must be >= 1")


@dataclass
class IterationTrace:
    iteration: int
    max_residual: float
    n_in_window: int
    solver_perturbation: float  # from achieved solve residuals
    quadrature_perturbation: float  # filter deviation at current Ritz values
    subspace_error: Optional[float] = None
    time_filter: float = 0.0
    time_rr: float = 0.0

    @property
    def estimated_perturbation(self) -> float:
        return self.solver_perturbation + self.quadrature_perturbation


@dataclass
class EigResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residual_norms: np.ndarray
    iterations_used: int
    converged: bool
    trace: list = field(default_factory=list)
    saturated: bool = False  # every basis vector landed in the window: m0 may be too small
    time_phase1: float = 0.0
    time_factor: float = 0.0
    time_phase2: float = 0.0
    time_total: float = 0.0
    warmstart_info: Optional[WarmstartInfo] = None
    initial_subspace_error: Optional[float] = None


def orthonormalize_pivoted(Y) -> np.ndarray:
    """Orthonormal basis of span(Y) by column-pivoted Householder QR."""
    Q, _, _ = la.qr(Y, mode="economic", pivoting=True, check_finite=False)
    return Q


def rayleigh_ritz(A: SymmetricSparseMatrix, Q):
    """Ritz values (ascending) and Ritz vectors of A on span(Q)."""
    AQ = A @ Q
    H = Q.T @ AQ
    eig = dense_eigh(0.5 * (H + H.T), vectors=True, check_symmetry=False)
    return eig.eigenvalues, Q @ eig.eigenvectors


def eigenpair_residuals(A: SymmetricSparseMatrix, values, vectors) -> np.ndarray:
    """||A v - lam v||_2 per column."""
    if vectors.shape[1] == 0:
        return np.zeros(0)
    R = A @ vectors - vectors * np.asarray(values)[None, :]
    return np.linalg.norm(R, axis=0)


def filter_ritz_pairs(values, basis, interval: SpectralInterval, slack: Optional[float] = None):
    """Keep pairs whose value lies in the window widened by ``slack`` on each side.

    ``slack`` defaults to ``1e-8 * width``. Raises :class:`EmptySelection`
    if nothing remains.
    """
    if slack is None:
        slack = 1e-8 * interval.width
    if slack < 0:
        raise ValueError("slack must be non-negative")
    values = np.asarray(values)
    keep = interval.contains(values, slack)
    if not keep.any():
        raise EmptySelection(
            f"no Ritz value in [{interval.lambda_min}, {interval.lambda_max}] (slack {slack:g})"
        )
    return values[keep], basis[:, keep]


def _solve_node(A, z, Q, solver: SolverConfig, factor):
    if solver.mode == "direct":
        X = factor.solve(Q)
        res = block_residuals(A, z, X, Q)
    else:
        out = iterative_solve_block(A, z, Q, solver)
        X, res = out.solution, out.residuals
    return X, res


def apply_filter(
    A: SymmetricSparseMatrix,
    contour: Contour,
    Q,
    solver: SolverConfig,
    factorizations=None,
    parallel: bool = False,
):
    """Apply the quadrature filter: ``sum_j 2 Re(w_j X_j)`` with ``(z_j I - A) X_j = Q``.

    Returns ``(Q_filtered, solver_perturbation)``. The perturbation bounds
    the effect of inexact solves, ``2 sum_j |w_j| res_j ||Q||_F / Im z_j``,
    where ``res_j`` is the worst relative column residual at node ``j`` and
    ``Im z_j`` bounds the resolvent norm from below.
    """
    Q = np.asarray(Q, dtype=np.float64)
    if Q.shape[0] != A.n:
        raise DimensionMismatch(f"basis has {Q.shape[0]} rows, expected {A.n}")
    nodes = contour.nodes
    if solver.mode == "direct" and factorizations is None:
        factorizations = [factor_shifted(A, z, solver.backend) for z in nodes]
    facts = factorizations if factorizations is not None else [None] * len(nodes)

    def work(j):
        return _solve_node(A, nodes[j], Q, solver, facts[j])

    if parallel and len(nodes) > 1:
        with ThreadPoolExecutor(max_workers=len(nodes)) as pool:
            results = list(pool.map(work, range(len(nodes))))
    else:
        results = [work(j) for j in range(len(nodes))]

    # fixed node order keeps the sum bit-reproducible
    out = np.zeros(Q.shape)
    qnorm = np.linalg.norm(Q)
    eps = 0.0
    for j, (X, res) in enumerate(results):
        out += 2.0 * np.real(contour.weights[j] * X)
        worst = float(np.max(res)) if res.size else 0.0
        eps += 2.0 * abs(contour.weights[j]) * worst * qnorm / nodes[j].imag
    return out, eps


def subspace_error(Q, V1) -> float:
    """||Q Q^T - V1 V1^T||_F = sqrt(2 sum sin^2 theta) for equal-dimension bases."""
    Q = np.asarray(Q)
    V1 = np.asarray(V1)
    if Q.shape != V1.shape:
        raise DimensionMismatch(f"bases of shape {Q.shape} and {V1.shape}")
    s = np.sin(canonical_angles(Q, V1))
    return float(np.sqrt(2.0 * np.sum(s * s)))


def containment_error(Q, V1) -> float:
    """sqrt(2) ||(I - Q Q^T) V1||_F: how far span(V1) is from lying in span(Q).

    Equals :func:`subspace_error` when the dimensions agree.
    """
    Q = np.asarray(Q)
    V1 = np.asarray(V1)
    if Q.shape[0] != V1.shape[0] or Q.shape[1] < V1.shape[1]:
        raise DimensionMismatch(f"cannot contain {V1.shape} in {Q.shape}")
    if Q.shape == V1.shape:
        return subspace_error(Q, V1)
    R = V1 - Q @ (Q.T @ V1)
    # orthogonal-complement component; accurate for small errors
    return float(np.sqrt(2.0) * np.linalg.norm(R))


def _run(A, cfg: FeastConfig, Q, reference_basis, t_start, phase1, info=None) -> EigResult:
    interval = cfg.interval
    contour = build_contour(interval, cfg.n_c)
    t2 = time.perf_counter()
    factorizations = None
    if cfg.solver.mode == "direct":
        if cfg.parallel_quadrature and contour.n_solves > 1:
            with ThreadPoolExecutor(max_workers=contour.n_solves) as pool:
                factorizations = list(
                    pool.map(lambda z: factor_shifted(A, z, cfg.solver.backend), contour.nodes)
                )
        else:
            factorizations = [factor_shifted(A, z, cfg.solver.backend) for z in contour.nodes]
    t_factor = time.perf_counter() - t2

    # oracle diagnostics are excluded from the reported timings
    t_diag = time.perf_counter()
    e_init = containment_error(Q, reference_basis) if reference_basis is not None else None
    t_diag = time.perf_counter() - t_diag
    trace = []
    converged = False
    theta = values = vectors = res = None
    for m in range(1, cfg.max_iter + 1):
        t0 = time.perf_counter()
        Qf, eps_solve = apply_filter(
            A, contour, Q, cfg.solver, factorizations, parallel=cfg.parallel_quadrature
        )
        t1 = time.perf_counter()
        Q = orthonormalize_pivoted(Qf)
        theta, Q = rayleigh_ritz(A, Q)
        slack = 1e-8 * interval.width if cfg.slack is None else cfg.slack
        inside = interval.contains(theta, slack)
        res = eigenpair_residuals(A, theta[inside], Q[:, inside])
        t_rr = time.perf_counter() - t1
        max_res = float(res.max()) if res.size else float("inf")
        dev = filter_deviation(contour, interval, theta)
        tr = IterationTrace(
            iteration=m,
            max_residual=max_res,
            n_in_window=int(inside.sum()),
            solver_perturbation=eps_solve,
            quadrature_perturbation=float(dev.max()) if dev.size else 0.0,
            time_filter=t1 - t0,
            time_rr=t_rr,
        )
        if reference_basis is not None:
            t0 = time.perf_counter()
            tr.subspace_error = containment_error(Q, reference_basis)
            t_diag += time.perf_counter() - t0
        trace.append(tr)
        if res.size and max_res <= cfg.residual_tolerance:
            converged = True
            break

    values, vectors = filter_ritz_pairs(theta, Q, interval, cfg.slack)
    residuals = eigenpair_residuals(A, values, vectors)
    t_end = time.perf_counter()
    return EigResult(
        eigenvalues=values,
        eigenvectors=vectors,
        residual_norms=residuals,
        iterations_used=len(trace),
        converged=converged,
        trace=trace,
        saturated=values.size == Q.shape[1],
        time_phase1=phase1,
        time_factor=t_factor,
        time_phase2=t_end - t2 - t_diag,
        time_total=t_end - t_start - t_diag,
        warmstart_info=info,
        initial_subspace_error=e_init,
    )


def feast_standard(A: SymmetricSparseMatrix, cfg: FeastConfig, reference_basis=None) -> EigResult:
    """FEAST from a seeded random basis, or from ``cfg.warmstart`` when given.

    ``reference_basis`` (exact in-window eigenvectors) turns on the per-
    iteration subspace error in the trace.
    """
    t_start = time.perf_counter()
    if cfg.warmstart is not None:
        Q = np.asarray(cfg.warmstart, dtype=np.float64)
        if Q.shape != (A.n, cfg.m0):
            raise DimensionMismatch(f"warmstart has shape {Q.shape}, expected {(A.n, cfg.m0)}")
    else:
        if cfg.m0 > A.n:
            raise ValueError(f"m0 = {cfg.m0} exceeds n = {A.n}")
        Q = orthonormalize_pivoted(gaussian_test_matrix(A.n, cfg.m0, cfg.seed))
    return _run(A, cfg, Q, reference_basis, t_start, 0.0)


def ra_feast(
    A: SymmetricSparseMatrix, cfg: FeastConfig, warm_cfg: WarmstartConfig, reference_basis=None
) -> EigResult:
    """Randomized warmstart (Phase 1) followed by FEAST refinement (Phase 2)."""
    if warm_cfg.m0 != cfg.m0:
        raise ValueError(f"warmstart m0 = {warm_cfg.m0} differs from FEAST m0 = {cfg.m0}")
    t_start = time.perf_counter()
    B = ScaledOperator.from_interval(A, cfg.interval)
    Q0, info = randomized_subspace(B, warm_cfg, return_info=True)
    phase1 = time.perf_counter() - t_start
    info.sketch = None
    return _run(A, cfg, Q0, reference_basis, t_start, phase1, info)
