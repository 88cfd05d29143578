"""Randomized warmstart: Gaussian sketch, power iteration, bounds, q selection.

The warmstart works on the scaled operator ``B = (A - lmin I) / (lmax - lmin)``
which maps the search window onto [0, 1]. With ``transform="scaled"`` the
power iteration uses ``B`` itself, which favours the largest eigenvalues of
``B``. With ``transform="chebyshev"`` it uses ``T_d(B)``, a Chebyshev
polynomial whose damped band is ``[1 + margin, upper bound of B]``. This
amplifies the window relative to everything above it, so windows at the low
end of the spectrum (graph Laplacians) become dominant using matrix products
only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np

from .contour import SpectralInterval
from .errors import (
    DegenerateGap,
    DimensionMismatch,
    InvalidOversampling,
    InvalidSpectrum,
    RankDeficientSketch,
)
from .oracle import canonical_angles, dense_eigh
from .sparse import SymmetricSparseMatrix

__all__ = [
    "ScaledOperator",
    "WarmstartConfig",
    "BoundReport",
    "WarmstartInfo",
    "default_oversampling",
    "gaussian_test_matrix",
    "orthonormalize",
    "randomized_subspace",
    "c1_delta",
    "halko_residual_bound",
    "select_power_iterations",
    "bound_report",
    "verify_warmstart_bound",
    "lanczos_upper_bound",
]


class ScaledOperator:
    """Applies ``B = (A - lmin I) / (lmax - lmin)`` without forming it."""

    def __init__(self, A: SymmetricSparseMatrix, lambda_min: float, lambda_max: float):
        if not lambda_min < lambda_max:
            raise ValueError("lambda_min must be below lambda_max")
        self.A = A
        self.lambda_min = float(lambda_min)
        self.lambda_max = float(lambda_max)
        self._scale = 1.0 / (self.lambda_max - self.lambda_min)

    @classmethod
    def from_interval(cls, A, interval: SpectralInterval) -> "ScaledOperator":
        return cls(A, interval.lambda_min, interval.lambda_max)

    @property
    def n(self) -> int:
        return self.A.n

    def __matmul__(self, X):
        return self._scale * (self.A @ X - self.lambda_min * X)

    def to_scaled(self, lam):
        """Map eigenvalues of A to eigenvalues of B."""
        return (np.asarray(lam) - self.lambda_min) * self._scale

    def to_original(self, beta):
        return np.asarray(beta) / self._scale + self.lambda_min

    def dense(self) -> np.ndarray:
        return self._scale * (self.A.toarray() - self.lambda_min * np.eye(self.n))


def default_oversampling(m0: int) -> int:
    """p = 10 for m0 <= 50, else min(20, ceil(m0 / 2))."""
    return 10 if m0 <= 50 else min(20, math.ceil(m0 / 2))


@dataclass(frozen=True)
class WarmstartConfig:
    """Phase-1 parameters.

    ``q=None`` asks :func:`randomized_subspace` to pick the power-iteration
    count itself from Rayleigh-Ritz estimates and the target ``epsilon``.
    ``q_boundary`` says where the eigengap is measured: ``"window"`` uses
    the edge of the set the power operator is meant to amplify (eigenvalues
    on the window side of the far endpoint), ``"subspace"`` uses position
    ``m0`` in the ordered spectrum.
    """

    m0: int
    p: Optional[int] = None
    q: Optional[int] = 0
    seed: int = 0
    delta: float = 0.05
    epsilon: float = 0.1
    transform: Literal["scaled", "chebyshev"] = "scaled"
    degree: int = 60
    damping_margin: float = 0.2
    max_amplification: float = 1e11
    q_boundary: Literal["window", "subspace"] = "window"
    max_q: int = 50

    def __post_init__(self):
        if self.p is None:
            object.__setattr__(self, "p", default_oversampling(self.m0))
        if self.m0 < 1:
            raise ValueError("m0 must be >= 1")
        if self.p < 4:
            raise InvalidOversampling(f"oversampling p must be >= 4, got {self.p}")
        if self.q is not None and self.q < 0:
            raise ValueError("q must be >= 0")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.transform not in ("scaled", "chebyshev"):
            raise ValueError(f"unknown transform {self.transform!r}")
        if self.degree < 1 or self.damping_margin < 0:
            raise ValueError("degree must be >= 1 and damping_margin >= 0")
        if self.max_amplification <= 1.0:
            raise ValueError("max_amplification must exceed 1")
        if self.q_boundary not in ("window", "subspace"):
            raise ValueError(f"unknown q_boundary {self.q_boundary!r}")


@dataclass(frozen=True)
class BoundReport:
    r_halko: float
    c1_delta: float
    delta_gap: float
    warmstart_bound: float
    recommended_q: int


@dataclass
class WarmstartInfo:
    """Diagnostics from one Phase-1 run."""

    q: int
    beta_estimates: np.ndarray  # normalised |Ritz values| of the power operator, descending
    ritz_values_B: np.ndarray  # Rayleigh-Ritz values of B on the final sketch
    operator_applications: int
    degree: int  # polynomial degree actually used (1 for plain power steps)
    matvec_blocks: int  # block products with A
    upper_bound: Optional[float] = None
    report: Optional[BoundReport] = None
    sketch: Optional[np.ndarray] = field(default=None, repr=False)


def gaussian_test_matrix(n: int, k: int, seed) -> np.ndarray:
    """n-by-k standard normal matrix from a Philox (counter-based) stream."""
    if not n >= k >= 1:
        raise ValueError(f"need n >= k >= 1, got n={n}, k={k}")
    rng = np.random.Generator(np.random.Philox(seed))
    return rng.standard_normal((n, k))


def orthonormalize(Y, pivoting: bool = False) -> np.ndarray:
    """Orthonormal basis for the columns of Y (Householder QR)."""
    if pivoting:
        import scipy.linalg as la

        Q, _, _ = la.qr(Y, mode="economic", pivoting=True, check_finite=False)
        return Q
    Q, _ = np.linalg.qr(Y)
    return Q


def _numerical_rank(Y) -> int:
    s = np.linalg.svd(Y, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > s[0] * max(Y.shape) * np.finfo(float).eps))


def lanczos_upper_bound(apply, n: int, steps: int = 20, seed=0, safety: float = 0.01) -> float:
    """Cheap upper estimate of the largest eigenvalue of a symmetric operator.

    Runs ``steps`` Lanczos steps from a random start and returns the largest
    Ritz value plus its residual norm ``beta_k |s_k|``, widened by
    ``safety`` times the spread of the Ritz values.
    """
    steps = min(steps, n)
    rng = np.random.Generator(np.random.Philox(seed))
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    v_prev = np.zeros(n)
    alphas, betas = [], []
    beta = 0.0
    for _ in range(steps):
        f = apply(v) - beta * v_prev
        alpha = float(v @ f)
        f -= alpha * v
        alphas.append(alpha)
        beta = float(np.linalg.norm(f))
        betas.append(beta)
        if beta <= 1e-14 * max(1.0, abs(alpha)):
            break
        v_prev, v = v, f / beta
    k = len(alphas)
    T = np.diag(alphas) + np.diag(betas[: k - 1], 1) + np.diag(betas[: k - 1], -1)
    eig = dense_eigh(T, vectors=True, check_symmetry=False)
    theta = eig.eigenvalues
    resid = betas[-1] * abs(eig.eigenvectors[-1, -1])
    return float(theta[-1] + resid + safety * (theta[-1] - theta[0]))


class _ChebyshevOperator:
    """T_d(B) with damped band [lo, hi], applied by three-term recurrence."""

    def __init__(self, B: ScaledOperator, degree: int, lo: float, hi: float):
        self.B, self.degree = B, degree
        self.e = 0.5 * (hi - lo)
        self.c = 0.5 * (hi + lo)

    def __matmul__(self, X):
        B, c, e = self.B, self.c, self.e
        Y0 = X
        Y1 = (B @ X - c * X) / e
        for _ in range(2, self.degree + 1):
            Y0, Y1 = Y1, 2.0 * (B @ Y1 - c * Y1) / e - Y0
        return Y1

    def magnitude(self, beta):
        x = (np.asarray(beta, dtype=np.float64) - self.c) / self.e
        ax = np.abs(x)
        inside = np.cos(self.degree * np.arccos(np.clip(x, -1.0, 1.0)))
        outside = np.cosh(self.degree * np.arccosh(np.maximum(ax, 1.0)))
        return np.where(ax <= 1.0, np.abs(inside), outside)


class _ScaledPower:
    def __init__(self, B):
        self.B = B

    def __matmul__(self, X):
        return self.B @ X

    @staticmethod
    def magnitude(beta):
        return np.abs(np.asarray(beta, dtype=np.float64))


def _power_operator(B: ScaledOperator, cfg: WarmstartConfig):
    if cfg.transform == "scaled":
        return _ScaledPower(B), None, 1
    # upper bound of B from a short Lanczos run on A
    g_lo, g_hi = B.A.gershgorin_bounds()
    ub_A = min(lanczos_upper_bound(lambda v: B.A @ v, B.n, seed=(cfg.seed, 1)), g_hi)
    ub = float(B.to_scaled(ub_A))
    lo = 1.0 + cfg.damping_margin
    if ub <= lo:
        # nothing above the window to damp; fall back to plain power steps
        return _ScaledPower(B), ub_A, 1
    # cap the degree so that max |T_d| over the spectrum stays below
    # max_amplification; otherwise the bottom eigenvector swamps the block
    c, e = 0.5 * (ub + lo), 0.5 * (ub - lo)
    x_far = abs(float(B.to_scaled(g_lo)) - c) / e
    degree = cfg.degree
    if x_far > 1.0:
        cap = int(np.arccosh(cfg.max_amplification) / np.arccosh(x_far))
        degree = max(1, min(degree, cap))
    return _ChebyshevOperator(B, degree, lo, ub), ub_A, degree


def _ritz(B: ScaledOperator, Q):
    H = Q.T @ (B @ Q)
    eig = dense_eigh(0.5 * (H + H.T), vectors=True, check_symmetry=False)
    return eig.eigenvalues, eig.eigenvectors


def randomized_subspace(B: ScaledOperator, cfg: WarmstartConfig, return_info: bool = False):
    """Phase-1 basis Q0 (n-by-m0) from a power-iterated Gaussian sketch.

    Computes ``Y = (W W^T)^q W Omega`` for the power operator ``W``
    (``B`` or its Chebyshev transform), re-orthonormalising after every
    application of ``W``. The sketch is then rotated by Rayleigh-Ritz on
    ``B`` and the ``m0`` directions with the largest ``|W|`` value are kept.
    With ``cfg.q is None`` the count is chosen after the first application
    from Ritz estimates of the relevant eigenvalues of ``W``.
    """
    n = B.n
    k = cfg.m0 + cfg.p
    if k > n:
        raise ValueError(f"m0 + p = {k} exceeds n = {n}")
    W, ub_A, degree = _power_operator(B, cfg)
    raw = W @ gaussian_test_matrix(n, k, cfg.seed)
    Y = orthonormalize(raw)
    applications = 1

    report = None
    if cfg.q is None:
        theta, _ = _ritz(B, Y)
        mag = np.abs(theta) if isinstance(W, _ScaledPower) else W.magnitude(theta)
        beta = np.sort(mag)[::-1]
        beta = beta / beta[0] if beta[0] > 0 else beta
        report, q = _auto_q(cfg, beta, _target_count(W, theta, cfg.m0))
    else:
        q = cfg.q
    for _ in range(2 * q):
        raw = W @ Y
        Y = orthonormalize(raw)
        applications += 1

    rank = _numerical_rank(raw)
    if rank < cfg.m0:
        raise RankDeficientSketch(f"sketch has numerical rank {rank} < m0 = {cfg.m0}")

    theta, S = _ritz(B, Y)
    # scaled: descending Rayleigh quotient; chebyshev: descending |T_d|
    mag = theta if isinstance(W, _ScaledPower) else W.magnitude(theta)
    order = np.argsort(-mag, kind="stable")
    Q0 = Y @ S[:, order[: cfg.m0]]
    if not return_info:
        return Q0
    beta = np.abs(mag[order])
    info = WarmstartInfo(
        q=q,
        beta_estimates=beta / beta[0] if beta[0] > 0 else beta,
        ritz_values_B=theta,
        operator_applications=applications,
        degree=degree,
        matvec_blocks=applications * degree + 1 + (1 if cfg.q is None else 0),
        upper_bound=ub_A,
        report=report,
        sketch=Y,
    )
    return Q0, info


def _target_count(W, theta, m0: int) -> int:
    # Ritz values on the window side of the far endpoint (B <= 1 for the
    # Chebyshev transform, B >= 0 for plain power steps), clamped to [1, m0]
    tol = 1e-12
    if isinstance(W, _ScaledPower):
        k = int(np.sum(theta >= -tol))
    else:
        k = int(np.sum(theta <= 1.0 + tol))
    return min(max(k, 1), m0)


def _auto_q(cfg: WarmstartConfig, beta, k_target: int):
    k = k_target if cfg.q_boundary == "window" else cfg.m0
    b0, b1 = float(beta[k - 1]), float(beta[k])
    try:
        rep = bound_report(cfg, b0, b1, cfg.epsilon)
        q = rep.recommended_q
    except DegenerateGap:
        rep, q = None, cfg.max_q
    return rep, min(q, cfg.max_q)


def c1_delta(p: int, m0: int, delta: float) -> float:
    """C1(delta) = 1 + (p/2) ln(2 m0 / delta)."""
    return 1.0 + 0.5 * p * math.log(2.0 * m0 / delta)


def _check_betas(beta_m0, beta_m0_plus_1):
    if not (0.0 <= beta_m0_plus_1 <= beta_m0):
        raise InvalidSpectrum(
            f"need 0 <= beta_(m0+1) <= beta_m0, got {beta_m0_plus_1}, {beta_m0}"
        )


def halko_residual_bound(cfg: WarmstartConfig, beta_m0: float, beta_m0_plus_1: float) -> float:
    """R = C1(delta) sqrt(1 + m0/(p-1)) beta_(m0+1) (beta_(m0+1)/beta_m0)^(2q)."""
    if cfg.p < 2:
        raise InvalidOversampling("the bound needs p >= 2")
    _check_betas(beta_m0, beta_m0_plus_1)
    if beta_m0_plus_1 == beta_m0 and beta_m0 > 0:
        raise InvalidSpectrum("beta_(m0+1) must be strictly below beta_m0")
    if beta_m0_plus_1 == 0.0:
        return 0.0
    q = cfg.q or 0
    ratio = beta_m0_plus_1 / beta_m0
    return (
        c1_delta(cfg.p, cfg.m0, cfg.delta)
        * math.sqrt(1.0 + cfg.m0 / (cfg.p - 1))
        * beta_m0_plus_1
        * ratio ** (2 * q)
    )


def select_power_iterations(
    cfg: WarmstartConfig,
    beta_m0: float,
    beta_m0_plus_1: float,
    epsilon: float,
    delta_gap: float,
) -> int:
    """Smallest q >= 0 with R(q) <= epsilon * delta_gap (closed form)."""
    if epsilon <= 0 or delta_gap <= 0:
        raise ValueError("epsilon and delta_gap must be positive")
    _check_betas(beta_m0, beta_m0_plus_1)
    if beta_m0_plus_1 == 0.0:
        return 0
    if beta_m0_plus_1 == beta_m0:
        raise DegenerateGap("beta_m0 == beta_(m0+1): no finite q reaches the target")
    arg = (
        c1_delta(cfg.p, cfg.m0, cfg.delta)
        * math.sqrt(1.0 + cfg.m0 / (cfg.p - 1))
        * beta_m0_plus_1
        / (epsilon * delta_gap)
    )
    if arg <= 1.0:
        return 0
    rhs = math.log(arg) / (2.0 * math.log(beta_m0 / beta_m0_plus_1))
    return max(0, math.ceil(rhs))


def bound_report(cfg: WarmstartConfig, beta_m0: float, beta_m0_plus_1: float, epsilon: float) -> BoundReport:
    """Evaluate every warmstart quantity for the given spectrum estimates."""
    gap = beta_m0 - beta_m0_plus_1
    if gap <= 0:
        raise DegenerateGap("zero eigengap")
    q = select_power_iterations(cfg, beta_m0, beta_m0_plus_1, epsilon, gap)
    r = halko_residual_bound(cfg, beta_m0, beta_m0_plus_1)
    return BoundReport(
        r_halko=r,
        c1_delta=c1_delta(cfg.p, cfg.m0, cfg.delta),
        delta_gap=gap,
        warmstart_bound=r / gap,
        recommended_q=q,
    )


def verify_warmstart_bound(Q0, V1, report: BoundReport):
    """Compare ||V1 V1^T - Q0 Q0^T||_2 (largest canonical-angle sine) with the bound.

    Returns ``(observed, bound, holds)``.
    """
    Q0 = np.asarray(Q0)
    V1 = np.asarray(V1)
    if Q0.shape != V1.shape:
        raise DimensionMismatch(f"bases of shape {Q0.shape} and {V1.shape}")
    theta = canonical_angles(Q0, V1)
    observed = float(np.sin(theta[0])) if theta.size else 0.0
    return observed, report.warmstart_bound, observed <= report.warmstart_bound
