"""Closed-form evaluators for the convergence theory, usable without a solver run."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence, Union

import numpy as np
from scipy.optimize import nnls

from .errors import DegenerateGap, InsufficientTrace

__all__ = [
    "RecursionParams",
    "SpeedupParams",
    "ContractionFit",
    "davis_kahan_bound",
    "simulate_error_recursion",
    "speedup_model",
    "fit_contraction",
]

EPS_MACH = 1e-16


def davis_kahan_bound(residual_norm: float, delta_gap: float) -> float:
    """sin-theta bound ``residual_norm / delta_gap``."""
    if not delta_gap > 0:
        raise DegenerateGap(f"delta_gap must be positive, got {delta_gap}")
    if residual_norm < 0:
        raise ValueError("residual_norm must be non-negative")
    return residual_norm / delta_gap


@dataclass(frozen=True)
class RecursionParams:
    rho: float
    e0: float
    epsilon_sequence: Union[float, Sequence[float]]
    eps_mach: float = EPS_MACH

    def __post_init__(self):
        if not 0.0 <= self.rho < 1.0:
            raise ValueError(f"rho must lie in [0, 1), got {self.rho}")
        eps = np.atleast_1d(np.asarray(self.epsilon_sequence, dtype=np.float64))
        if self.e0 < 0 or self.eps_mach < 0 or np.any(eps < 0):
            raise ValueError("e0, eps_mach and epsilon values must be non-negative")


def simulate_error_recursion(p: RecursionParams, steps: int) -> list[float]:
    """Iterate ``e_{m+1} = rho e_m + eps_m + eps_mach`` with equality.

    Returns ``[e_0, ..., e_steps]``. A scalar (or length-1) epsilon sequence
    is held constant; otherwise it needs at least ``steps`` entries.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    eps = np.atleast_1d(np.asarray(p.epsilon_sequence, dtype=np.float64))
    if eps.size == 1:
        eps = np.full(steps, eps[0])
    elif eps.size < steps:
        raise ValueError(f"epsilon_sequence has {eps.size} entries, need {steps}")
    out = [float(p.e0)]
    e = float(p.e0)
    for m in range(steps):
        e = p.rho * e + float(eps[m]) + p.eps_mach
        out.append(e)
    return out


@dataclass(frozen=True)
class SpeedupParams:
    k_iter: int
    k_inexact: int
    q: int
    m0: int
    t_outer: int
    n_c: int
    n: int

    def __post_init__(self):
        for name in ("k_iter", "k_inexact", "m0", "t_outer", "n_c", "n"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.q < 0:
            raise ValueError("q must be >= 0")


def speedup_model(p: SpeedupParams) -> float:
    """(k_iter / k_inexact) / (1 + q m0 / (T N_c n))."""
    overhead = (p.q * p.m0) / (p.t_outer * p.n_c * p.n)
    return (p.k_iter / p.k_inexact) / (1.0 + overhead)


class ContractionFit(NamedTuple):
    rho: float
    epsilon: float
    floor: float  # epsilon / (1 - rho); inf when not contractive
    r_squared: float  # of log e_{m+1} against the fitted prediction
    contractive: bool
    n_pairs: int


def fit_contraction(trace, eps_mach: float = EPS_MACH) -> ContractionFit:
    """Fit ``e_{m+1} ~ rho e_m + eps`` to an error sequence.

    ``trace`` is a sequence of ``e_m`` values or of ``(e_m, eps_estimate)``
    pairs (the estimate is not used by the fit). Points at or below
    ``10 * eps_mach`` are dropped. The fit minimises relative residuals
    ``(rho e_m + eps - e_{m+1}) / e_{m+1}`` subject to ``rho, eps >= 0``, so
    that late small errors weigh as much as early large ones.
    """
    arr = np.asarray(trace, dtype=np.float64)
    e = arr[:, 0] if arr.ndim == 2 else arr.ravel()
    keep = e > 10.0 * eps_mach
    if not keep.all():
        e = e[: int(np.argmin(keep))]  # prefix before the first floor-level point
    if e.size < 3:
        raise InsufficientTrace(f"need >= 3 points above 10*eps_mach, got {e.size}")
    x, y = e[:-1], e[1:]

    if np.ptp(x) <= 1e-12 * np.max(x):
        # no spread in e_m: only the ratio is identifiable
        rho, eps = float(np.mean(y / x)), 0.0
    else:
        M = np.column_stack([x / y, 1.0 / y])
        scale = np.linalg.norm(M, axis=0)  # columns differ by many decades
        coef, _ = nnls(M / scale, np.ones_like(y))
        rho, eps = (float(c) for c in coef / scale)

    pred = rho * x + eps
    ly, lp = np.log(y), np.log(np.maximum(pred, np.finfo(float).tiny))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    ss_res = float(np.sum((ly - lp) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res == 0 else 0.0)
    contractive = rho < 1.0 - 1e-6
    floor = eps / (1.0 - rho) if contractive else float("inf")
    return ContractionFit(rho, eps, floor, r2, contractive, int(x.size))
