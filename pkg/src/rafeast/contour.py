"""Quadrature contours around a spectral window and the rational filter they induce.

The contour is the circle through the window endpoints. Only the nodes in
the upper half plane are stored: for real symmetric ``A`` the lower-half
contributions are complex conjugates, so a full contour sum equals twice the
real part of the half sum.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidNodeCount

__all__ = [
    "SpectralInterval",
    "Contour",
    "build_contour",
    "rational_filter_value",
    "full_contour_filter_value",
    "filter_deviation",
]


@dataclass(frozen=True)
class SpectralInterval:
    lambda_min: float
    lambda_max: float

    def __post_init__(self):
        lo, hi = float(self.lambda_min), float(self.lambda_max)
        if not (np.isfinite(lo) and np.isfinite(hi)) or not lo < hi:
            raise ValueError(f"invalid interval [{lo}, {hi}]")
        object.__setattr__(self, "lambda_min", lo)
        object.__setattr__(self, "lambda_max", hi)

    @property
    def center(self) -> float:
        return 0.5 * (self.lambda_min + self.lambda_max)

    @property
    def radius(self) -> float:
        return 0.5 * (self.lambda_max - self.lambda_min)

    @property
    def width(self) -> float:
        return self.lambda_max - self.lambda_min

    def contains(self, x, slack: float = 0.0):
        x = np.asarray(x)
        return (x >= self.lambda_min - slack) & (x <= self.lambda_max + slack)


@dataclass(frozen=True)
class Contour:
    """Upper-half quadrature nodes/weights on a circle.

    ``n_c`` counts effective nodes (both halves); ``nodes`` holds the
    ``n_c // 2`` stored ones.
    """

    nodes: np.ndarray
    weights: np.ndarray
    n_c: int
    center: float
    radius: float
    conjugate_reduced: bool = True
    min_real_axis_distance: float = float("nan")

    @property
    def n_solves(self) -> int:
        """Linear systems actually solved per filter application."""
        return len(self.nodes)

    def distance_to(self, eigenvalues) -> float:
        """Distance from the contour to the nearest of ``eigenvalues``."""
        lam = np.asarray(eigenvalues, dtype=np.float64)
        if lam.size == 0:
            return float("inf")
        return float(np.min(np.abs(np.abs(lam - self.center) - self.radius)))


def build_contour(interval: SpectralInterval, n_c: int) -> Contour:
    """Circle through the window endpoints with Gauss-Legendre angle quadrature.

    The upper half circle is parametrised by ``theta = (pi/2)(1 - t)`` for
    ``t`` in [-1, 1]; with ``n_c // 2`` Gauss-Legendre points ``t_k`` and
    weights ``g_k`` the stored weights are

        w_k = g_k * (pi/2) * i r e^{i theta_k} / (2 pi i)

    so that ``h(lam) = 2 Re sum_k w_k / (z_k - lam)`` approximates the
    indicator of the window.
    """
    if int(n_c) != n_c or n_c < 2 or n_c % 2:
        raise InvalidNodeCount(f"n_c must be an even integer >= 2, got {n_c!r}")
    n_c = int(n_c)
    c, r = interval.center, interval.radius
    t, g = np.polynomial.legendre.leggauss(n_c // 2)
    theta = 0.5 * np.pi * (1.0 - t)
    phase = np.exp(1j * theta)
    nodes = c + r * phase
    # dz/dt = i r e^{i theta} * dtheta/dt, and |dtheta/dt| = pi/2 keeps the
    # counter-clockwise orientation once the t-sum runs from -1 to 1
    weights = g * (0.5 * np.pi) * (1j * r * phase) / (2j * np.pi)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return Contour(
        nodes=nodes,
        weights=weights,
        n_c=n_c,
        center=c,
        radius=r,
        conjugate_reduced=True,
        min_real_axis_distance=float(np.min(nodes.imag)),
    )


def rational_filter_value(contour: Contour, lam):
    """h(lam) = 2 Re sum_k w_k / (z_k - lam); accepts scalars or arrays."""
    lam = np.asarray(lam, dtype=np.float64)
    terms = contour.weights / (contour.nodes - lam[..., None])
    out = 2.0 * np.real(terms.sum(axis=-1))
    return float(out) if out.ndim == 0 else out


def full_contour_filter_value(contour: Contour, lam):
    """Reference filter that sums explicitly over both half contours.

    The lower-half node is the conjugate of an upper one and, because the
    orientation flips, carries the conjugate weight. No real-part trick is
    used; the imaginary part is dropped only at the end.
    """
    lam = np.asarray(lam, dtype=np.float64)
    nodes = np.concatenate([contour.nodes, np.conj(contour.nodes)])
    weights = np.concatenate([contour.weights, np.conj(contour.weights)])
    out = np.real((weights / (nodes - lam[..., None])).sum(axis=-1))
    return float(out) if out.ndim == 0 else out


def filter_deviation(contour: Contour, interval: SpectralInterval, lam) -> np.ndarray:
    """|h(lam) - 1[lam in interval]| pointwise."""
    lam = np.asarray(lam, dtype=np.float64)
    return np.abs(rational_filter_value(contour, lam) - interval.contains(lam))
