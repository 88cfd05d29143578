"""Test problems: random geometric graph Laplacians and controlled spectra."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .sparse import SymmetricSparseMatrix, csr_from_triplets

__all__ = [
    "GeometricGraph",
    "rgg_radius",
    "random_geometric_graph",
    "laplacian",
    "graph_from_edges",
    "path_graph",
    "path_laplacian_spectrum",
    "synthetic_diagonal",
    "write_edge_list",
    "read_edge_list",
    "m0_policy",
]


@dataclass(frozen=True)
class GeometricGraph:
    n: int
    positions: np.ndarray  # (n, 2); empty for graphs given by edges only
    edges: np.ndarray  # (E, 2) int64, i < j, lexicographically sorted
    radius: float

    @property
    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n)


def rgg_radius(n: int) -> float:
    """Connection radius 1.5 * sqrt(ln n / n)."""
    return 1.5 * np.sqrt(np.log(n) / n)


def random_geometric_graph(n: int, seed, radius: float | None = None) -> GeometricGraph:
    """Uniform points in the unit square joined when their distance is <= radius.

    Neighbours are found exactly by binning points into square cells of side
    ``radius`` and comparing each cell with itself and four forward
    neighbours, so every pair is examined once.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    r = rgg_radius(n) if radius is None else float(radius)
    rng = np.random.Generator(np.random.Philox(seed))
    pos = rng.random((n, 2))

    ncell = max(1, int(np.floor(1.0 / r)))
    cell = np.minimum((pos / (1.0 / ncell)).astype(np.int64), ncell - 1)
    key = cell[:, 0] * ncell + cell[:, 1]
    order = np.argsort(key, kind="stable")
    sorted_keys = key[order]
    starts = np.searchsorted(sorted_keys, np.arange(ncell * ncell + 1))

    def members(cx, cy):
        k = cx * ncell + cy
        return order[starts[k] : starts[k + 1]]

    r2 = r * r
    src, dst = [], []
    for cx in range(ncell):
        for cy in range(ncell):
            a = members(cx, cy)
            if a.size == 0:
                continue
            pa = pos[a]
            # same cell: upper triangle only
            d2 = ((pa[:, None, :] - pa[None, :, :]) ** 2).sum(-1)
            i, j = np.nonzero(np.triu(d2 <= r2, k=1))
            src.append(a[i])
            dst.append(a[j])
            for dx, dy in ((1, -1), (1, 0), (1, 1), (0, 1)):
                nx, ny = cx + dx, cy + dy
                if not (0 <= nx < ncell and 0 <= ny < ncell):
                    continue
                b = members(nx, ny)
                if b.size == 0:
                    continue
                d2 = ((pa[:, None, :] - pos[b][None, :, :]) ** 2).sum(-1)
                i, j = np.nonzero(d2 <= r2)
                src.append(a[i])
                dst.append(b[j])
    if src:
        u = np.concatenate(src)
        v = np.concatenate(dst)
    else:
        u = v = np.empty(0, dtype=np.int64)
    edges = np.stack([np.minimum(u, v), np.maximum(u, v)], axis=1).astype(np.int64)
    edges = edges[np.lexsort((edges[:, 1], edges[:, 0]))]
    return GeometricGraph(n=n, positions=pos, edges=edges, radius=r)


def graph_from_edges(n: int, edges) -> GeometricGraph:
    """Wrap an explicit undirected edge list (no geometry)."""
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if e.size and (e.min() < 0 or e.max() >= n):
        raise ValueError("edge endpoint outside [0, n)")
    if np.any(e[:, 0] == e[:, 1]):
        raise ValueError("self-loops are not allowed")
    e = np.unique(np.sort(e, axis=1), axis=0)
    return GeometricGraph(n=n, positions=np.empty((0, 2)), edges=e, radius=float("nan"))


def path_graph(n: int) -> GeometricGraph:
    i = np.arange(n - 1)
    return graph_from_edges(n, np.stack([i, i + 1], axis=1))


def path_laplacian_spectrum(n: int) -> np.ndarray:
    """4 sin^2(k pi / (2n)), k = 0..n-1."""
    return 4.0 * np.sin(np.arange(n) * np.pi / (2 * n)) ** 2


def laplacian(g: GeometricGraph) -> SymmetricSparseMatrix:
    """L = D - A with the diagonal set to the integer degree."""
    e = g.edges
    m = e.shape[0]
    rows = np.concatenate([np.arange(g.n), e[:, 1]])
    cols = np.concatenate([np.arange(g.n), e[:, 0]])
    vals = np.concatenate([g.degrees.astype(np.float64), -np.ones(m)])
    return csr_from_triplets((rows, cols, vals), g.n)


def synthetic_diagonal(spectrum) -> SymmetricSparseMatrix:
    """diag(spectrum); zero entries are stored explicitly."""
    d = np.asarray(spectrum, dtype=np.float64).ravel()
    n = d.size
    idx = np.arange(n)
    return SymmetricSparseMatrix(n, np.arange(n + 1), idx, d)


def write_edge_list(g: GeometricGraph, path) -> None:
    """One "i j" pair per line, 0-based."""
    np.savetxt(Path(path), g.edges, fmt="%d")


def read_edge_list(path, n: int) -> GeometricGraph:
    e = np.loadtxt(Path(path), dtype=np.int64, ndmin=2)
    return graph_from_edges(n, e)


def m0_policy(count: int, cap: int = 40, buffer: int = 5) -> int:
    """Subspace size min(cap, count + buffer)."""
    return min(cap, count + buffer)
