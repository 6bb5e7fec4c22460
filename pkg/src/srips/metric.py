"""Finite metric spaces: model samplers, density thinning and graph geodesics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra, shortest_path
from scipy.spatial import cKDTree

from srips.errors import DisconnectedGraph

EXACT_MODEL = "exact-model"
GRAPH_GEODESIC = "graph-geodesic"


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray
    labels: Optional[tuple] = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(pts)):
            raise ValueError("point coordinates must be finite")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)

    def to_csv(self, path) -> None:
        np.savetxt(path, self.points, delimiter=",", fmt="%.17g")

    @classmethod
    def from_csv(cls, path) -> "PointCloud":
        return cls(np.loadtxt(path, delimiter=",", ndmin=2))


@dataclass(frozen=True)
class WindingContext:
    """Arc-length chart of a reference loop: circumference plus one angle per point."""

    circumference: float
    angles: np.ndarray

    def __post_init__(self):
        if not self.circumference > 0:
            raise ValueError("circumference must be positive")
        ang = np.asarray(self.angles, dtype=float)
        if np.any(ang < 0) or np.any(ang >= self.circumference):
            raise ValueError("angles must lie in [0, c)")
        object.__setattr__(self, "angles", ang)


@dataclass(frozen=True, eq=False)
class FiniteMetric:
    """Symmetric distance matrix over point ids ``0..n-1``.

    ``graph`` is kept for graph-geodesic metrics so that shortest paths can be
    recovered later (loop localization).
    """

    d: np.ndarray
    provenance: str = EXACT_MODEL
    graph: Optional[csr_matrix] = field(default=None, repr=False)
    cloud: Optional[PointCloud] = field(default=None, repr=False)

    def __post_init__(self):
        d = np.asarray(self.d, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ValueError("distance matrix must be square")
        if np.any(d < 0) or not np.all(np.isfinite(d)):
            raise ValueError("distances must be finite and non-negative")
        if np.any(np.diag(d) != 0) or not np.array_equal(d, d.T):
            raise ValueError("distance matrix must be symmetric with zero diagonal")
        object.__setattr__(self, "d", d)

    @property
    def n(self) -> int:
        return self.d.shape[0]

    def path(self, source: int, target: int) -> list[int]:
        """Point ids along a shortest path in the neighborhood graph."""
        if self.graph is None:
            raise ValueError("path recovery needs a graph-geodesic metric")
        if source == target:
            return [source]
        dist, pred = dijkstra(self.graph, directed=False, indices=source, return_predecessors=True)
        if not np.isfinite(dist[target]):
            raise DisconnectedGraph(f"no path between {source} and {target}")
        out = [target]
        while out[-1] != source:
            out.append(int(pred[out[-1]]))
        return out[::-1]

    def save(self, path) -> None:
        """Text format: a header line, then row i holds d[i, 0..i-1]."""
        with open(path, "w") as fh:
            fh.write(f"# n={self.n} provenance={self.provenance}\n")
            for i in range(1, self.n):
                fh.write(" ".join(repr(float(x)) for x in self.d[i, :i]) + "\n")

    @classmethod
    def load(cls, path) -> "FiniteMetric":
        lines = Path(path).read_text().splitlines()
        header = dict(tok.split("=", 1) for tok in lines[0].lstrip("# ").split())
        n = int(header["n"])
        d = np.zeros((n, n))
        for i, line in enumerate(lines[1:n], start=1):
            row = [float(x) for x in line.split()]
            if len(row) != i:
                raise ValueError(f"row {i} has {len(row)} entries, expected {i}")
            d[i, :i] = row
        d = d + d.T
        return cls(d, header.get("provenance", EXACT_MODEL))


def sample_cut_sphere(count: int, h: float, seed: int) -> PointCloud:
    """Uniform sample of the unit sphere below the parallel at height ``h``."""
    if count < 1:
        raise ValueError("count must be at least 1")
    if not -1 < h < 1:
        raise ValueError("h must lie in (-1, 1)")
    rng = np.random.default_rng(seed)
    batch = max(64, int(count * 2.0 / (1 + h)) + 16)
    chunks, have = [], 0
    while have < count:
        g = rng.standard_normal((batch, 3))
        g /= np.linalg.norm(g, axis=1)[:, None]
        g = g[g[:, 2] <= h]
        chunks.append(g)
        have += len(g)
    return PointCloud(np.concatenate(chunks)[:count])


def poisson_thin(cloud: PointCloud, min_dist: float) -> PointCloud:
    """Greedy density filter in input order; kept points are pairwise >= ``min_dist`` apart."""
    if not min_dist > 0:
        raise ValueError("min_dist must be positive")
    pts = cloud.points
    cells: dict[tuple, list[int]] = {}
    kept: list[int] = []
    for i, x in enumerate(pts):
        key = tuple(np.floor(x / min_dist).astype(int))
        ok = True
        for off in _NEIGHBOR_OFFSETS:
            for j in cells.get((key[0] + off[0], key[1] + off[1], key[2] + off[2]), ()):
                if np.linalg.norm(pts[j] - x) < min_dist:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            kept.append(i)
            cells.setdefault(key, []).append(i)
    labels = None if cloud.labels is None else tuple(cloud.labels[i] for i in kept)
    return PointCloud(pts[kept], labels)


_NEIGHBOR_OFFSETS = [(a, b, c) for a in (-1, 0, 1) for b in (-1, 0, 1) for c in (-1, 0, 1)]


def build_geodesic_metric(cloud: PointCloud, link_radius: float) -> FiniteMetric:
    """All-pairs shortest paths in the graph linking points at Euclidean distance <= ``link_radius``."""
    if not link_radius > 0:
        raise ValueError("link_radius must be positive")
    n = len(cloud)
    pairs = cKDTree(cloud.points).query_pairs(link_radius, output_type="ndarray")
    w = np.linalg.norm(cloud.points[pairs[:, 0]] - cloud.points[pairs[:, 1]], axis=1) if len(pairs) else np.zeros(0)
    graph = csr_matrix((w, (pairs[:, 0], pairs[:, 1])), shape=(n, n)) if len(pairs) else csr_matrix((n, n))
    d = shortest_path(graph, method="D", directed=False)
    if not np.all(np.isfinite(d)):
        raise DisconnectedGraph(
            f"neighborhood graph at radius {link_radius} is disconnected; sample is too sparse"
        )
    d = np.minimum(d, d.T)
    np.fill_diagonal(d, 0.0)
    return FiniteMetric(d, GRAPH_GEODESIC, graph=graph, cloud=cloud)


def _arc(angles: np.ndarray, c: float) -> np.ndarray:
    diff = np.abs(angles[:, None] - angles[None, :])
    return np.minimum(diff, c - diff)


def exact_circle_metric(angles: Sequence[float], c: float) -> tuple[FiniteMetric, WindingContext]:
    """Arc-length metric of points on a circle of circumference ``c``."""
    if not c > 0:
        raise ValueError("circumference must be positive")
    ang = np.asarray(angles, dtype=float)
    d = _arc(ang, c)
    return FiniteMetric(d, EXACT_MODEL), WindingContext(c, ang)


def exact_cylinder_metric(samples, c: float, w: float) -> tuple[FiniteMetric, WindingContext]:
    """Flat-cylinder metric on samples ``(theta, t)`` with theta in [0, c) and t in [0, w]."""
    if not c > 0 or w < 0:
        raise ValueError("need c > 0 and w >= 0")
    s = np.asarray(samples, dtype=float).reshape(-1, 2)
    if np.any(s[:, 1] < 0) or np.any(s[:, 1] > w):
        raise ValueError("heights must lie in [0, w]")
    arc = _arc(s[:, 0], c)
    dt = s[:, 1][:, None] - s[:, 1][None, :]
    d = np.sqrt(arc * arc + dt * dt)
    return FiniteMetric(d, EXACT_MODEL), WindingContext(c, s[:, 0])


def evenly_spaced_circle(count: int, c: float) -> tuple[FiniteMetric, WindingContext]:
    return exact_circle_metric(np.arange(count) * (c / count), c)


def azimuth_context(cloud: PointCloud, h: float) -> WindingContext:
    """Chart the cut sphere by azimuth, scaled to arc length on the boundary parallel."""
    c = 2 * math.pi * math.sqrt(1 - h * h)
    phi = np.mod(np.arctan2(cloud.points[:, 1], cloud.points[:, 0]), 2 * math.pi)
    ang = phi / (2 * math.pi) * c
    ang[ang >= c] = 0.0
    return WindingContext(c, ang)
