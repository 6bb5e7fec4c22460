"""Selective Rips filtrations.

A finite vertex set ``sigma`` enters the complex at scale ``r`` when its
diameter is below ``a(r)`` and its vertices split into at most ``n + 1``
clusters of diameter below ``b(r)``.  The filtration value of ``sigma`` is the
infimum of such scales, ``max(a^-1(diam), b^-1(cluster_value))``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from srips.errors import CombinatorialBudget, MemoryBudget, OutOfRange
from srips.metric import FiniteMetric

MAX_CLUSTER_VERTICES = 16
DEFAULT_SIMPLEX_BUDGET = 3_000_000


@dataclass(frozen=True)
class ScaleMap:
    """Increasing piecewise-linear map given by knots, extended linearly past the last knot."""

    knots: tuple
    desc: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        k = tuple((float(r), float(y)) for r, y in self.knots)
        if len(k) < 2:
            raise ValueError("a scale map needs at least two knots")
        rs, ys = zip(*k)
        if rs[0] != 0.0 or ys[0] < 0:
            raise ValueError("first knot must sit at r = 0 with a non-negative value")
        if any(b <= a for a, b in zip(rs, rs[1:])) or any(b <= a for a, b in zip(ys, ys[1:])):
            raise ValueError("scale maps must be strictly increasing")
        object.__setattr__(self, "knots", k)
        object.__setattr__(self, "_rs", np.array(rs))
        object.__setattr__(self, "_ys", np.array(ys))

    @property
    def tail_slope(self) -> float:
        (r0, y0), (r1, y1) = self.knots[-2:]
        return (y1 - y0) / (r1 - r0)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        out = np.interp(r, self._rs, self._ys)
        tail = r > self._rs[-1]
        if np.any(tail):
            out = np.where(tail, self._ys[-1] + (r - self._rs[-1]) * self.tail_slope, out)
        return out if out.ndim else float(out)

    def inverse(self, y):
        y = np.asarray(y, dtype=float)
        out = np.interp(y, self._ys, self._rs)
        tail = y > self._ys[-1]
        if np.any(tail):
            out = np.where(tail, self._rs[-1] + (y - self._ys[-1]) / self.tail_slope, out)
        return out if out.ndim else float(out)

    @classmethod
    def linear(cls, slope: float = 1.0) -> "ScaleMap":
        return cls(((0.0, 0.0), (1.0, slope)), desc=_fmt_affine(0.0, slope))

    @classmethod
    def lower_envelope(cls, terms: Sequence[tuple[float, float]], desc: Optional[str] = None) -> "ScaleMap":
        """``r -> min_i (intercept_i + slope_i * r)`` for ``r >= 0``."""
        terms = [(float(c), float(s)) for c, s in terms]
        if any(s <= 0 for _, s in terms):
            raise ValueError("affine terms must have positive slope")
        cuts = {0.0}
        for (c1, s1), (c2, s2) in combinations(terms, 2):
            if s1 != s2:
                x = (c2 - c1) / (s1 - s2)
                if x > 0:
                    cuts.add(x)
        xs = sorted(cuts)
        xs.append(xs[-1] + 1.0)
        knots = [(x, min(c + s * x for c, s in terms)) for x in xs]
        return cls(tuple(knots), desc=desc)

    @classmethod
    def parse(cls, spec: Union[str, float, int, dict, "ScaleMap"]) -> "ScaleMap":
        """Accepts a slope (``0.3``), an expression (``"0.3r"``, ``"min(r, 0.7+0.3r)"``) or ``{"knots": [...]}``."""
        if isinstance(spec, ScaleMap):
            return spec
        if isinstance(spec, (int, float)):
            return cls.linear(float(spec))
        if isinstance(spec, dict):
            return cls(tuple(tuple(k) for k in spec["knots"]), desc=None)
        try:
            return cls.linear(float(spec))
        except ValueError:
            pass
        text = spec.replace(" ", "").replace("*", "")
        m = re.fullmatch(r"min\((.*)\)", text)
        parts = m.group(1).split(",") if m else [text]
        terms = [_parse_affine(p) for p in parts]
        if len(terms) == 1:
            c, s = terms[0]
            if c == 0.0:
                return cls(((0.0, 0.0), (1.0, s)), desc=spec)
        return cls.lower_envelope(terms, desc=spec)

    def describe(self):
        if self.desc is not None:
            return self.desc
        return {"knots": [list(k) for k in self.knots]}

    def dominates(self, other: "ScaleMap", r_max: float) -> bool:
        """True when ``self(r) >= other(r)`` on ``(0, r_max]``."""
        grid = sorted({r for r, _ in self.knots} | {r for r, _ in other.knots} | {r_max})
        grid = [r for r in grid if r <= r_max] + [r_max]
        return all(self(r) >= other(r) - 1e-12 for r in grid)


def _parse_affine(text: str) -> tuple[float, float]:
    intercept, slope = 0.0, 0.0
    for tok in re.findall(r"[+-]?[^+-]+", text):
        if tok.endswith("r"):
            coef = tok[:-1]
            slope += float(coef + "1") if coef in ("", "+", "-") else float(coef)
        else:
            intercept += float(tok)
    if slope == 0.0:
        raise ValueError(f"cannot parse scale map term {text!r}")
    return intercept, slope


def _fmt_affine(c: float, s: float) -> str:
    lead = "" if c == 0 else f"{c:g}+"
    return f"{lead}{'' if s == 1 else f'{s:g}'}r"


@dataclass(frozen=True)
class FiltrationParams:
    a: ScaleMap = field(default_factory=ScaleMap.linear)
    b: ScaleMap = field(default_factory=lambda: ScaleMap.linear(0.3))
    n: int = 2
    max_dim: int = 3
    r_max: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "a", ScaleMap.parse(self.a))
        object.__setattr__(self, "b", ScaleMap.parse(self.b))
        if self.n < 0:
            raise ValueError("n must be non-negative")
        if self.max_dim < 0:
            raise ValueError("max_dim must be non-negative")
        if not self.r_max > 0 or not math.isfinite(self.r_max):
            raise ValueError("r_max must be a positive finite scale")
        if not self.a.dominates(self.b, self.r_max):
            raise ValueError("scale maps must satisfy a(r) >= b(r)")

    @classmethod
    def rips(cls, r_max: float, max_dim: int = 3, a: Union[str, ScaleMap] = "r") -> "FiltrationParams":
        a = ScaleMap.parse(a)
        return cls(a=a, b=a, n=2, max_dim=max_dim, r_max=r_max)


@dataclass(frozen=True)
class FilteredSimplex:
    vertices: tuple
    diameter: float
    cluster_value: float
    value: float
    filling: float

    @property
    def dim(self) -> int:
        return len(self.vertices) - 1

    @property
    def tiebreak(self) -> tuple:
        return (self.diameter, self.filling, self.vertices)


def _diameter(vertices: Sequence[int], d: np.ndarray) -> float:
    return max((d[i, j] for i, j in combinations(vertices, 2)), default=0.0)


def _filling(vertices: Sequence[int], d: np.ndarray) -> float:
    total = 0.0
    for i, j in combinations(vertices, 2):
        total += d[i, j]
    return float(total)


def _colorable(k: int, far: list[list[int]], colors: int) -> bool:
    """Can vertices ``0..k-1`` be colored with ``colors`` colors so no far pair shares a color?"""
    assign = [-1] * k

    def go(i: int, used: int) -> bool:
        if i == k:
            return True
        for c in range(min(used + 1, colors)):
            if all(assign[j] != c for j in far[i] if j < i):
                assign[i] = c
                if go(i + 1, max(used, c + 1)):
                    return True
        assign[i] = -1
        return False

    return go(0, 0)


def cluster_value(vertices: Sequence[int], n: int, metric: FiniteMetric) -> float:
    """Smallest achievable maximum block diameter over partitions into at most ``n + 1`` blocks."""
    vs = tuple(vertices)
    k = len(vs)
    if k < 1:
        raise ValueError("need at least one vertex")
    if k <= n + 1:
        return 0.0
    d = metric.d
    if k == n + 2:
        return float(min(d[i, j] for i, j in combinations(vs, 2)))
    if k > MAX_CLUSTER_VERTICES:
        raise CombinatorialBudget(f"{k} vertices exceed the partition cap of {MAX_CLUSTER_VERTICES}")
    sub = d[np.ix_(vs, vs)]
    # blocks of diameter <= t  <=>  proper coloring of the graph of pairs farther than t
    for t in np.unique(sub[np.triu_indices(k, 1)]):
        far = [[j for j in range(k) if sub[i, j] > t] for i in range(k)]
        if _colorable(k, far, n + 1):
            return float(t)
    raise AssertionError("unreachable: the full diameter always admits a single block")


def filtration_value(vertices: Sequence[int], params: FiltrationParams, metric: FiniteMetric) -> float:
    vs = tuple(vertices)
    if len(set(vs)) != len(vs):
        raise ValueError("vertices must be distinct")
    if len(vs) > params.max_dim + 1:
        raise ValueError(f"simplex dimension exceeds max_dim={params.max_dim}")
    if len(vs) == 1:
        return 0.0
    value = max(params.a.inverse(_diameter(vs, metric.d)), params.b.inverse(cluster_value(vs, params.n, metric)))
    value = float(value)
    if value > params.r_max:
        raise OutOfRange(f"filtration value {value} exceeds r_max={params.r_max}")
    return value


def lex_code(vertices: Sequence[int], n: int) -> int:
    code = 0
    for v in vertices:
        code = code * n + int(v)
    return code


def scale_matrices(metric: FiniteMetric, params: FiltrationParams) -> tuple[np.ndarray, np.ndarray]:
    """Entry-wise ``a^-1(d)`` (inf beyond ``r_max``) and ``b^-1(d)``."""
    A = np.asarray(params.a.inverse(metric.d), dtype=float)
    A[A > params.r_max] = np.inf
    np.fill_diagonal(A, 0.0)
    B = np.asarray(params.b.inverse(metric.d), dtype=float)
    np.fill_diagonal(B, 0.0)
    return A, B


class Filtration:
    """Simplices sorted by (value, dim, diameter, filling, lexicographic vertices)."""

    def __init__(self, params: FiltrationParams, simplices: Iterable[FilteredSimplex], n_points: int):
        self.params = params
        self.n_points = n_points
        items = list(simplices)
        items.sort(key=lambda s: (s.value, s.dim, s.diameter, s.filling, s.vertices))
        self.simplices: tuple[FilteredSimplex, ...] = tuple(items)
        self._index: Optional[dict] = None

    def __len__(self) -> int:
        return len(self.simplices)

    def __iter__(self):
        return iter(self.simplices)

    def __getitem__(self, i: int) -> FilteredSimplex:
        return self.simplices[i]

    @property
    def index(self) -> dict:
        if self._index is None:
            self._index = {s.vertices: i for i, s in enumerate(self.simplices)}
        return self._index

    def values(self) -> np.ndarray:
        return np.array([s.value for s in self.simplices])

    def dims(self) -> np.ndarray:
        return np.array([s.dim for s in self.simplices], dtype=int)

    def counts(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for s in self.simplices:
            out[s.dim] = out.get(s.dim, 0) + 1
        return out

    def at_scale(self, r: float, closed: bool = True) -> list[FilteredSimplex]:
        return [s for s in self.simplices if (s.value <= r if closed else s.value < r)]

    def export(self, path, extra: bool = True) -> None:
        """One simplex per line: ``value dim v0 v1 ... [diameter cluster_value]``."""
        with open(path, "w") as fh:
            for s in self.simplices:
                row = [repr(s.value), str(s.dim), *map(str, s.vertices)]
                if extra:
                    row += [repr(s.diameter), repr(s.cluster_value)]
                fh.write(" ".join(row) + "\n")


def _cliques(adj: np.ndarray, max_size: int) -> list[np.ndarray]:
    """Cliques of the boolean adjacency matrix grouped by size, vertices ascending."""
    n = adj.shape[0]
    levels = [np.arange(n).reshape(-1, 1)]
    upper = np.triu(adj, 1)
    for _ in range(1, max_size):
        prev = levels[-1]
        out = []
        for row in prev:
            common = upper[row[-1]].copy()
            for v in row[:-1]:
                common &= adj[v]
            ext = np.nonzero(common)[0]
            if len(ext):
                out.append(np.column_stack([np.repeat(row[None, :], len(ext), axis=0), ext]))
        if not out:
            break
        levels.append(np.concatenate(out))
    return levels


def build_filtration(
    metric: FiniteMetric,
    params: FiltrationParams,
    max_simplices: int = DEFAULT_SIMPLEX_BUDGET,
) -> Filtration:
    """Every simplex up to ``max_dim`` whose value is at most ``r_max``, in filtration order."""
    d = metric.d
    A, _ = scale_matrices(metric, params)
    adj = np.isfinite(A)
    np.fill_diagonal(adj, False)
    simplices: list[FilteredSimplex] = []
    for level in _cliques(adj, params.max_dim + 1):
        k = level.shape[1]
        if len(simplices) + len(level) > max_simplices:
            raise MemoryBudget(f"more than {max_simplices} simplices; lower r_max or max_dim")
        if k == 1:
            simplices.extend(FilteredSimplex((int(v),), 0.0, 0.0, 0.0, 0.0) for v in level[:, 0])
            continue
        pairs = list(combinations(range(k), 2))
        dd = np.stack([d[level[:, i], level[:, j]] for i, j in pairs], axis=1)
        aa = np.stack([A[level[:, i], level[:, j]] for i, j in pairs], axis=1)
        diam = dd.max(axis=1)
        fill = np.zeros(len(level))
        for c in range(dd.shape[1]):
            fill += dd[:, c]
        value = aa.max(axis=1)
        if k <= params.n + 1:
            clus = np.zeros(len(level))
        elif k == params.n + 2:
            clus = dd.min(axis=1)
        else:
            clus = np.array([cluster_value(tuple(row), params.n, metric) for row in level])
        if k > params.n + 1:
            value = np.maximum(value, params.b.inverse(clus))
        keep = value <= params.r_max
        for row, dm, cv, val, fl in zip(level[keep], diam[keep], clus[keep], value[keep], fill[keep]):
            simplices.append(FilteredSimplex(tuple(int(v) for v in row), float(dm), float(cv), float(val), float(fl)))
    return Filtration(params, simplices, metric.n)
