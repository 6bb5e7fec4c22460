"""Persistent homology over a prime field with creator/destroyer attribution.

Two reducers produce the same pairs on the same filtration order:

* :func:`reduce` runs the standard column reduction (with the twist) on an
  explicit :class:`~srips.complex.Filtration` and keeps representative cycles;
* :func:`implicit_reduce` runs persistent cohomology without building the
  complex, for the large selective filtrations of the sampled experiments.
  Representatives for its bars are rebuilt on demand by :func:`representative`.
"""

from __future__ import annotations

import csv
import heapq
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Iterator, Optional

import numpy as np
from scipy.sparse.csgraph import minimum_spanning_tree

from srips import _engine
from srips.complex import Filtration, FiltrationParams, build_filtration, lex_code, scale_matrices
from srips.metric import FiniteMetric


def _check_prime(p: int) -> None:
    if p < 2 or any(p % q == 0 for q in range(2, int(math.isqrt(p)) + 1)):
        raise ValueError(f"field characteristic must be prime, got {p}")


def _sort_oriented(vertices: tuple) -> tuple[tuple, int]:
    """Sorted vertex tuple and the sign of the sorting permutation."""
    vs = list(vertices)
    sign = 1
    for i in range(len(vs)):
        for j in range(len(vs) - 1 - i):
            if vs[j] > vs[j + 1]:
                vs[j], vs[j + 1] = vs[j + 1], vs[j]
                sign = -sign
    return tuple(vs), sign


class Chain:
    """Sparse chain: sorted vertex tuple -> coefficient.

    Coefficients live in F_p, or in the integers when ``p == 0``.  Zero
    coefficients are never stored.
    """

    __slots__ = ("terms", "p")

    def __init__(self, terms: Optional[dict] = None, p: int = 2):
        self.p = p
        self.terms: dict[tuple, int] = {}
        for s, c in (terms or {}).items():
            self._add(tuple(s), c)

    @classmethod
    def oriented(cls, terms: dict, p: int = 2) -> "Chain":
        """Build from oriented simplices; an odd reordering flips the sign."""
        out = cls(p=p)
        for s, c in terms.items():
            key, sign = _sort_oriented(tuple(s))
            out._add(key, sign * c)
        return out

    def _norm(self, c: int) -> int:
        return c % self.p if self.p else c

    def _add(self, key: tuple, c: int) -> None:
        v = self._norm(self.terms.get(key, 0) + c)
        if v:
            self.terms[key] = v
        else:
            self.terms.pop(key, None)

    def __add__(self, other: "Chain") -> "Chain":
        out = Chain(self.terms, self.p)
        for s, c in other.terms.items():
            out._add(s, c)
        return out

    def __sub__(self, other: "Chain") -> "Chain":
        return self + other.scale(-1)

    def scale(self, factor: int) -> "Chain":
        return Chain({s: c * factor for s, c in self.terms.items()}, self.p)

    def __eq__(self, other) -> bool:
        return isinstance(other, Chain) and self.p == other.p and self.terms == other.terms

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self) -> Iterator[tuple]:
        return iter(self.terms)

    def __getitem__(self, key: tuple) -> int:
        return self.terms.get(tuple(key), 0)

    def items(self):
        return self.terms.items()

    def lift(self) -> "Chain":
        """Integer chain with representatives in ``(-p/2, p/2]``."""
        if not self.p:
            return self
        half = self.p // 2
        return Chain({s: (c - self.p if c > half else c) for s, c in self.terms.items()}, 0)

    def __repr__(self) -> str:
        return f"Chain({self.terms!r}, p={self.p})"


def boundary(chain: Chain, filtration: Optional[Filtration] = None) -> Chain:
    """Alternating-sign boundary, ``d<v0..vk> = sum_i (-1)^i <v0..^vi..vk>``."""
    if filtration is not None:
        missing = [s for s in chain if s not in filtration.index]
        if missing:
            raise ValueError(f"chain has simplices outside the filtration: {missing[:3]}")
    out = Chain(p=chain.p)
    for s, c in chain.items():
        if len(s) == 1:
            continue
        for i in range(len(s)):
            out._add(s[:i] + s[i + 1:], c if i % 2 == 0 else -c)
    return out


@dataclass(frozen=True)
class Bar:
    dim: int
    birth: float
    death: float
    creator: tuple
    destroyer: Optional[tuple] = None
    cycle: Optional[Chain] = field(default=None, compare=False, repr=False)
    filling_chain: Optional[Chain] = field(default=None, compare=False, repr=False)
    # simplices enter open complexes strictly after their value
    birth_open: bool = True
    death_open: bool = False

    @property
    def lifespan(self) -> float:
        return self.death - self.birth

    @property
    def finite(self) -> bool:
        return math.isfinite(self.death)

    def alive_at(self, r: float) -> bool:
        return self.birth < r <= self.death


@dataclass
class PersistenceDiagram:
    bars: list[Bar]
    p: int = 2
    r_max: float = math.inf
    # lowest birth value reported per dimension when the reduction was windowed
    birth_floor: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.bars)

    def in_dim(self, dim: int) -> list[Bar]:
        return [b for b in self.bars if b.dim == dim]

    def betti(self, dim: int, r: float) -> int:
        return sum(1 for b in self.bars if b.dim == dim and b.alive_at(r))

    def signature(self) -> list[tuple]:
        return sorted((b.dim, b.birth, b.death) for b in self.bars)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["dim", "birth", "death", "birth_open", "death_open", "creator_vertices", "destroyer_vertices"])
            for b in self.bars:
                w.writerow([
                    b.dim,
                    repr(b.birth),
                    repr(b.death) if b.finite else "",
                    int(b.birth_open),
                    int(b.death_open),
                    " ".join(map(str, b.creator)),
                    "" if b.destroyer is None else " ".join(map(str, b.destroyer)),
                ])

    @classmethod
    def from_csv(cls, path, p: int = 2) -> "PersistenceDiagram":
        bars = []
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                bars.append(Bar(
                    dim=int(row["dim"]),
                    birth=float(row["birth"]),
                    death=float(row["death"]) if row["death"] else math.inf,
                    creator=tuple(int(v) for v in row["creator_vertices"].split()),
                    destroyer=tuple(int(v) for v in row["destroyer_vertices"].split()) or None,
                    birth_open=bool(int(row["birth_open"])),
                    death_open=bool(int(row["death_open"])),
                ))
        return cls(bars, p=p)


def _sorted_bars(bars: Iterable[Bar]) -> list[Bar]:
    return sorted(bars, key=lambda b: (b.dim, b.birth, b.death, b.creator))


def reduce(filtration: Filtration, p: int = 2) -> PersistenceDiagram:
    """Standard column reduction with clearing; bars in dimensions ``0..max_dim-1``."""
    _check_prime(p)
    simplices = filtration.simplices
    index = filtration.index
    max_dim = filtration.params.max_dim
    m = len(simplices)
    by_dim: dict[int, list[int]] = {}
    for j, s in enumerate(simplices):
        by_dim.setdefault(s.dim, []).append(j)

    R: list[Optional[dict]] = [None] * m
    V: list[Optional[dict]] = [None] * m
    low_to_col: dict[int, int] = {}
    for k in range(max_dim, 0, -1):
        for j in by_dim.get(k, ()):
            if j in low_to_col:
                continue  # cleared: pivot of a higher column, reduces to zero
            vs = simplices[j].vertices
            col = {}
            for i in range(len(vs)):
                col[index[vs[:i] + vs[i + 1:]]] = (1 if i % 2 == 0 else -1) % p
            v = {j: 1}
            while col:
                low = max(col)
                other = low_to_col.get(low)
                if other is None:
                    break
                f = (-col[low] * pow(R[other][low], p - 2, p)) % p
                for r, c in R[other].items():
                    nv = (col.get(r, 0) + f * c) % p
                    if nv:
                        col[r] = nv
                    else:
                        col.pop(r, None)
                for r, c in V[other].items():
                    nv = (v.get(r, 0) + f * c) % p
                    if nv:
                        v[r] = nv
                    else:
                        v.pop(r, None)
            R[j], V[j] = col, v
            if col:
                low_to_col[max(col)] = j

    def chain(d: dict) -> Chain:
        return Chain({simplices[i].vertices: c for i, c in d.items()}, p)

    bars = []
    for i, s in enumerate(simplices):
        if s.dim >= max_dim:
            continue
        j = low_to_col.get(i)
        if j is not None:
            t = simplices[j]
            if t.value > s.value:
                bars.append(Bar(s.dim, s.value, t.value, s.vertices, t.vertices,
                                cycle=chain(R[j]), filling_chain=chain(V[j])))
        elif s.dim == 0 or not R[i]:
            cyc = chain(V[i]) if V[i] is not None else Chain({s.vertices: 1}, p)
            bars.append(Bar(s.dim, s.value, math.inf, s.vertices, None, cycle=cyc, death_open=True))
    return PersistenceDiagram(_sorted_bars(bars), p=p, r_max=filtration.params.r_max)


def implicit_reduce(
    metric: FiniteMetric,
    params: FiltrationParams,
    p: int = 2,
    birth_floor: Optional[float] = None,
    stats: Optional[dict] = None,
) -> PersistenceDiagram:
    """Cohomology reduction straight from the metric (``n >= 2``, ``max_dim <= 3``).

    ``birth_floor`` restricts the top reported dimension to bars born at or after
    it, which only requires reducing the columns at or above that scale.
    Bars carry no cycles; see :func:`representative`.  Work counters per
    reduced dimension are written into ``stats`` when given.
    """
    _check_prime(p)
    if params.n < 2 or params.max_dim > 3:
        return reduce(build_filtration(metric, params), p)
    A, B = scale_matrices(metric, params)
    floor = -np.inf if birth_floor is None else float(birth_floor)
    n = metric.n
    raw = _engine.run(metric.d, A, B, params.n == 2, params.r_max, params.max_dim, p, floor, stats)
    bars = []
    for dim, creator, destroyer, birth, death in raw:
        bars.append(Bar(
            dim, birth, death,
            _decode(creator, n, dim + 1),
            None if destroyer < 0 else _decode(destroyer, n, dim + 2),
            death_open=not math.isfinite(death),
        ))
    floors = {} if birth_floor is None else {params.max_dim - 1: float(birth_floor)}
    return PersistenceDiagram(_sorted_bars(bars), p=p, r_max=params.r_max, birth_floor=floors)


def _decode(code: int, n: int, k: int) -> tuple:
    out = []
    for _ in range(k):
        out.append(code % n)
        code //= n
    return tuple(reversed(out))


def bars_in_window(
    diagram: PersistenceDiagram,
    dim: int,
    birth_range: tuple[float, float] = (-math.inf, math.inf),
    min_lifespan: float = 0.0,
) -> list[Bar]:
    """Bars of one dimension born inside ``birth_range`` (inclusive), longest first."""
    lo, hi = birth_range
    hits = [b for b in diagram.bars if b.dim == dim and lo <= b.birth <= hi and b.lifespan >= min_lifespan]
    return sorted(hits, key=lambda b: (-b.lifespan, b.birth, b.creator))


# -- representatives for implicitly reduced bars -----------------------------------------


class _Keys:
    """Filtration keys computed from the metric, matching the reducers' order."""

    def __init__(self, metric: FiniteMetric, params: FiltrationParams):
        self.d = metric.d
        self.params = params
        self.A, self.B = scale_matrices(metric, params)
        self.n = metric.n

    def key(self, vs: tuple) -> tuple:
        vs = tuple(sorted(vs))
        if len(vs) == 1:
            return (0.0, 0.0, 0.0, vs[0])
        value = 0.0
        diam = 0.0
        fill = 0.0
        for i, j in combinations(vs, 2):
            value = max(value, self.A[i, j])
            diam = max(diam, self.d[i, j])
            fill += self.d[i, j]
        if len(vs) == self.params.n + 2:
            value = max(value, min(self.B[i, j] for i, j in combinations(vs, 2)))
        return (float(value), float(diam), float(fill), lex_code(vs, self.n))


def representative(bar: Bar, metric: FiniteMetric, params: FiltrationParams, p: int = 2) -> Chain:
    """A cycle containing the creator whose other simplices all precede it.

    Any such cycle represents the class born with the bar.  Dimension 1 closes
    the creator edge with a path of earlier edges; dimension 2 follows the
    nullhomotopy picture: fans of triangles over short paths reduce the creator's
    edges to a loop of short edges, which is then filled by small triangles.
    """
    if bar.cycle is not None:
        return bar.cycle
    keys = _Keys(metric, params)
    if bar.dim == 0:
        return Chain({bar.creator: 1}, p)
    if bar.dim == 1:
        return _edge_cycle(bar.creator, keys, p)
    if bar.dim == 2:
        return _triangle_cycle(bar.creator, keys, p)
    raise ValueError("representatives are only rebuilt up to dimension 2")


def _dijkstra(n: int, adj: list[list[int]], w: np.ndarray, src: int, dst: int) -> Optional[list[int]]:
    dist = {src: 0.0}
    prev: dict[int, int] = {}
    heap = [(0.0, src)]
    while heap:
        du, u = heapq.heappop(heap)
        if u == dst:
            break
        if du > dist[u]:
            continue
        for v in adj[u]:
            nd = du + w[u, v]
            if nd < dist.get(v, math.inf):
                dist[v] = nd
                prev[v] = u
                heapq.heappush(heap, (nd, v))
    if dst not in dist:
        return None
    path = [dst]
    while path[-1] != src:
        path.append(prev[path[-1]])
    return path[::-1]


def _edge_cycle(edge: tuple, keys: _Keys, p: int) -> Chain:
    u, v = edge
    kmax = keys.key(edge)
    n = keys.n
    adj = [[] for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if np.isfinite(keys.A[i, j]) and keys.key((i, j)) < kmax:
                adj[i].append(j)
                adj[j].append(i)
    path = _dijkstra(n, adj, keys.d, v, u)
    if path is None:
        raise ValueError(f"edge {edge} closes no cycle; it is not a creator")
    terms = {(u, v): 1}
    for a, b in zip(path, path[1:]):
        terms[(a, b)] = terms.get((a, b), 0) + 1
    return Chain.oriented(terms, p)


def _solve_boundary(target: Chain, candidates: list[tuple], p: int) -> Optional[Chain]:
    """A chain on ``candidates`` whose boundary is ``target``, or None."""
    eindex: dict[tuple, int] = {}

    def vec(ch: Chain) -> dict:
        out = {}
        for s, c in ch.items():
            out[eindex.setdefault(s, len(eindex))] = c % p
        return out

    pivots: dict[int, tuple[dict, dict]] = {}
    for t in candidates:
        col = vec(boundary(Chain({t: 1}, p)))
        comb = {t: 1}
        while col:
            low = max(col)
            if low not in pivots:
                break
            pc, pv = pivots[low]
            f = (-col[low] * pow(pc[low], p - 2, p)) % p
            _axpy(col, pc, f, p)
            _axpy(comb, pv, f, p)
        if col:
            pivots[max(col)] = (col, comb)
    col = vec(target)
    sol: dict = {}
    while col:
        low = max(col)
        if low not in pivots:
            return None
        pc, pv = pivots[low]
        f = (col[low] * pow(pc[low], p - 2, p)) % p
        _axpy(col, pc, -f, p)
        _axpy(sol, pv, f, p)
    return Chain(sol, p)


def _axpy(x: dict, y: dict, f: int, p: int) -> None:
    for k, c in y.items():
        v = (x.get(k, 0) + f * c) % p
        if v:
            x[k] = v
        else:
            x.pop(k, None)


def _triangle_cycle(tri: tuple, keys: _Keys, p: int) -> Chain:
    kt = keys.key(tri)
    d = keys.d
    n = keys.n
    # start from the scale at which short edges connect everything
    mst = minimum_spanning_tree(d)
    rho = float(mst.data.max()) if mst.nnz else 0.0
    rho = max(rho, 1e-12) * 1.5
    limit = max(d[i, j] for i, j in combinations(tri, 2))
    target = boundary(Chain({tri: 1}, p)).scale(-1)
    while True:
        adj = [list(np.nonzero((d[i] <= rho) & (np.arange(n) != i))[0]) for i in range(n)]
        cand = set()
        for u, v in combinations(tri, 2):
            path = _dijkstra(n, adj, d, u, v)
            if path is None:
                continue
            for a, b in zip(path[1:], path[2:]):
                cand.add(tuple(sorted((u, a, b))))
        for i in range(n):
            nb = [j for j in adj[i] if j > i]
            for a, b in combinations(nb, 2):
                if d[a, b] <= rho:
                    cand.add((i, a, b))
        ordered = sorted((keys.key(t), t) for t in cand if len(set(t)) == 3)
        ordered = [t for k, t in ordered if k < kt]
        sol = _solve_boundary(target, ordered, p)
        if sol is not None:
            z = Chain({tri: 1}, p) + sol
            assert not boundary(z).terms
            return z
        if rho >= limit:
            raise ValueError(f"could not fill the boundary of {tri} with earlier triangles")
        rho = min(rho * 1.5, limit)
