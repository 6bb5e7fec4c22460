"""Critical simplices of detected bars and the loops their vertices span."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Optional

from srips.complex import FiltrationParams
from srips.errors import NoAttribution
from srips.metric import FiniteMetric, PointCloud, WindingContext
from srips.persistence import Bar, PersistenceDiagram, representative
from srips.winding import is_circumventing


def perimeter(metric: FiniteMetric, triple) -> float:
    a, b, c = triple
    return float(metric.d[a, b] + metric.d[b, c] + metric.d[c, a])


def critical_simplex(
    diagram: PersistenceDiagram,
    bar: Bar,
    metric: Optional[FiniteMetric] = None,
    params: Optional[FiltrationParams] = None,
) -> tuple:
    """The 2-simplex a bar is attributed to.

    A finite dim-1 bar is attributed to the triangle that kills it.  A dim-2
    bar is attributed to the triangle of largest filling length in a
    representative of the class it creates.  Bars from the implicit reducer
    carry no cycle, so ``metric`` and ``params`` are needed to rebuild one.
    """
    if bar.dim == 1:
        if not bar.finite or bar.destroyer is None:
            raise NoAttribution(f"dim-1 bar born at {bar.birth} never dies; nothing kills it")
        return tuple(bar.destroyer)
    if bar.dim != 2:
        raise NoAttribution(f"only bars of dimension 1 and 2 have critical 2-simplices, got {bar.dim}")
    if metric is None:
        raise ValueError("ranking by filling length needs the metric")
    if bar.cycle is not None:
        cycle = bar.cycle
    elif params is not None:
        cycle = representative(bar, metric, params, diagram.p)
    else:
        raise ValueError("bar carries no cycle; pass params to rebuild one")
    creator = tuple(bar.creator)
    # ties prefer the creator, then the lexicographically first simplex
    return max(cycle, key=lambda s: (perimeter(metric, s), s == creator, tuple(-v for v in s)))


def simultaneous_deaths(diagram: PersistenceDiagram, bar: Bar, tol: float = 0.0) -> list[tuple]:
    """Destroyers of all dim-1 bars dying with ``bar`` (within ``tol``), the candidates
    when several loops close at the same scale."""
    if bar.dim != 1 or not bar.finite:
        raise NoAttribution("simultaneous deaths are only defined for finite dim-1 bars")
    return [tuple(b.destroyer) for b in diagram.in_dim(1)
            if b.finite and b.destroyer is not None and abs(b.death - bar.death) <= tol]


@dataclass(frozen=True)
class LocalizedLoop:
    triple: tuple
    paths: tuple
    length: float
    bar: Optional[Bar] = None

    def __post_init__(self):
        if len(self.paths) != 3:
            raise ValueError("a loop has three legs")
        for (u, v), leg in zip(_legs(self.triple), self.paths):
            if leg[0] != u or leg[-1] != v:
                raise ValueError(f"leg {leg} does not join {u} to {v}")

    @property
    def vertices(self) -> list[int]:
        """Point ids around the loop, without repeating leg endpoints."""
        out: list[int] = []
        for leg in self.paths:
            out.extend(leg[:-1])
        return out or [self.triple[0]]

    def summary(self) -> dict:
        rec = {"triple": list(map(int, self.triple)), "length": self.length,
               "paths": [list(map(int, leg)) for leg in self.paths]}
        if self.bar is not None:
            rec["bar"] = {"dim": self.bar.dim, "birth": self.bar.birth,
                          "death": self.bar.death if self.bar.finite else None,
                          "creator": list(self.bar.creator),
                          "destroyer": None if self.bar.destroyer is None else list(self.bar.destroyer)}
        return rec

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2)

    def to_csv(self, path, cloud: Optional[PointCloud] = None) -> None:
        """Point ids in loop order, with coordinates when a point cloud is known."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["id", "x", "y", "z"] if cloud is not None else ["id"])
            for v in self.vertices + [self.vertices[0]]:
                if cloud is not None:
                    w.writerow([v, *(repr(float(x)) for x in cloud.points[v])])
                else:
                    w.writerow([v])


def _legs(triple) -> list[tuple]:
    a, b, c = triple
    return [(a, b), (b, c), (c, a)]


def filling(metric: FiniteMetric, triple, bar: Optional[Bar] = None) -> LocalizedLoop:
    """Loop through the triple along shortest paths.

    Graph-geodesic metrics give paths through sample points.  Exact model
    metrics have no graph, and each leg is the single hop between its ends.
    """
    triple = tuple(int(v) for v in triple)
    if len(triple) != 3:
        raise ValueError(f"need a triple, got {triple}")
    paths = []
    for u, v in _legs(triple):
        if u == v:
            paths.append([u])
        elif metric.graph is not None:
            paths.append(metric.path(u, v))
        else:
            paths.append([u, v])
    return LocalizedLoop(triple, tuple(tuple(p) for p in paths), perimeter(metric, triple), bar)


def verify_loop(ctx: WindingContext, loop: LocalizedLoop) -> bool:
    """True iff the loop's defining triple winds once around the charted loop."""
    if len(set(loop.triple)) < 3:
        return False
    return is_circumventing(ctx, loop.triple)


def path_length(metric: FiniteMetric, loop: LocalizedLoop) -> float:
    """Length summed hop by hop; equals ``loop.length`` when the legs are geodesic."""
    return float(sum(metric.d[a, b] for leg in loop.paths for a, b in zip(leg, leg[1:])))
