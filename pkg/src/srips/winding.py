"""Winding numbers of oriented triples on charted model spaces.

A chart gives every point an angle along a reference loop of circumference
``c``.  The geodesic between two points in a band around the loop moves the
angle by the signed shorter arc, so the filling of a triple winds
``(s12 + s23 + s31) / c`` times around the loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from srips.errors import IllDefined
from srips.metric import FiniteMetric, WindingContext
from srips.persistence import Chain


@dataclass(frozen=True)
class OrientedTriple:
    """Three point ids; the cyclic order is the orientation."""

    a: int
    b: int
    c: int

    def __post_init__(self):
        if len({self.a, self.b, self.c}) != 3:
            raise ValueError(f"triple ids must be distinct, got {(self.a, self.b, self.c)}")

    def __iter__(self):
        return iter((self.a, self.b, self.c))

    def reversed(self) -> "OrientedTriple":
        return OrientedTriple(self.b, self.a, self.c)


@dataclass(frozen=True)
class WindingResult:
    k: int
    well_defined: bool = True


def _shorter_arc(t1: float, t2: float, c: float) -> float:
    s = math.fmod(t2 - t1, c)
    if s > c / 2:
        s -= c
    elif s < -c / 2:
        s += c
    if abs(s) == c / 2:
        raise IllDefined(f"points at angles {t1} and {t2} are antipodal on a loop of length {c}")
    return s


def _winding(angles: Sequence[float], c: float, i: int, j: int, k: int) -> int:
    ti, tj, tk = angles[i], angles[j], angles[k]
    total = _shorter_arc(ti, tj, c) + _shorter_arc(tj, tk, c) + _shorter_arc(tk, ti, c)
    w = round(total / c)
    # each arc is below c/2 so the sum is within 3c/2 of zero; rounding slop only
    if abs(total - w * c) > 1e-9 * c:
        raise ArithmeticError(f"arc sum {total} is not a multiple of {c}")
    return int(w)


def _check_diameter(metric: Optional[FiniteMetric], ids: Sequence[int], c: float) -> None:
    if metric is None:
        return
    diam = max(metric.d[i, j] for i, j in combinations(ids, 2))
    if diam >= c / 2:
        raise IllDefined(f"diameter {diam} of {tuple(ids)} is not below c/2 = {c / 2}")


def winding_triple(
    ctx: WindingContext,
    t,
    metric: Optional[FiniteMetric] = None,
    strict: bool = True,
) -> WindingResult:
    """Winding number of the filling of ``t``.

    With ``metric`` given, the triple's diameter must stay below ``c/2``.
    ``strict=False`` reports an undefined winding as ``well_defined=False``
    instead of raising.
    """
    t = t if isinstance(t, OrientedTriple) else OrientedTriple(*t)
    try:
        _check_diameter(metric, tuple(t), ctx.circumference)
        return WindingResult(_winding(ctx.angles, ctx.circumference, t.a, t.b, t.c))
    except IllDefined:
        if strict:
            raise
        return WindingResult(0, well_defined=False)


def is_circumventing(ctx: WindingContext, t, metric: Optional[FiniteMetric] = None) -> bool:
    return abs(winding_triple(ctx, t, metric).k) == 1


def winding_chain(
    ctx: WindingContext,
    chain: Chain,
    membership: Optional[Callable[[int], bool]] = None,
) -> int:
    """Sum of coefficient times winding over the 2-simplices lying in the region.

    Each term is read with the orientation of its key.  Coefficients are taken
    as integers; use integer chains (``p == 0``) when signs matter.
    """
    angles = ctx.angles.tolist() if isinstance(ctx.angles, np.ndarray) else ctx.angles
    c = ctx.circumference
    total = 0
    for s, coef in chain.items():
        if len(s) != 3:
            raise ValueError(f"winding is defined on 2-chains, got simplex {s}")
        if membership is not None and not all(membership(v) for v in s):
            continue
        total += coef * _winding(angles, c, *s)
    return total


@dataclass(frozen=True)
class QuadrupleReport:
    faces: tuple
    windings: tuple
    total: int
    circumventing: int

    @property
    def ok(self) -> bool:
        return self.total == 0 and self.circumventing in (0, 2, 4)


def quadruple_faces(x1: int, x2: int, x3: int, x4: int) -> tuple:
    """Oriented boundary faces of <x1, x2, x3, x4>."""
    return ((x2, x3, x4), (x3, x1, x4), (x1, x2, x4), (x2, x1, x3))


def check_quadruple(ctx: WindingContext, ids: Sequence[int], metric: Optional[FiniteMetric] = None) -> QuadrupleReport:
    if len(set(ids)) != 4:
        raise ValueError(f"need four distinct ids, got {tuple(ids)}")
    _check_diameter(metric, ids, ctx.circumference)
    faces = quadruple_faces(*ids)
    ws = tuple(_winding(ctx.angles, ctx.circumference, *f) for f in faces)
    return QuadrupleReport(faces, ws, sum(ws), sum(1 for w in ws if abs(w) == 1))


def admissible(
    ctx: WindingContext,
    metric: FiniteMetric,
    ids: Iterable[int],
    membership: Optional[Callable[[int], bool]] = None,
) -> bool:
    """Whether a simplex meets the winding preconditions: distinct ids, inside the region,
    diameter below ``c/2`` and no antipodal pair."""
    ids = tuple(ids)
    if len(set(ids)) != len(ids):
        return False
    if membership is not None and not all(membership(v) for v in ids):
        return False
    c = ctx.circumference
    for i, j in combinations(ids, 2):
        if metric.d[i, j] >= c / 2:
            return False
        if abs(math.fmod(abs(ctx.angles[i] - ctx.angles[j]), c) - c / 2) == 0.0:
            return False
    return True


def winding_triples(ctx: WindingContext, triples: np.ndarray) -> np.ndarray:
    """Vectorized :func:`winding_triple` over rows of an ``(m, 3)`` id array."""
    t = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    c = ctx.circumference
    ang = ctx.angles[t]
    total = np.zeros(len(t))
    for i, j in ((0, 1), (1, 2), (2, 0)):
        s = np.fmod(ang[:, j] - ang[:, i], c)
        s = np.where(s > c / 2, s - c, np.where(s < -c / 2, s + c, s))
        if np.any(np.abs(s) == c / 2):
            raise IllDefined("some pair of points is antipodal")
        total += s
    return np.rint(total / c).astype(np.int64)
