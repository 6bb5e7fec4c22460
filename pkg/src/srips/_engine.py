"""Implicit persistent cohomology for selective Rips filtrations with n = 2 and max_dim <= 3.

Simplices are never materialized beyond the columns of one dimension.  A
simplex is identified by the base-``n`` code of its sorted vertices, which
also realizes the lexicographic tie-break.  Filtration keys are
``(value, diameter, filling, code)`` and agree bit-for-bit with
:func:`srips.complex.build_filtration`.

Columns of the coboundary matrix are processed in reverse filtration order
and the pivot of a column is its earliest cofacet, so every pair found here is
the same pair the standard homology reduction finds on the same order.
"""

from __future__ import annotations

import heapq

import numpy as np
from numba import njit
from numba.typed import Dict, List
from numba import types

INF = np.inf
STAT_NAMES = ("columns", "cleared", "apparent", "reduced", "additions", "entries")


@njit(cache=True)
def _decode(code, n, k, out):
    for i in range(k - 1, -1, -1):
        out[i] = code % n
        code //= n


@njit(cache=True)
def _key_less(v1, d1, f1, c1, v2, d2, f2, c2):
    if v1 != v2:
        return v1 < v2
    if d1 != d2:
        return d1 < d2
    if f1 != f2:
        return f1 < f2
    return c1 < c2


@njit(cache=True)
def _simplex_stats(vs, k, D, A, B, cluster):
    """(value, diameter, filling) of the sorted simplex ``vs[:k]``."""
    maxa = 0.0
    minb = INF
    diam = 0.0
    fill = 0.0
    for i in range(k):
        for j in range(i + 1, k):
            a = A[vs[i], vs[j]]
            if a > maxa:
                maxa = a
            d = D[vs[i], vs[j]]
            if d > diam:
                diam = d
            fill += d
            if B[vs[i], vs[j]] < minb:
                minb = B[vs[i], vs[j]]
    value = maxa
    if k == 4 and cluster and minb > value:
        value = minb
    return value, diam, fill


@njit(cache=True)
def _cofacets(vs, k, n, D, A, B, cluster, r_max, indptr, indices, base_maxa, base_minb,
              o_val, o_diam, o_fill, o_code, o_sign, work):
    """Enumerate cofacets of the sorted k-simplex ``vs``; returns their count."""
    cnt = 0
    v0 = vs[0]
    for p in range(indptr[v0], indptr[v0 + 1]):
        w = indices[p]
        skip = False
        maxa = base_maxa
        minb = base_minb
        for i in range(k):
            if vs[i] == w:
                skip = True
                break
            a = A[vs[i], w]
            if a == INF:
                skip = True
                break
            if a > maxa:
                maxa = a
            if B[vs[i], w] < minb:
                minb = B[vs[i], w]
        if skip:
            continue
        value = maxa
        if k + 1 == 4 and cluster and minb > value:
            value = minb
        if value > r_max:
            continue
        pos = 0
        while pos < k and vs[pos] < w:
            pos += 1
        for i in range(pos):
            work[i] = vs[i]
        work[pos] = w
        for i in range(pos, k):
            work[i + 1] = vs[i]
        diam = 0.0
        fill = 0.0
        code = 0
        for i in range(k + 1):
            code = code * n + work[i]
            for j in range(i + 1, k + 1):
                d = D[work[i], work[j]]
                if d > diam:
                    diam = d
                fill += d
        o_val[cnt] = value
        o_diam[cnt] = diam
        o_fill[cnt] = fill
        o_code[cnt] = code
        o_sign[cnt] = 1 if pos % 2 == 0 else -1
        cnt += 1
    return cnt


@njit(cache=True)
def _min_cofacet(vs, k, n, D, A, B, cluster, r_max, base_maxa, base_minb, base_diam, work, scratch):
    """Earliest cofacet of the sorted k-simplex ``vs``: (value, diam, fill, code, sign); code -1 if none.

    Dense passes over whole rows: first the least value, then the least diameter
    among those, then a rounded filling; exact keys are only formed for the few
    survivors so the tie-break stays bit-identical to the explicit filtration.
    """
    a0 = A[vs[0]]
    a1 = A[vs[1]]
    a2 = A[vs[k - 1]]
    b0 = B[vs[0]]
    b1 = B[vs[1]]
    b2 = B[vs[k - 1]]
    top = k + 1 == 4 and cluster
    bestv = INF
    for w in range(n):
        v = max(max(base_maxa, a0[w]), max(a1[w], a2[w]))
        if top:
            v = max(v, min(min(base_minb, b0[w]), min(b1[w], b2[w])))
        scratch[w] = v
        bestv = min(bestv, v)
    if bestv > r_max:
        return INF, INF, INF, np.int64(-1), 0
    d0 = D[vs[0]]
    d1 = D[vs[1]]
    d2 = D[vs[k - 1]]
    bestd = INF
    bestf = INF
    for w in range(n):
        if scratch[w] != bestv:
            continue
        dm = max(max(base_diam, d0[w]), max(d1[w], d2[w]))
        f = d0[w] + d1[w] + d2[w] if k == 3 else d0[w] + d1[w]
        if dm < bestd or (dm == bestd and f < bestf):
            bestd = dm
            bestf = f
    tol = 1e-9 * (1.0 + bestf)
    bv = INF
    bd = INF
    bf = INF
    bc = np.int64(-1)
    bs = 0
    for w in range(n):
        if scratch[w] != bestv:
            continue
        dm = max(max(base_diam, d0[w]), max(d1[w], d2[w]))
        if dm != bestd:
            continue
        f = d0[w] + d1[w] + d2[w] if k == 3 else d0[w] + d1[w]
        if f > bestf + tol:
            continue
        pos = 0
        while pos < k and vs[pos] < w:
            pos += 1
        for i in range(pos):
            work[i] = vs[i]
        work[pos] = w
        for i in range(pos, k):
            work[i + 1] = vs[i]
        fill = 0.0
        code = np.int64(0)
        for i in range(k + 1):
            code = code * n + work[i]
            for j in range(i + 1, k + 1):
                fill += D[work[i], work[j]]
        if bc < 0 or _key_less(bestv, dm, fill, code, bv, bd, bf, bc):
            bv = bestv
            bd = dm
            bf = fill
            bc = code
            bs = 1 if pos % 2 == 0 else -1
    return bv, bd, bf, bc, bs


@njit(cache=True)
def _inv(a, p):
    # p is prime; Fermat inverse
    r = 1
    e = p - 2
    b = a % p
    while e > 0:
        if e & 1:
            r = r * b % p
        b = b * b % p
        e >>= 1
    return r


@njit(cache=True)
def _pop_pivot(heap, p):
    """Earliest entry of the working column with a nonzero summed coefficient, left on top."""
    while len(heap) > 0:
        top = heapq.heappop(heap)
        coef = top[4]
        while len(heap) > 0 and heap[0][3] == top[3]:
            coef += heapq.heappop(heap)[4]
        coef %= p
        if coef != 0:
            entry = (top[0], top[1], top[2], top[3], coef)
            heapq.heappush(heap, entry)
            return entry
    return (INF, INF, INF, np.int64(-1), np.int64(0))


@njit(cache=True)
def _zero_dim(n, codes, vals):
    """Union-find with the elder rule over edges in filtration order.

    Returns (dying vertex, killing edge code, death value) triples.
    """
    parent = np.arange(n)
    out_vertex = []
    out_edge = []
    out_death = []
    for t in range(len(codes)):
        ru = codes[t] // n
        while parent[ru] != ru:
            parent[ru] = parent[parent[ru]]
            ru = parent[ru]
        rv = codes[t] % n
        while parent[rv] != rv:
            parent[rv] = parent[parent[rv]]
            rv = parent[rv]
        if ru == rv:
            continue
        # roots are the oldest vertices: all vertices enter at 0, ordered by id
        young, old = (ru, rv) if ru > rv else (rv, ru)
        parent[young] = old
        out_vertex.append(young)
        out_edge.append(codes[t])
        out_death.append(vals[t])
    return out_vertex, out_edge, out_death


@njit(cache=True)
def _enumerate(k, n, D, A, B, cluster, r_max, floor, indptr, indices):
    """All sorted k-vertex simplices with floor <= value <= r_max, as codes and keys."""
    codes = []
    vals = []
    dias = []
    fills = []
    vs = np.empty(4, dtype=np.int64)
    if k == 2:
        for i in range(n):
            for q in range(indptr[i], indptr[i + 1]):
                j = indices[q]
                if j > i and A[i, j] >= floor:
                    codes.append(i * n + j)
                    vals.append(A[i, j])
                    dias.append(D[i, j])
                    fills.append(0.0 + D[i, j])
    elif k == 3:
        for i in range(n):
            for q in range(indptr[i], indptr[i + 1]):
                j = indices[q]
                if j <= i:
                    continue
                for s in range(q + 1, indptr[i + 1]):
                    l = indices[s]
                    if A[j, l] == INF:
                        continue
                    vs[0] = i
                    vs[1] = j
                    vs[2] = l
                    v, d, f = _simplex_stats(vs, 3, D, A, B, cluster)
                    if v >= floor and v <= r_max:
                        codes.append((i * n + j) * n + l)
                        vals.append(v)
                        dias.append(d)
                        fills.append(f)
    return np.array(codes, dtype=np.int64), np.array(vals), np.array(dias), np.array(fills)


@njit(cache=True)
def _cohomology(k, n, D, A, B, cluster, r_max, indptr, indices, p,
                codes, vals, dias, fills, cleared):
    """Reduce the coboundary columns of k-vertex simplices (given in ascending key order).

    ``A`` must carry ``inf`` on its diagonal so that a simplex is never its own cofacet.

    Returns pairs (column code, pivot code, pivot value) with pivot -1 for essential columns,
    plus the codes of all pivots (for clearing the next dimension).
    """
    m = len(codes)
    deg = indptr[1:] - indptr[:-1]
    cap = deg.max() + 1 if n > 0 else 1
    o_val = np.empty(cap)
    o_diam = np.empty(cap)
    o_fill = np.empty(cap)
    o_code = np.empty(cap, dtype=np.int64)
    o_sign = np.empty(cap, dtype=np.int64)
    work = np.empty(5, dtype=np.int64)
    vs = np.empty(4, dtype=np.int64)
    vs2 = np.empty(4, dtype=np.int64)
    scratch = np.empty(n)

    pivot_slot = Dict.empty(key_type=types.int64, value_type=types.int64)
    slot_col = List.empty_list(types.int64)
    slot_coef = List.empty_list(types.int64)
    slot_start = List.empty_list(types.int64)
    slot_len = List.empty_list(types.int64)
    v_code = List.empty_list(types.int64)
    v_coef = List.empty_list(types.int64)

    out_col = List.empty_list(types.int64)
    out_piv = List.empty_list(types.int64)
    out_birth = List.empty_list(types.float64)
    out_death = List.empty_list(types.float64)

    # counters in STAT_NAMES order
    stats = np.zeros(6, dtype=np.int64)
    for t in range(m - 1, -1, -1):
        col = codes[t]
        stats[0] += 1
        if col in cleared:
            stats[1] += 1
            continue
        _decode(col, n, k, vs)
        base_maxa = vals[t]
        base_minb = INF
        for i in range(k):
            for j in range(i + 1, k):
                if B[vs[i], vs[j]] < base_minb:
                    base_minb = B[vs[i], vs[j]]
        bv, bd, bf, bc, bs = _min_cofacet(vs, k, n, D, A, B, cluster, r_max,
                                          base_maxa, base_minb, dias[t], work, scratch)
        if bc < 0:
            out_col.append(col)
            out_piv.append(-1)
            out_birth.append(vals[t])
            out_death.append(INF)
            continue
        if bc not in pivot_slot:
            # already reduced: the earliest cofacet is a fresh pivot
            stats[2] += 1
            pivot_slot[bc] = len(slot_col)
            slot_col.append(col)
            slot_coef.append(bs % p)
            slot_start.append(len(v_code))
            slot_len.append(1)
            v_code.append(col)
            v_coef.append(1)
            out_col.append(col)
            out_piv.append(bc)
            out_birth.append(vals[t])
            out_death.append(bv)
            continue
        stats[3] += 1
        cnt = _cofacets(vs, k, n, D, A, B, cluster, r_max, indptr, indices, base_maxa, base_minb,
                        o_val, o_diam, o_fill, o_code, o_sign, work)
        heap = [(o_val[0], o_diam[0], o_fill[0], o_code[0], o_sign[0] % p)]
        heap.pop()
        for c in range(cnt):
            heap.append((o_val[c], o_diam[c], o_fill[c], o_code[c], o_sign[c] % p))
        heapq.heapify(heap)
        red = Dict.empty(key_type=types.int64, value_type=types.int64)
        red[col] = 1
        while True:
            piv = _pop_pivot(heap, p)
            if piv[3] < 0:
                break
            if piv[3] not in pivot_slot:
                break
            s = pivot_slot[piv[3]]
            stats[4] += 1
            # the added coboundary vanishes below its pivot and cancels the pivot itself,
            # and the working column has nothing below the pivot either
            heapq.heappop(heap)
            factor = (p - piv[4]) * _inv(slot_coef[s], p) % p
            for q in range(slot_start[s], slot_start[s] + slot_len[s]):
                sc = v_code[q]
                coef = v_coef[q] * factor % p
                red[sc] = (red.get(sc, 0) + coef) % p
                _decode(sc, n, k, vs2)
                bm = 0.0
                bb = INF
                for i in range(k):
                    for j in range(i + 1, k):
                        if A[vs2[i], vs2[j]] > bm:
                            bm = A[vs2[i], vs2[j]]
                        if B[vs2[i], vs2[j]] < bb:
                            bb = B[vs2[i], vs2[j]]
                c2 = _cofacets(vs2, k, n, D, A, B, cluster, r_max, indptr, indices, bm, bb,
                               o_val, o_diam, o_fill, o_code, o_sign, work)
                for c in range(c2):
                    if not _key_less(piv[0], piv[1], piv[2], piv[3],
                                     o_val[c], o_diam[c], o_fill[c], o_code[c]):
                        continue
                    stats[5] += 1
                    heapq.heappush(heap, (o_val[c], o_diam[c], o_fill[c], o_code[c],
                                          (o_sign[c] * coef) % p))
        if piv[3] < 0:
            out_col.append(col)
            out_piv.append(-1)
            out_birth.append(vals[t])
            out_death.append(INF)
            continue
        pivot_slot[piv[3]] = len(slot_col)
        slot_col.append(col)
        slot_coef.append(piv[4])
        slot_start.append(len(v_code))
        ln = 0
        for sc, cf in red.items():
            if cf != 0:
                v_code.append(sc)
                v_coef.append(cf)
                ln += 1
        slot_len.append(ln)
        out_col.append(col)
        out_piv.append(piv[3])
        out_birth.append(vals[t])
        out_death.append(piv[0])

    pivots = np.empty(len(pivot_slot), dtype=np.int64)
    i = 0
    for key in pivot_slot.keys():
        pivots[i] = key
        i += 1
    return out_col, out_piv, out_birth, out_death, pivots, stats


def neighbor_csr(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    finite = np.isfinite(A)
    np.fill_diagonal(finite, False)
    rows, cols = np.nonzero(finite)
    indptr = np.zeros(A.shape[0] + 1, dtype=np.int64)
    np.add.at(indptr, rows + 1, 1)
    return np.cumsum(indptr), cols.astype(np.int64)


def sorted_columns(k, n, D, A, B, cluster, r_max, floor, indptr, indices):
    codes, vals, dias, fills = _enumerate(k, n, D, A, B, cluster, r_max, floor, indptr, indices)
    order = np.lexsort((codes, fills, dias, vals))
    return codes[order], vals[order], dias[order], fills[order]


def run(D, A, B, cluster, r_max, max_dim, p, floor_top=-np.inf, stats=None):
    """Bars ``(dim, creator code, destroyer code or -1, birth, death)``; zero-length pairs dropped.

    With ``floor_top`` set, the top dimension only reports bars born at or after it.
    Per-dimension work counters go into ``stats`` when a dict is given.
    """
    n = D.shape[0]
    A = A.copy()
    np.fill_diagonal(A, INF)
    indptr, indices = neighbor_csr(A)
    out = []
    ecodes, evals, _, _ = sorted_columns(2, n, D, A, B, cluster, r_max, -np.inf, indptr, indices)
    verts, edges, deaths = _zero_dim(n, ecodes, evals)
    killed = set(verts)
    if max_dim >= 1:
        for v, e, dv in zip(verts, edges, deaths):
            if dv > 0.0:
                out.append((0, int(v), int(e), 0.0, float(dv)))
        for v in range(n):
            if v not in killed:
                out.append((0, v, -1, 0.0, np.inf))
    cleared = Dict.empty(key_type=types.int64, value_type=types.int64)
    for e in edges:
        cleared[e] = 1
    for k in range(2, max_dim + 1):
        floor = floor_top if k == max_dim else -np.inf
        codes, vals, dias, fills = sorted_columns(k, n, D, A, B, cluster, r_max, floor, indptr, indices)
        cols, pivs, bths, dths, pivots, counts = _cohomology(k, n, D, A, B, cluster, r_max, indptr, indices, p,
                                                     codes, vals, dias, fills, cleared)
        for c, pv, bv, dv in zip(cols, pivs, bths, dths):
            if pv < 0 or dv > bv:
                out.append((k - 1, int(c), int(pv), float(bv), float(dv)))
        if stats is not None:
            stats[k - 1] = dict(zip(STAT_NAMES, (int(x) for x in counts)))
        cleared = Dict.empty(key_type=types.int64, value_type=types.int64)
        for c in pivots:
            cleared[c] = 1
    return out
