from itertools import combinations

import numpy as np
import pytest

from oracles import cluster_oracle, random_metric, selective_values
from srips.complex import (
    FiltrationParams,
    ScaleMap,
    build_filtration,
    cluster_value,
    filtration_value,
    lex_code,
)
from srips.errors import CombinatorialBudget, MemoryBudget, OutOfRange
from srips.metric import FiniteMetric


def metric_from_edges(n, default, edges):
    d = np.full((n, n), float(default))
    np.fill_diagonal(d, 0.0)
    for (i, j), v in edges.items():
        d[i, j] = d[j, i] = v
    return FiniteMetric(d)


def collinear(xs):
    x = np.asarray(xs, dtype=float)
    return FiniteMetric(np.abs(x[:, None] - x[None, :]))


class TestScaleMap:
    def test_linear(self):
        b = ScaleMap.parse("0.3r")
        assert b(2.0) == pytest.approx(0.6)
        assert b.inverse(0.6) == pytest.approx(2.0)

    def test_mixed(self):
        b = ScaleMap.parse("min(r, 0.7+0.3r)")
        assert b(0.5) == pytest.approx(0.5)
        assert b(1.0) == pytest.approx(1.0)
        assert b(2.0) == pytest.approx(1.3)
        assert b.inverse(1.3) == pytest.approx(2.0)
        assert b.inverse(0.4) == pytest.approx(0.4)

    def test_round_trip_through_describe(self):
        for text in ("r", "0.3r", "min(r, 0.7+0.3r)"):
            m = ScaleMap.parse(text)
            assert ScaleMap.parse(m.describe()) == m
        m = ScaleMap(((0.0, 0.0), (1.0, 0.5), (2.0, 2.0)))
        assert ScaleMap.parse(m.describe()) == m

    @pytest.mark.parametrize("bad", ["0", "q", "min(r, 5)"])
    def test_rejects(self, bad):
        with pytest.raises(ValueError):
            ScaleMap.parse(bad)

    def test_params_require_a_above_b(self):
        with pytest.raises(ValueError):
            FiltrationParams(a="0.3r", b="r", r_max=2.0)
        with pytest.raises(ValueError):
            FiltrationParams(r_max=0.0)


class TestClusterValue:
    def test_small_sets_are_zero(self):
        m = collinear([0, 1, 5])
        assert cluster_value((0, 1, 2), 2, m) == 0.0
        assert cluster_value((0,), 2, m) == 0.0

    def test_collinear_four(self):
        assert cluster_value((0, 1, 2, 3), 2, collinear([0, 1, 2, 3])) == 1.0

    def test_four_is_min_pairwise(self, rng):
        for _ in range(20):
            m = FiniteMetric(random_metric(rng, 4))
            d = m.d
            assert cluster_value((0, 1, 2, 3), 2, m) == min(d[i, j] for i, j in combinations(range(4), 2))

    @pytest.mark.parametrize("k", [4, 5, 6])
    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_oracle(self, rng, k, n):
        for _ in range(15):
            m = FiniteMetric(random_metric(rng, k, kind="graph"))
            assert cluster_value(tuple(range(k)), n, m) == cluster_oracle(list(range(k)), n, m.d)

    def test_budget(self):
        m = collinear(range(20))
        with pytest.raises(CombinatorialBudget):
            cluster_value(tuple(range(20)), 2, m)

    def test_below_diameter(self, rng):
        m = FiniteMetric(random_metric(rng, 6))
        for k in range(1, 7):
            for vs in combinations(range(6), k):
                diam = max((m.d[i, j] for i, j in combinations(vs, 2)), default=0.0)
                assert cluster_value(vs, 2, m) <= diam


class TestFiltrationValue:
    params = FiltrationParams(a="r", b="0.3r", n=2, max_dim=3, r_max=4.0)

    def test_triangle(self):
        m = metric_from_edges(3, 2.0, {(0, 1): 1.0})
        assert filtration_value((0, 1, 2), self.params, m) == 2.0

    def test_tetrahedron_small_min_edge(self):
        m = metric_from_edges(4, 2.0, {(0, 1): 0.5})
        assert filtration_value((0, 1, 2, 3), self.params, m) == pytest.approx(2.0)

    def test_tetrahedron_large_min_edge(self):
        m = metric_from_edges(4, 2.0, {(0, 1): 0.9})
        assert filtration_value((0, 1, 2, 3), self.params, m) == pytest.approx(3.0)

    def test_out_of_range(self):
        m = metric_from_edges(4, 2.0, {(0, 1): 0.9})
        with pytest.raises(OutOfRange):
            filtration_value((0, 1, 2, 3), FiltrationParams(a="r", b="0.3r", r_max=2.5), m)

    def test_preconditions(self):
        m = metric_from_edges(5, 1.0, {})
        with pytest.raises(ValueError):
            filtration_value((0, 0, 1), self.params, m)
        with pytest.raises(ValueError):
            filtration_value((0, 1, 2, 3, 4), self.params, m)


class TestBuild:
    def test_two_points(self):
        f = build_filtration(collinear([0, 1]), FiltrationParams.rips(2.0, max_dim=1))
        assert [(s.vertices, s.value) for s in f] == [((0,), 0.0), ((1,), 0.0), ((0, 1), 1.0)]

    def test_equidistant_tetrahedron(self):
        m = metric_from_edges(4, 1.0, {})
        f = build_filtration(m, FiltrationParams(a="r", b="0.3r", n=2, max_dim=3, r_max=4.0))
        assert f.counts() == {0: 4, 1: 6, 2: 4, 3: 1}
        for s in f:
            if s.dim in (1, 2):
                assert s.value == 1.0
        tet = f[f.index[(0, 1, 2, 3)]]
        assert tet.value == pytest.approx(1 / 0.3)
        assert f[len(f) - 1] is tet

    def test_truncation_drops_tetrahedron(self):
        m = metric_from_edges(4, 1.0, {})
        f = build_filtration(m, FiltrationParams(a="r", b="0.3r", n=2, max_dim=3, r_max=3.0))
        assert (0, 1, 2, 3) not in f.index

    @pytest.mark.parametrize("kind", ["euclid", "graph"])
    def test_matches_brute_force(self, rng, kind):
        for _ in range(10):
            d = random_metric(rng, 7, kind)
            m = FiniteMetric(d)
            for b in ("0.3r", "min(r, 0.2+0.5r)", "r"):
                params = FiltrationParams(a="r", b=b, n=2, max_dim=3, r_max=float(d.max()) * 0.8)
                f = build_filtration(m, params)
                want = selective_values(d, params.a.inverse, params.b.inverse, 2, 3, params.r_max)
                got = {s.vertices: s.value for s in f}
                assert got.keys() == want.keys()
                for s, v in want.items():
                    assert got[s] == pytest.approx(v, abs=1e-12)

    def test_order_and_face_monotonicity(self, rng):
        m = FiniteMetric(random_metric(rng, 9, "graph"))
        f = build_filtration(m, FiltrationParams(a="r", b="0.4r", r_max=2.0))
        keys = [(s.value, s.dim, s.diameter, s.filling, s.vertices) for s in f]
        assert keys == sorted(keys)
        for pos, s in enumerate(f):
            for i in range(len(s.vertices) if s.dim else 0):
                face = s.vertices[:i] + s.vertices[i + 1:]
                j = f.index[face]
                assert j < pos and f[j].value <= s.value

    def test_skeleton_and_degenerate_identity(self, rng):
        for _ in range(10):
            m = FiniteMetric(random_metric(rng, 8))
            r_max = float(m.d.max())
            rips = build_filtration(m, FiltrationParams.rips(r_max))
            for s in (0.1, 0.3, 0.7):
                sel = build_filtration(m, FiltrationParams(a="r", b=f"{s}r", r_max=r_max))
                low = [x for x in sel if x.dim <= 2]
                assert low == [x for x in rips if x.dim <= 2]
            same = build_filtration(m, FiltrationParams(a="r", b="r", r_max=r_max))
            assert same.simplices == rips.simplices

    def test_monotone_in_s(self, rng):
        m = FiniteMetric(random_metric(rng, 7))
        r_max = 50.0
        values = []
        for s in (0.2, 0.4, 0.6, 0.8, 1.0):
            f = build_filtration(m, FiltrationParams(a="r", b=f"{s}r", r_max=r_max))
            values.append({x.vertices: x.value for x in f})
        for lo, hi in zip(values, values[1:]):
            assert lo.keys() == hi.keys()
            assert all(hi[k] <= lo[k] for k in lo)

    def test_budget(self, rng):
        m = FiniteMetric(random_metric(rng, 12))
        with pytest.raises(MemoryBudget):
            build_filtration(m, FiltrationParams.rips(10.0), max_simplices=50)

    def test_export(self, tmp_path):
        m = metric_from_edges(4, 1.0, {(0, 1): 0.5})
        f = build_filtration(m, FiltrationParams(a="r", b="0.3r", r_max=4.0))
        f.export(tmp_path / "f.txt")
        rows = [line.split() for line in (tmp_path / "f.txt").read_text().splitlines()]
        assert len(rows) == len(f)
        last = rows[-1]
        assert last[1] == "3" and last[2:6] == ["0", "1", "2", "3"]
        assert float(last[0]) == pytest.approx(0.5 / 0.3)
        assert float(last[7]) == 0.5

    def test_lex_code(self):
        assert lex_code((1, 2, 3), 10) == 123
