import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis.extra.numpy import arrays

from pragma import grid as gr
from pragma.errors import ConfigError, GridMismatchError


class TestBuilders:
    def test_rectangular_row_major(self):
        g = gr.rectangular([(0, 1), (10, 12)], [2, 3])
        np.testing.assert_array_equal(
            g.points, [[0, 10], [0, 11], [0, 12], [1, 10], [1, 11], [1, 12]]
        )
        assert g.spacing == (1.0, 1.0)

    def test_simplex_sizes(self):
        assert len(gr.simplex(200)) == 20301
        assert len(gr.simplex(2)) == 6

    def test_simplex_points_on_simplex(self):
        g = gr.simplex(17)
        np.testing.assert_allclose(g.points.sum(axis=1), 1.0, atol=1e-15)
        assert g.points.min() >= 0.0

    def test_hardy_weinberg_curve(self):
        c = gr.curve("hardy-weinberg", 5)
        p = np.linspace(0, 1, 5)
        np.testing.assert_allclose(c.points[:, 0], p**2)
        np.testing.assert_allclose(c.points.sum(axis=1), 1.0, atol=1e-15)

    def test_points_are_read_only(self):
        g = gr.simplex(3)
        with pytest.raises(ValueError):
            g.points[0, 0] = 5.0

    @pytest.mark.parametrize(
        "geom",
        [
            {"type": "rectangular", "bounds": [[1, 0]], "counts": 3},
            {"type": "rectangular", "bounds": [[0, 1]], "counts": 1},
            {"type": "rectangular", "bounds": [[0, 1]] * 4, "counts": 3},
            {"type": "simplex", "resolution": 1},
            {"type": "curve", "name": "spiral"},
            {"type": "hexagonal"},
            {"type": "simplex", "resolution": 4, "extra": 1},
        ],
    )
    def test_bad_geometry(self, geom):
        with pytest.raises(ConfigError):
            gr.make_grid(geom)

    def test_make_grid_defaults(self):
        g = gr.make_grid({"type": "rectangular", "bounds": [[-1, 1]]})
        assert len(g) == 201
        assert len(gr.make_grid({"type": "curve", "name": "hardy-weinberg"})) == 500

    def test_geometry_round_trip(self):
        for g in (gr.simplex(5), gr.curve("diagonal", 7, lo=-2.0, hi=2.0), gr.rectangular([(0, 1)], 4)):
            assert gr.make_grid(g.to_config()).same_as(g)


class TestRegions:
    g = gr.rectangular([(0, 1)], 11)

    def region(self, lo, hi):
        return gr.region_from_predicate(self.g, lambda p: lo <= p[0] <= hi)

    def test_set_relations(self):
        a, b, c = self.region(0.2, 0.5), self.region(0.0, 0.6), self.region(0.7, 1.0)
        assert gr.subset(a, b) and not gr.subset(b, a)
        assert gr.disjoint(a, c)
        assert (a | c).count == a.count + c.count
        assert (a & b) == a
        assert gr.union([a, c]) == a | c
        assert gr.intersection([a, b]) == a

    def test_full_and_empty(self):
        assert gr.full(self.g).count == 11
        assert gr.empty(self.g).is_empty()
        assert gr.full(self.g).complement() == gr.empty(self.g)

    def test_vectorized_predicate(self):
        r = gr.region_from_predicate(self.g, lambda pts: pts[:, 0] > 0.45, vectorized=True)
        assert r == self.region(0.5, 1.0)

    def test_grid_mismatch(self):
        other = gr.rectangular([(0, 2)], 11)
        with pytest.raises(GridMismatchError):
            gr.subset(gr.full(self.g), gr.full(other))

    def test_mask_length_checked(self):
        with pytest.raises(GridMismatchError):
            gr.GridRegion(self.g, np.ones(3, dtype=bool))

    def test_equal_grids_built_twice_are_compatible(self):
        a = gr.full(gr.simplex(4))
        b = gr.empty(gr.simplex(4))
        assert gr.disjoint(a, b)

    @given(arrays(bool, 11), arrays(bool, 11))
    @settings(max_examples=50)
    def test_de_morgan(self, m1, m2):
        a, b = gr.GridRegion(self.g, m1), gr.GridRegion(self.g, m2)
        assert (a | b).complement() == a.complement() & b.complement()
        assert gr.subset(a & b, a)
        assert gr.disjoint(a, b) == (a & b).is_empty()


class TestExport:
    def test_csv_layout(self):
        g = gr.simplex(2)
        r = gr.region_from_predicate(g, lambda p: p[0] >= 0.5)
        lines = gr.region_csv(r).splitlines()
        assert lines[0] == "theta1,theta2,theta3,member"
        assert lines[1] == "0.0,0.0,1.0,0"
        assert len(lines) == 7

    def test_csv_round_trip(self, tmp_path):
        g = gr.rectangular([(0, 1), (0, 1)], [5, 4])
        r = gr.region_from_predicate(g, lambda p: p[0] + p[1] < 1)
        gr.write_region(r, tmp_path / "r.csv", tmp_path / "r.json")
        back = gr.read_region_csv(tmp_path / "r.csv")
        np.testing.assert_array_equal(back.points, r.points)
        np.testing.assert_array_equal(back.mask, r.mask)
        doc = json.loads((tmp_path / "r.json").read_text())
        assert doc["member_count"] == r.count and doc["n_points"] == 20

    def test_csv_is_deterministic(self):
        g = gr.rectangular([(-1, 1)], 101)
        r = gr.region_from_predicate(g, lambda p: abs(p[0]) < 0.3)
        assert gr.region_csv(r) == gr.region_csv(gr.GridRegion(g, r.mask.copy()))

    def test_read_rejects_other_csv(self, tmp_path):
        p = tmp_path / "x.csv"
        p.write_text("a,b\n1,2\n")
        with pytest.raises(ConfigError):
            gr.read_region_csv(p)
