import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from pragma import grid as gr
from pragma import pragmatic as pg
from pragma.dissimilarity import DissimilaritySpec
from pragma.errors import ConfigError, DomainError, UnsupportedKindError
from pragma.family import (
    BivariateGaussianIso,
    Gaussian1DUnknownVar,
    GaussianKnownVar,
    TrinomialCounts,
    replicate,
)

GAUSS = GaussianKnownVar.univariate(1.0)
LINE = gr.rectangular([(-2.0, 2.0)], 801)


def pspec(family, kind, eps, **kw):
    return pg.PragmaticSpec(family, DissimilaritySpec(kind, **kw), eps)


def tiny_hw(kind, eps, m=5, res=30, knots=60):
    spec = pspec(TrinomialCounts(m), kind, eps)
    return spec, gr.curve("hardy-weinberg", knots), gr.simplex(res)


class TestSpec:
    def test_epsilon_must_be_positive(self):
        with pytest.raises(ConfigError):
            pspec(GAUSS, "KL", 0.0)

    def test_cd_cap(self):
        with pytest.raises(ConfigError):
            pspec(GAUSS, "CD", 0.5)

    def test_config_round_trip(self):
        s = pspec(TrinomialCounts(20), "BP", 0.1)
        assert pg.pragmatic_from_config(s.to_config()) == s

    def test_missing_field(self):
        with pytest.raises(ConfigError, match="epsilon"):
            pg.pragmatic_from_config({"family": {"kind": "gauss1d"}, "dissimilarity": "KL"})


class TestGaussianIntervals:
    def test_closed_form_values(self):
        assert pg.gaussian_interval(0.0, 2.0, "BP", 0.1) == pytest.approx((-0.2, 0.2))
        assert pg.gaussian_interval(1.0, 1.0, "KL", 0.5) == pytest.approx((0.0, 2.0))
        lo, hi = pg.gaussian_interval(0.0, 1.0, "CD", 0.1)
        assert hi == pytest.approx(2 * stats.norm.ppf(0.6), rel=1e-14)

    def test_cd_bound(self):
        with pytest.raises(DomainError):
            pg.gaussian_interval(0.0, 1.0, "CD", 0.5)

    @pytest.mark.parametrize("kind", ["KL", "BP", "CD"])
    @pytest.mark.parametrize("eps", [0.01, 0.1, 0.3])
    def test_grid_region_matches_interval(self, kind, eps):
        spec = pspec(GAUSS, kind, eps)
        region = pg.singleton_region(spec, [0.25], LINE)
        lo, hi = pg.gaussian_interval(0.25, 1.0, kind, eps)
        pts = region.points[:, 0]
        h = LINE.spacing[0]
        assert abs(pts.min() - lo) <= h and abs(pts.max() - hi) <= h
        expected = (LINE.points[:, 0] >= lo - 1e-12) & (LINE.points[:, 0] <= hi + 1e-12)
        assert np.count_nonzero(region.mask != expected) <= 2

    def test_boundary_point_kept(self):
        # 0.1 lies on the grid and is exactly the BP endpoint for eps = 0.1
        g = gr.rectangular([(-1.0, 1.0)], 21)
        region = pg.singleton_region(pspec(GAUSS, "BP", 0.1), [0.0], g)
        np.testing.assert_allclose(region.points[:, 0], [-0.1, 0.0, 0.1], atol=1e-15)


class TestInvariants:
    @given(e1=st.floats(0.01, 0.45), e2=st.floats(0.01, 0.45), kind=st.sampled_from(["KL", "BP", "CD"]))
    @settings(max_examples=25, deadline=None)
    def test_monotone_in_epsilon(self, e1, e2, kind):
        lo, hi = sorted((e1, e2))
        spec = pspec(GAUSS, kind, lo)
        a = pg.singleton_region(spec, [0.0], LINE)
        b = pg.singleton_region(spec.with_epsilon(hi), [0.0], LINE)
        assert gr.subset(a, b)

    @pytest.mark.parametrize("kind", ["KL", "BP", "CD"])
    def test_hypothesis_contained(self, kind):
        spec = tiny_hw(kind, 0.01)[0]
        # the two HW vertices and (1/4, 1/2, 1/4) lie on both curve and grid
        grid = gr.simplex(20)
        on_curve = np.isclose(grid.points[:, 1] ** 2, 4 * grid.points[:, 0] * grid.points[:, 2], atol=1e-12)
        assert on_curve.sum() == 3
        region = pg.composite_region(spec, gr.from_points(grid.points[on_curve]), grid)
        assert np.all(region.mask[on_curve])

    @pytest.mark.parametrize("kind, eps", [("KL", 0.05), ("BP", 0.1), ("CD", 0.1)])
    def test_union_theorem_small(self, kind, eps):
        spec, knots, grid = tiny_hw(kind, eps)
        composite = pg.composite_region(spec, knots, grid)
        union = gr.union(pg.singleton_region(spec, k, grid) for k in knots.points)
        assert composite == union

    def test_nested_hypotheses(self):
        spec, knots, grid = tiny_hw("CD", 0.1)
        sub = gr.from_points(knots.points[10:30])
        assert gr.subset(pg.composite_region(spec, sub, grid), pg.composite_region(spec, knots, grid))

    def test_refinement_stability(self):
        spec = pspec(BivariateGaussianIso(1.0), "KL", 0.1)
        center = gr.from_points([[0.0, 0.0]])

        def area(n):
            g = gr.rectangular([(-1, 1), (-1, 1)], n)
            return pg.composite_region(spec, center, g).count * g.spacing[0] * g.spacing[1]

        a1, a2 = area(101), area(201)
        assert abs(a2 - a1) / a2 < 0.02
        assert a2 == pytest.approx(math.pi * 0.2, rel=0.02)


class TestUnknownVariance:
    fam = Gaussian1DUnknownVar(M2=2.0)
    grid = gr.rectangular([(-1.0, 1.0), (0.05, 2.0)], [201, 40])

    def test_bp_uses_sigma_of_hypothesis_point(self):
        spec = pspec(self.fam, "BP", 0.1)
        region = pg.singleton_region(spec, [0.0, 0.25], self.grid)
        mu = self.grid.points[:, 0]
        np.testing.assert_array_equal(region.mask, np.abs(mu) <= 0.05 * (1 + 1e-10))

    @pytest.mark.parametrize("kind", ["KL", "CD"])
    def test_width_shrinks_with_variance(self, kind):
        spec = pspec(self.fam, kind, 0.1)
        knots = gr.curve("mean-line", 100, mu0=0.0, lo=0.01, hi=2.0)
        region = pg.composite_region(spec, knots, self.grid)
        pts = region.points
        widths = {}
        for s2 in np.unique(self.grid.points[:, 1])[[1, -2]]:
            row = pts[np.isclose(pts[:, 1], s2)]
            widths[s2] = row[:, 0].max() - row[:, 0].min()
        small, large = sorted(widths)
        assert widths[small] < widths[large]


class TestBioequivalence:
    def test_circle_radius(self):
        for eps in (0.05, 0.1, 0.3):
            assert pg.bioequiv_region(1.5, eps, "BP", composite=False).radius == pytest.approx(
                math.sqrt(2) * eps * 1.5, abs=1e-12
            )

    def test_circle_matches_grid(self):
        g = gr.rectangular([(-1, 1), (-1, 1)], 101)
        spec = pspec(BivariateGaussianIso(1.0), "BP", 0.3)
        region = pg.singleton_region(spec, [0.0, 0.0], g)
        np.testing.assert_array_equal(region.mask, pg.bioequiv_region(1.0, 0.3, "BP", composite=False).contains(g.points))

    @pytest.mark.parametrize("kind, eps", [("BP", 0.1), ("KL", 0.02), ("CD", 0.05)])
    def test_strip_matches_grid(self, kind, eps):
        g = gr.rectangular([(-1, 1), (-1, 1)], 41)
        knots = gr.curve("diagonal", 81, lo=-1.0, hi=1.0)
        spec = pspec(BivariateGaussianIso(1.0), kind, eps)
        region = pg.composite_region(spec, knots, g)
        strip = pg.bioequiv_region(1.0, eps, kind)
        np.testing.assert_array_equal(region.mask, strip.contains(g.points))

    def test_strip_half_widths(self):
        assert pg.bioequiv_region(2.0, 0.1, "BP").half_width == pytest.approx(0.4)
        assert pg.bioequiv_region(1.0, 0.08, "KL").half_width == pytest.approx(2 * math.sqrt(0.08))

    def test_cd_strip_factor_closed_form_oracle(self):
        # distance to the diagonal is gap / sqrt(2); CD = Phi(dist / 2) - 1/2
        for eps in (0.05, 0.1, 0.2, 0.3):
            assert pg.cd_strip_factor(eps) == pytest.approx(2 * math.sqrt(2) * stats.norm.ppf(0.5 + eps), abs=1e-7)

    def test_cd_strip_factor_monotone(self):
        h = [pg.cd_strip_factor(e) for e in (0.05, 0.1, 0.2, 0.3)]
        assert all(b > a for a, b in zip(h, h[1:]))


class TestReparametrization:
    @pytest.mark.parametrize("kind", ["KL", "BP", "CD"])
    @pytest.mark.parametrize("scale, shift", [(1.0, 0.0), (2.0, 0.0), (0.5, 1.0), (-1.0, 0.25)])
    def test_gaussian_invariance(self, kind, scale, shift):
        spec = pspec(GAUSS, kind, 0.1)
        fam_star, f, f_inv = pg.affine_reparametrization(GAUSS, scale, shift)
        report = pg.check_invariance(
            spec, spec.with_family(fam_star), gr.from_points([[0.0]]), f, f_inv, gr.rectangular([(-1, 1)], 201)
        )
        assert report.symmetric_difference == 0
        assert report.count_original == report.count_mapped > 0

    def test_unknown_variance_invariance(self):
        fam = Gaussian1DUnknownVar(M2=2.0)
        spec = pspec(fam, "KL", 0.1)
        fam_star, f, f_inv = pg.affine_reparametrization(fam, 3.0, -1.0)
        grid = gr.rectangular([(-1, 1), (0.1, 2.0)], [41, 20])
        knots = gr.curve("mean-line", 20, mu0=0.0, lo=0.1, hi=2.0)
        report = pg.check_invariance(spec, spec.with_family(fam_star), knots, f, f_inv, grid)
        assert report.symmetric_difference == 0

    def test_report_lists_mismatches(self):
        spec = pspec(GAUSS, "BP", 0.1)
        # deliberately wrong family in the new coordinates
        _, f, f_inv = pg.affine_reparametrization(GAUSS, 2.0)
        report = pg.check_invariance(spec, spec, gr.from_points([[0.0]]), f, f_inv, gr.rectangular([(-1, 1)], 201))
        assert report.symmetric_difference > 0
        m = report.mismatches[0]
        assert set(m) == {"index", "point", "mapped_point", "in_original", "in_mapped"}

    def test_non_injective_map(self):
        spec = pspec(GAUSS, "KL", 0.1)
        with pytest.raises(ConfigError):
            pg.check_invariance(spec, spec, gr.from_points([[0.0]]), lambda t: 0 * t, lambda t: t, LINE)

    def test_zero_scale(self):
        with pytest.raises(ConfigError):
            pg.affine_reparametrization(GAUSS, 0.0)


class TestReplication:
    def test_kl_doubling_equals_halving_epsilon(self):
        spec, knots, grid = tiny_hw("KL", 0.04)
        doubled = pg.composite_region(spec.with_family(TrinomialCounts(10)), knots, grid)
        halved = pg.composite_region(spec.with_epsilon(0.02), knots, grid)
        assert doubled == halved

    def test_m_one_is_unreplicated(self):
        spec = pspec(GAUSS, "CD", 0.1)
        seq = pg.shrinkage_sequence(spec, gr.from_points([[0.0]]), LINE, [1])
        assert seq[0] == pg.singleton_region(spec, [0.0], LINE)

    def test_cd_counts_decrease(self):
        spec = pspec(TrinomialCounts(1), "CD", 0.1)
        seq = pg.shrinkage_sequence(spec, gr.curve("hardy-weinberg", 60), gr.simplex(30), [5, 20, 80])
        counts = [r.count for r in seq]
        assert counts[0] > counts[1] > counts[2]

    def test_bp_unsupported(self):
        with pytest.raises(UnsupportedKindError):
            pg.shrinkage_sequence(pspec(GAUSS, "BP", 0.1), gr.from_points([[0.0]]), LINE, [1, 2])

    def test_m_list_must_increase(self):
        with pytest.raises(ConfigError):
            pg.shrinkage_sequence(pspec(GAUSS, "KL", 0.1), gr.from_points([[0.0]]), LINE, [2, 2])

    def test_gaussian_replication_scales_interval(self):
        spec = pspec(replicate(GAUSS, 4), "BP", 0.1)
        region = pg.singleton_region(spec, [0.0], LINE)
        # predictive spread of the average is sigma / 2
        assert region.points[:, 0].max() == pytest.approx(0.05, abs=LINE.spacing[0])
