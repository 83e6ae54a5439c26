import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from pragma.errors import ConfigError, DomainError
from pragma.family import (
    BivariateGaussianIso,
    Gaussian1DUnknownVar,
    GaussianKnownVar,
    ReplicatedFamily,
    TrinomialCounts,
    base_and_replication,
    family_from_config,
    replicate,
)


class TestGaussianKnownVar:
    def test_univariate_density_matches_scipy(self):
        fam = GaussianKnownVar.univariate(2.0)
        z = np.array([[-1.0], [0.3], [4.0]])
        got = fam.log_density([0.5], z)
        np.testing.assert_allclose(got, stats.norm(0.5, 2.0).logpdf(z[:, 0]), rtol=1e-13)

    def test_multivariate_density_matches_scipy(self):
        cov = [[2.0, 0.3], [0.3, 1.0]]
        fam = GaussianKnownVar(cov=cov)
        z = np.array([[0.1, -0.2], [1.5, 2.0]])
        got = fam.log_density([0.2, 0.4], z)
        np.testing.assert_allclose(got, stats.multivariate_normal([0.2, 0.4], cov).logpdf(z), rtol=1e-12)

    def test_rejects_non_spd_covariance(self):
        with pytest.raises(ConfigError):
            GaussianKnownVar(cov=[[1.0, 2.0], [2.0, 1.0]])

    def test_wrong_parameter_length(self):
        with pytest.raises(DomainError):
            GaussianKnownVar.univariate(1.0).check_theta([0.0, 1.0])

    def test_sample_is_seeded(self):
        fam = GaussianKnownVar.univariate(1.0)
        a = fam.sample([0.0], 10, seed=3)
        b = fam.sample([0.0], 10, seed=3)
        assert a.shape == (10, 1)
        np.testing.assert_array_equal(a, b)


class TestUnknownVariance:
    def test_domain_bounds(self):
        fam = Gaussian1DUnknownVar(M2=2.0)
        fam.check_theta([0.0, 2.0])
        with pytest.raises(DomainError):
            fam.check_theta([0.0, 2.5])
        with pytest.raises(DomainError):
            fam.check_theta([0.0, 0.0])

    def test_default_lower_bound(self):
        assert Gaussian1DUnknownVar(M2=2.0).sigma2_min == pytest.approx(2e-6)

    def test_density(self):
        fam = Gaussian1DUnknownVar(M2=4.0)
        got = fam.log_density([1.0, 3.0], [[0.0]])
        assert got == pytest.approx(stats.norm(1.0, math.sqrt(3.0)).logpdf(0.0), rel=1e-13)


class TestTrinomial:
    def test_outcomes_lexicographic(self):
        fam = TrinomialCounts(2)
        np.testing.assert_array_equal(
            fam.outcomes, [[0, 0, 2], [0, 1, 1], [0, 2, 0], [1, 0, 1], [1, 1, 0], [2, 0, 0]]
        )

    @pytest.mark.parametrize("m", [1, 5, 20])
    def test_outcome_count(self, m):
        assert len(TrinomialCounts(m).outcomes) == (m + 1) * (m + 2) // 2

    def test_pmf_matches_scipy(self):
        fam = TrinomialCounts(7)
        theta = np.array([0.2, 0.5, 0.3])
        table = fam.pmf_table(theta)[0]
        expected = stats.multinomial(7, theta).pmf(fam.outcomes)
        np.testing.assert_allclose(table, expected, rtol=1e-12)
        assert table.sum() == pytest.approx(1.0, abs=1e-14)

    def test_pmf_at_vertex(self):
        table = TrinomialCounts(3).pmf_table([1.0, 0.0, 0.0])[0]
        assert table[-1] == 1.0
        assert table[:-1].sum() == 0.0

    def test_renormalizes_tiny_drift(self):
        theta = TrinomialCounts(2).check_theta([0.2, 0.3, 0.5 + 5e-10])
        assert theta.sum() == pytest.approx(1.0, abs=1e-15)

    def test_rejects_off_simplex(self):
        with pytest.raises(DomainError):
            TrinomialCounts(2).check_theta([0.2, 0.3, 0.6])
        with pytest.raises(DomainError):
            TrinomialCounts(2).check_theta([-0.1, 0.6, 0.5])

    def test_outcome_validation(self):
        fam = TrinomialCounts(4)
        with pytest.raises(DomainError):
            fam.log_density([0.2, 0.3, 0.5], [1, 1, 1])

    def test_predictive_moments(self):
        fam = TrinomialCounts(10)
        theta = np.array([0.2, 0.3, 0.5])
        z = fam.outcomes
        p = fam.pmf_table(theta)[0]
        mean = p @ z
        cov = (z - mean).T @ (p[:, None] * (z - mean))
        np.testing.assert_allclose(fam.predictive_mean(theta), mean, atol=1e-12)
        np.testing.assert_allclose(fam.predictive_cov(theta), cov, atol=1e-12)

    def test_bad_m(self):
        with pytest.raises(ConfigError):
            TrinomialCounts(0)


class TestBivariate:
    def test_density(self):
        fam = BivariateGaussianIso(sigma=0.5)
        got = fam.log_density([0.1, -0.1], [[0.3, 0.2]])
        exp = stats.norm(0.1, 0.5).logpdf(0.3) + stats.norm(-0.1, 0.5).logpdf(0.2)
        assert got == pytest.approx(exp, rel=1e-13)


class TestReplication:
    def test_m_one_is_identity(self):
        fam = GaussianKnownVar.univariate(1.0)
        assert replicate(fam, 1) is fam

    def test_nested_flattens(self):
        fam = replicate(replicate(TrinomialCounts(2), 3), 4)
        assert isinstance(fam, ReplicatedFamily)
        assert fam.m == 12 and fam.base == TrinomialCounts(2)
        assert base_and_replication(fam) == (TrinomialCounts(2), 12)

    def test_reduced_families(self):
        assert replicate(GaussianKnownVar.univariate(2.0), 4).reduced() == GaussianKnownVar(cov=((1.0,),))
        assert replicate(BivariateGaussianIso(1.0), 4).reduced() == BivariateGaussianIso(0.5)
        assert replicate(TrinomialCounts(2), 5).reduced() == TrinomialCounts(10)

    def test_log_density_sums_over_copies(self):
        base = Gaussian1DUnknownVar(M2=3.0)
        fam = replicate(base, 3)
        z = np.array([[[0.1], [0.4], [-1.0]]])
        exp = base.log_density([0.2, 1.5], z[0]).sum()
        assert fam.log_density([0.2, 1.5], z)[0] == pytest.approx(exp, rel=1e-13)

    def test_replicated_sample_shape(self):
        fam = replicate(BivariateGaussianIso(1.0), 5)
        assert fam.sample([0.0, 0.0], 4, seed=1).shape == (4, 5, 2)

    @given(m=st.integers(1, 50), s2=st.floats(0.1, 2.0))
    @settings(max_examples=30, deadline=None)
    def test_unknown_var_predictive_cov_shrinks(self, m, s2):
        fam = replicate(Gaussian1DUnknownVar(M2=2.0), m)
        assert fam.predictive_cov([0.0, s2])[0, 0] == pytest.approx(s2 / m)


class TestConfig:
    @pytest.mark.parametrize(
        "cfg, expected",
        [
            ({"kind": "gauss1d", "params": {"sigma0": 2}}, GaussianKnownVar.univariate(2.0)),
            ({"kind": "trinomial", "params": {"m": 20}}, TrinomialCounts(20)),
            ({"kind": "bivariate", "params": {"sigma": 0.5}}, BivariateGaussianIso(0.5)),
            ({"kind": "gauss-unknown-var", "params": {"M2": 2}}, Gaussian1DUnknownVar(M2=2.0)),
        ],
    )
    def test_aliases(self, cfg, expected):
        assert family_from_config(cfg) == expected

    def test_round_trip(self):
        for fam in (
            GaussianKnownVar(cov=[[2.0, 0.1], [0.1, 1.0]]),
            replicate(TrinomialCounts(3), 4),
            Gaussian1DUnknownVar(M2=2.0, sigma2_min=0.01),
        ):
            assert family_from_config(fam.to_config()) == fam

    def test_unknown_kind(self):
        with pytest.raises(ConfigError, match="family.kind"):
            family_from_config({"kind": "poisson"})

    def test_missing_param(self):
        with pytest.raises(ConfigError, match="M2"):
            family_from_config({"kind": "gauss-unknown-var"})

    def test_unexpected_param(self):
        with pytest.raises(ConfigError, match="unexpected"):
            family_from_config({"kind": "trinomial", "params": {"m": 2, "n": 3}})
