import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.stats import kstest

from smoothcert import (
    Kind,
    RayleighParams,
    ScaleTarget,
    SeededSampler,
    SmoothingDistribution,
    inverse_rayleigh,
    inverse_rayleigh_cdf,
    log_gaussian,
    log_laplace,
    log_uniform,
    rayleigh,
    rayleigh_cdf,
    rayleigh_quantile,
    rayleigh_scale_for,
)

UNIT_MEDIAN = RayleighParams.unit_median()

ALL_KINDS = [
    rayleigh(),
    inverse_rayleigh(),
    log_gaussian(0.7),
    log_laplace(0.5),
    log_uniform(1.3),
]


class TestRayleighParams:
    def test_unit_median_constant(self):
        # median = sigma * sqrt(2 ln 2) = 1
        assert abs(UNIT_MEDIAN.sigma - math.sqrt(1.0 / (2.0 * math.log(2.0)))) < 1e-12

    def test_unit_mean_constant(self):
        # mean = sigma * sqrt(pi / 2) = 1
        assert abs(RayleighParams.unit_mean().sigma - math.sqrt(2.0) / math.sqrt(math.pi)) < 1e-12

    @pytest.mark.parametrize("bad", [0.0, -1.0, math.inf, math.nan])
    def test_rejects_bad_sigma(self, bad):
        with pytest.raises(ValueError):
            RayleighParams(bad)

    def test_scale_for_targets(self):
        assert abs(rayleigh_scale_for(ScaleTarget.UNIT_MEDIAN).sigma - 0.84932) < 1e-4
        assert abs(rayleigh_scale_for(ScaleTarget.UNIT_MEAN).sigma - 0.79788) < 1e-4

    def test_unit_median_roundtrip(self):
        params = rayleigh_scale_for(ScaleTarget.UNIT_MEDIAN)
        assert abs(rayleigh_quantile(params, 0.5) - 1.0) < 1e-12


class TestRayleighCdfQuantile:
    def test_cdf_support_edge(self):
        assert rayleigh_cdf(UNIT_MEDIAN, 0.0) == 0.0

    def test_cdf_unit_median(self):
        assert abs(rayleigh_cdf(UNIT_MEDIAN, 1.0) - 0.5) < 1e-15

    def test_cdf_exponent_identity(self):
        # 1 - e^{-4 ln 2} = 1 - 1/16
        assert abs(rayleigh_cdf(UNIT_MEDIAN, 2.0) - 0.9375) < 1e-15

    def test_cdf_rejects_negative(self):
        with pytest.raises(ValueError):
            rayleigh_cdf(UNIT_MEDIAN, -0.1)

    def test_quantile_examples(self):
        assert abs(rayleigh_quantile(UNIT_MEDIAN, 0.5) - 1.0) < 1e-12
        assert rayleigh_quantile(UNIT_MEDIAN, 0.0) == 0.0
        assert abs(rayleigh_quantile(UNIT_MEDIAN, 0.9375) - 2.0) < 1e-12

    @pytest.mark.parametrize("bad", [-0.1, 1.0, 1.5])
    def test_quantile_rejects_out_of_range(self, bad):
        with pytest.raises(ValueError):
            rayleigh_quantile(UNIT_MEDIAN, bad)

    @given(st.floats(min_value=1e-9, max_value=1.0 - 1e-12))
    def test_quantile_inverts_cdf(self, p):
        assert abs(rayleigh_cdf(UNIT_MEDIAN, rayleigh_quantile(UNIT_MEDIAN, p)) - p) < 1e-9


class TestInverseRayleigh:
    def test_unit_median_reciprocal(self):
        assert abs(inverse_rayleigh_cdf(UNIT_MEDIAN, 1.0) - 0.5) < 1e-15

    def test_upper_limit(self):
        assert abs(inverse_rayleigh_cdf(UNIT_MEDIAN, 1e12) - 1.0) < 1e-9

    def test_exponent_identity(self):
        # exp(-4 ln 2) = 1/16
        assert abs(inverse_rayleigh_cdf(UNIT_MEDIAN, 0.5) - 0.0625) < 1e-15

    @pytest.mark.parametrize("bad", [0.0, -2.0])
    def test_rejects_nonpositive(self, bad):
        with pytest.raises(ValueError):
            inverse_rayleigh_cdf(UNIT_MEDIAN, bad)

    @given(st.floats(min_value=1e-3, max_value=1e3))
    def test_reciprocal_identity(self, z):
        lhs = inverse_rayleigh_cdf(UNIT_MEDIAN, z)
        rhs = 1.0 - rayleigh_cdf(UNIT_MEDIAN, 1.0 / z)
        assert abs(lhs - rhs) < 1e-12


class TestSmoothingDistribution:
    @pytest.mark.parametrize("dist", ALL_KINDS, ids=lambda d: d.kind.value)
    def test_cdf_monotone_and_normalized(self, dist):
        z = np.geomspace(1e-4, 1e3, 200)
        values = dist.cdf(z)
        assert np.all(np.diff(values) >= 0)
        assert dist.cdf(1e-12) < 1e-6
        assert dist.cdf(1e9) > 1.0 - 1e-6

    @pytest.mark.parametrize("dist", ALL_KINDS, ids=lambda d: d.kind.value)
    def test_quantile_inverts_cdf(self, dist):
        for p in np.linspace(0.01, 0.99, 25):
            z = dist.quantile(p)
            assert abs(dist.cdf(z) - p) < 1e-9

    @pytest.mark.parametrize("dist", ALL_KINDS, ids=lambda d: d.kind.value)
    def test_ks_statistic_below_one_percent(self, dist):
        draws = dist.sample(SeededSampler(42), 100_000)
        assert np.all(draws > 0)
        result = kstest(draws, dist.cdf)
        assert result.statistic < 0.01

    @pytest.mark.parametrize(
        "dist", [log_gaussian(0.8), log_laplace(0.6), log_uniform(1.1)], ids=lambda d: d.kind.value
    )
    def test_log_kind_cdf_matches_integration_oracle(self, dist):
        from scipy.stats import laplace, norm, uniform

        additive = {
            Kind.LOG_GAUSSIAN: norm(scale=dist.scale).cdf,
            Kind.LOG_LAPLACE: laplace(scale=dist.scale).cdf,
            Kind.LOG_UNIFORM: uniform(loc=-dist.scale, scale=2 * dist.scale).cdf,
        }[dist.kind]
        support_edges = [math.exp(-dist.scale), math.exp(dist.scale)]
        # numeric integration of the density reproduces the log-space CDF,
        # which in turn is the additive law's CDF at log(z)
        for z in np.geomspace(0.15, 6.0, 20):
            breaks = [e for e in support_edges if 0.0 < e < z]
            integral, _ = quad(dist.pdf, 0.0, z, limit=200, points=breaks or None)
            assert abs(integral - dist.cdf(z)) < 1e-7
            assert abs(dist.cdf(z) - float(additive(math.log(z)))) < 1e-12

    @pytest.mark.parametrize("dist", [rayleigh(), inverse_rayleigh()], ids=lambda d: d.kind.value)
    def test_direct_kind_density_integrates_to_cdf(self, dist):
        for z in (0.3, 0.8, 1.5, 3.0):
            integral, _ = quad(dist.pdf, 0.0, z, limit=200)
            assert abs(integral - dist.cdf(z)) < 1e-7

    def test_log_base_validation(self):
        with pytest.raises(ValueError):
            SmoothingDistribution(Kind.LOG_GAUSSIAN, 1.0, log_base=1.0)

    def test_non_default_base(self):
        dist = log_uniform(2.0, log_base=10.0)
        assert abs(dist.cdf(10.0**2.0) - 1.0) < 1e-12
        assert abs(dist.cdf(1.0) - 0.5) < 1e-12


class TestSampling:
    def test_median_of_a_million_draws(self):
        draws = rayleigh().sample(SeededSampler(7), 1_000_000)
        assert abs(np.median(draws) - 1.0) < 0.005

    def test_log_uniform_support_bound(self):
        lam = 1.7
        draws = log_uniform(lam).sample(SeededSampler(3), 50_000)
        assert draws.min() >= math.exp(-lam) - 1e-12
        assert draws.max() <= math.exp(lam) + 1e-12

    def test_partitioned_draws_are_identical(self):
        dist = rayleigh()
        sampler = SeededSampler(99, stream_index=5)
        full = dist.sample(sampler, 10_000)
        quarters = [dist.sample(sampler, 2_500, start=i * 2_500) for i in range(4)]
        assert np.array_equal(full, np.concatenate(quarters))

    def test_streams_are_independent(self):
        dist = rayleigh()
        a = dist.sample(SeededSampler(1, 0), 100)
        b = dist.sample(SeededSampler(1, 1), 100)
        assert not np.array_equal(a, b)

    def test_count_validation(self):
        with pytest.raises(ValueError):
            rayleigh().sample(SeededSampler(1), 0)


@settings(max_examples=30)
@given(
    st.sampled_from(["rayleigh", "inverse", "log_gaussian", "log_laplace", "log_uniform"]),
    st.floats(min_value=0.01, max_value=0.99),
)
def test_quantile_cdf_roundtrip_all_kinds(name, p):
    dist = {
        "rayleigh": rayleigh(),
        "inverse": inverse_rayleigh(),
        "log_gaussian": log_gaussian(0.9),
        "log_laplace": log_laplace(1.2),
        "log_uniform": log_uniform(0.8),
    }[name]
    assert abs(dist.cdf(dist.quantile(p)) - p) < 1e-9
