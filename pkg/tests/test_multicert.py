import math

import numpy as np
import pytest

from smoothcert import (
    MultiCertProblem,
    ProbBounds,
    RayleighParams,
    Verdict,
    certify_rayleigh,
    in_robust_region,
    rayleigh_quantile,
    scan_gamma_grid,
    solve_thresholds,
    weighted_expsum_cdf,
)

SIGMA = RayleighParams.unit_median().sigma


def exponential_cdf(t: float, scale: float) -> float:
    return -math.expm1(-t / scale) if t >= 0 else 0.0


def make_problem(pa=0.9, pb=0.1, n=1, mc=100_000, seed=12) -> MultiCertProblem:
    return MultiCertProblem(n=n, sigma=SIGMA, pa_lower=pa, pb_upper=pb, mc_samples=mc, seed=seed)


class TestWeightedExpsumCdf:
    def test_degenerate_all_zero(self):
        assert weighted_expsum_cdf([0.0, 0.0], SIGMA, 0.5, 10_000, seed=1).value == 1.0
        assert weighted_expsum_cdf([0.0, 0.0], SIGMA, -0.5, 10_000, seed=1).value == 0.0

    def test_single_positive_coefficient_matches_exponential(self):
        g = 1.7
        c = 1.0 - g**-2
        threshold = c * rayleigh_quantile(RayleighParams(SIGMA), 0.9) ** 2
        est = weighted_expsum_cdf([c], SIGMA, threshold, 200_000, seed=4)
        exact = exponential_cdf(threshold / c, 2.0 * SIGMA**2)
        assert abs(exact - 0.9) < 1e-12
        assert abs(est.value - exact) <= 1.5 * est.half_width

    def test_erlang_two_closed_form(self):
        threshold = 2.0 * (2.0 * SIGMA**2)
        est = weighted_expsum_cdf([1.0, 1.0], SIGMA, threshold, 100_000, seed=11)
        exact = 1.0 - math.exp(-2.0) * 3.0
        assert abs(est.value - exact) <= 1.5 * est.half_width

    def test_deterministic_given_seed(self):
        a = weighted_expsum_cdf([0.4, -0.2], SIGMA, 0.3, 50_000, seed=9)
        b = weighted_expsum_cdf([0.4, -0.2], SIGMA, 0.3, 50_000, seed=9)
        assert a == b

    def test_sample_floor(self):
        with pytest.raises(ValueError):
            weighted_expsum_cdf([1.0], SIGMA, 0.5, 5_000, seed=1)


class TestSolveThresholds:
    def test_single_factor_analytic_reduction(self):
        problem = make_problem(pa=0.85, pb=0.1, mc=200_000)
        g = 1.6
        r, theta = solve_thresholds(problem, [g])
        c = 1.0 - g**-2
        scale = 2.0 * SIGMA**2
        # translate threshold error to probability space and compare to MC noise
        hw = 2.5758 * math.sqrt(0.85 * 0.15 / problem.mc_samples)
        assert abs(exponential_cdf(r / c, scale) - 0.85) < hw + 2e-5
        assert abs(math.exp(-theta / (c * scale)) - 0.1) < hw + 2e-5

    def test_identity_short_circuit(self):
        problem = make_problem(n=2)
        assert solve_thresholds(problem, [1.0, 1.0]) == (0.0, 0.0)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            solve_thresholds(make_problem(n=2), [1.5])


class TestInRobustRegion:
    def test_identity_always_inside(self):
        query = in_robust_region(make_problem(n=3, pa=0.55, pb=0.45), [1.0, 1.0, 1.0])
        assert query.verdict is Verdict.INSIDE
        assert query.in_region

    def test_single_factor_agrees_with_interval(self):
        problem = make_problem(pa=0.9, pb=0.1)
        cert = certify_rayleigh(ProbBounds(0.9, 0.1))
        inside = in_robust_region(problem, [0.5 * (1.0 + cert.gamma2)])
        outside = in_robust_region(problem, [cert.gamma2 * 1.5])
        assert inside.verdict is Verdict.INSIDE
        assert outside.verdict is Verdict.OUTSIDE

    def test_unknown_is_not_in_region(self):
        problem = make_problem(pa=0.9, pb=0.1)
        cert = certify_rayleigh(ProbBounds(0.9, 0.1))
        near_edge = in_robust_region(problem, [cert.gamma2])
        if near_edge.verdict is Verdict.UNKNOWN:
            assert not near_edge.in_region

    def test_permutation_symmetry(self):
        problem = make_problem(n=2, pa=0.85, pb=0.05)
        a = in_robust_region(problem, [1.2, 0.9])
        b = in_robust_region(problem, [0.9, 1.2])
        assert a.verdict is b.verdict
        assert a.r == b.r and a.theta == b.theta

    def test_monotone_nesting_in_pa(self):
        grid = np.linspace(0.4, 2.2, 25)
        low = make_problem(pa=0.7, pb=0.05, seed=33)
        high = make_problem(pa=0.95, pb=0.05, seed=33)
        accepted_low = {g for g in grid if in_robust_region(low, [g]).in_region}
        accepted_high = {g for g in grid if in_robust_region(high, [g]).in_region}
        assert accepted_low <= accepted_high


class TestScanGammaGrid:
    def test_grid_shape_and_determinism(self):
        problem = make_problem(n=2, pa=0.9, pb=0.05, mc=20_000)
        axes = [np.linspace(0.8, 1.2, 3), np.linspace(0.9, 1.1, 3)]
        first = scan_gamma_grid(problem, axes)
        second = scan_gamma_grid(problem, axes)
        assert len(first) == 9
        assert [q.verdict for q in first] == [q.verdict for q in second]

    def test_axis_count_checked(self):
        with pytest.raises(ValueError):
            scan_gamma_grid(make_problem(n=2), [np.array([1.0])])
