"""Robust-region membership for transforms with several multiplicative factors.

With n independent Rayleigh smoothing factors the certified set is no longer
an interval: a factor vector gamma is robust when a weighted sum of squared
factors (each square is exponentially distributed) stays below one threshold
more often than it exceeds another.  The weighted-sum law has no convenient
closed form for mixed-sign weights, so probabilities are estimated by
Monte-Carlo with common random numbers and every verdict carries a 99%
half-width; queries whose intervals overlap are reported as unknown rather
than resolved optimistically.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import ndtri

from .rng import SeededSampler

__all__ = [
    "MultiCertProblem",
    "McEstimate",
    "Verdict",
    "RegionQuery",
    "weighted_expsum_cdf",
    "solve_thresholds",
    "in_robust_region",
    "scan_gamma_grid",
]

_Z99 = float(ndtri(0.995))
_MIN_MC_SAMPLES = 10_000


@dataclass(frozen=True)
class MultiCertProblem:
    """One membership problem: factor count, smoothing scale, probability bounds.

    Each squared factor is exponentially distributed with mean ``2 sigma**2``,
    which is what the Monte-Carlo estimator samples.
    """

    n: int
    sigma: float
    pa_lower: float
    pb_upper: float
    mc_samples: int
    seed: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"factor count must be >= 1, got {self.n}")
        if not self.sigma > 0.0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not 0.0 < self.pa_lower < 1.0:
            raise ValueError(f"pa_lower must lie in (0, 1), got {self.pa_lower}")
        if not 0.0 < self.pb_upper < 1.0:
            raise ValueError(f"pb_upper must lie in (0, 1), got {self.pb_upper}")
        if self.pa_lower <= self.pb_upper:
            raise ValueError("pa_lower must exceed pb_upper")
        if self.mc_samples < _MIN_MC_SAMPLES:
            raise ValueError(f"mc_samples must be >= {_MIN_MC_SAMPLES}, got {self.mc_samples}")


@dataclass(frozen=True)
class McEstimate:
    """A Monte-Carlo probability estimate with its 99% normal half-width."""

    value: float
    half_width: float


class Verdict(enum.Enum):
    INSIDE = "inside"
    OUTSIDE = "outside"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class RegionQuery:
    """Outcome of one membership query at a factor vector."""

    gamma: tuple[float, ...]
    r: float
    theta: float
    verdict: Verdict

    @property
    def in_region(self) -> bool:
        """True only for a definite inside verdict, never for unknown."""
        return self.verdict is Verdict.INSIDE


def _sorted_gamma(gamma: Sequence[float]) -> np.ndarray:
    g = np.asarray(gamma, dtype=float)
    if g.ndim != 1 or g.size < 1:
        raise ValueError(f"gamma must be a nonempty vector, got shape {g.shape}")
    if np.any(g <= 0.0):
        raise ValueError("gamma entries must be positive")
    # Canonical descending order makes queries permutation-symmetric: the
    # same exponential draw always meets the same-ranked coefficient.
    return np.sort(g)[::-1]


def _exp_squares(sigma: float, n: int, mc_samples: int, sampler: SeededSampler) -> np.ndarray:
    """(mc_samples, n) draws of squared Rayleigh factors: Exp(mean 2 sigma^2)."""
    u = sampler.uniforms(mc_samples * n)
    return (-2.0 * sigma * sigma) * np.log1p(-u).reshape(mc_samples, n)


def _estimate(indicator: np.ndarray) -> McEstimate:
    p = float(indicator.mean())
    half = _Z99 * math.sqrt(p * (1.0 - p) / indicator.size)
    return McEstimate(p, half)


def weighted_expsum_cdf(
    coeffs: Sequence[float],
    sigma: float,
    threshold: float,
    mc_samples: int,
    seed: int,
    stream_index: int = 0,
) -> McEstimate:
    """Monte-Carlo estimate of P(sum_i c_i * beta_i^2 <= threshold).

    Deterministic in ``(seed, stream_index)``.  An all-zero coefficient vector
    degenerates to a point mass at 0 and is answered exactly.
    """
    c = np.asarray(coeffs, dtype=float)
    if c.ndim != 1 or c.size < 1:
        raise ValueError(f"coeffs must be a nonempty vector, got shape {c.shape}")
    if mc_samples < _MIN_MC_SAMPLES:
        raise ValueError(f"mc_samples must be >= {_MIN_MC_SAMPLES}, got {mc_samples}")
    if np.all(c == 0.0):
        return McEstimate(1.0 if threshold >= 0.0 else 0.0, 0.0)
    c = np.sort(c)[::-1]
    squares = _exp_squares(sigma, c.size, mc_samples, SeededSampler(seed, stream_index))
    return _estimate(squares @ c <= threshold)


def _solve_threshold(sums: np.ndarray, target: float, upper_tail: bool) -> float:
    """Bisect on the common-random-number CDF estimate.

    With fixed draws the empirical CDF is a monotone step function of the
    threshold, so bisection converges to the jump where it crosses ``target``.
    ``upper_tail`` solves P(S >= t) = target instead of P(S <= t) = target.
    """
    lo = float(sums.min()) - 1.0
    hi = float(sums.max()) + 1.0
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        if upper_tail:
            value = float((sums >= mid).mean())
            too_low = value > target
        else:
            value = float((sums <= mid).mean())
            too_low = value < target
        if too_low:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def solve_thresholds(
    problem: MultiCertProblem, gamma: Sequence[float], stream_index: int = 0
) -> tuple[float, float]:
    """Thresholds (r, theta) for one factor vector.

    r solves P(sum (1 - gamma_i^-2) beta_i^2 <= r) = pa_lower and theta solves
    P(sum (1 - gamma_i^-2) beta_i^2 >= theta) = pb_upper on the same draws.
    The identity vector has all-zero coefficients; membership short-circuits
    there, and (0, 0) is returned.
    """
    g = _sorted_gamma(gamma)
    if g.size != problem.n:
        raise ValueError(f"gamma has {g.size} entries, problem expects {problem.n}")
    coeffs = 1.0 - g**-2.0
    if np.all(coeffs == 0.0):
        return 0.0, 0.0
    squares = _exp_squares(
        problem.sigma, problem.n, problem.mc_samples, SeededSampler(problem.seed, stream_index)
    )
    sums = squares @ coeffs
    r = _solve_threshold(sums, problem.pa_lower, upper_tail=False)
    theta = _solve_threshold(sums, problem.pb_upper, upper_tail=True)
    return r, theta


def in_robust_region(
    problem: MultiCertProblem, gamma: Sequence[float], stream_base: int = 0
) -> RegionQuery:
    """Membership query: is the prediction provably unchanged at ``gamma``?

    Evaluates whether P(sum (gamma_i^2 - 1) beta_i^2 <= r) exceeds
    P(sum (gamma_i^2 - 1) beta_i^2 >= theta); the verdict is INSIDE or OUTSIDE
    only when the two 99% intervals are disjoint, UNKNOWN otherwise.  The
    identity vector is always inside (the smoothed outputs coincide there).
    """
    g = _sorted_gamma(gamma)
    if g.size != problem.n:
        raise ValueError(f"gamma has {g.size} entries, problem expects {problem.n}")
    if np.all(g == 1.0):
        return RegionQuery(tuple(np.asarray(gamma, dtype=float)), 0.0, 0.0, Verdict.INSIDE)

    r, theta = solve_thresholds(problem, g, stream_index=stream_base)
    flipped = g**2.0 - 1.0
    squares = _exp_squares(
        problem.sigma, problem.n, problem.mc_samples, SeededSampler(problem.seed, stream_base + 1)
    )
    sums = squares @ flipped
    lhs = _estimate(sums <= r)
    rhs = _estimate(sums >= theta)

    if lhs.value - lhs.half_width > rhs.value + rhs.half_width:
        verdict = Verdict.INSIDE
    elif lhs.value + lhs.half_width < rhs.value - rhs.half_width:
        verdict = Verdict.OUTSIDE
    else:
        verdict = Verdict.UNKNOWN
    return RegionQuery(tuple(np.asarray(gamma, dtype=float)), r, theta, verdict)


def scan_gamma_grid(problem: MultiCertProblem, axes: Sequence[Sequence[float]]) -> list[RegionQuery]:
    """Membership over the cartesian product of per-factor grids.

    Points get derived stream indices, so results do not depend on evaluation
    order and a parallel driver would produce the same verdicts.
    """
    if len(axes) != problem.n:
        raise ValueError(f"expected {problem.n} axes, got {len(axes)}")
    queries = []
    for index, point in enumerate(itertools.product(*axes)):
        queries.append(in_robust_region(problem, point, stream_base=2 * (index + 1)))
    return queries
