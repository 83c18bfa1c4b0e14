"""Double smoothing for the 8-bit setting: inner Gaussian, outer factor law.

Once images are re-quantized to 8 bits per channel, composing power
transforms is only approximately multiplicative.  The fix is layered: the
base classifier is first smoothed with additive Gaussian noise so that it is
provably robust in an l2-ball large enough to absorb the measured conversion
error, and that inner classifier is then smoothed over the multiplicative
factor as usual.  Every estimation step spends part of a mistake budget; the
final probability bounds are shifted by the budget total and the certificate
is clipped to the attack interval the error bound was measured on.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import ndtri
from scipy.stats import binom

from .certify import (
    Abstain,
    Certificate,
    ProbBounds,
    SampleCounts,
    Side,
    certify_rayleigh,
    clopper_pearson,
)
from .distributions import Kind, SmoothingDistribution, rayleigh
from .rng import SeededSampler
from .runtime import BaseClassifier
from .transforms import conversion_error, gamma_correct, validate_image

__all__ = [
    "ErrorBudget",
    "RealisticConfig",
    "RealisticResult",
    "error_budget",
    "adjust_probabilities",
    "gaussian_l2_radius",
    "min_samples_for_quantile_bound",
    "quantile_upper_confidence",
    "estimate_conversion_error",
    "certify_realistic",
]

_MISS = -1


def error_budget(alpha: float, q_E: float, alpha_E: float) -> float:
    """Total mistake probability rho = alpha + (1 - q_E) + alpha_E.

    A budget of 1/2 or more can never certify (the adjusted lower bound
    cannot clear 1/2); callers should treat that as always-abstain.
    """
    for name, value in (("alpha", alpha), ("q_E", q_E), ("alpha_E", alpha_E)):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {value}")
    return alpha + (1.0 - q_E) + alpha_E


@dataclass(frozen=True)
class ErrorBudget:
    """Accounting record for the realistic setting.

    ``E`` bounds the l2 conversion error with rate ``q_E`` over the data
    distribution, estimated at confidence ``1 - alpha_E``; ``rho`` is the
    total budget of Eq-style mistake probabilities including the
    certification-time ``alpha``; ``gamma_interval`` is the attack interval
    the bound was measured on (and certificates are clipped to).
    """

    E: float
    q_E: float
    alpha_E: float
    rho: float
    gamma_interval: tuple[float, float]

    def __post_init__(self) -> None:
        if not self.E >= 0.0:
            raise ValueError(f"E must be nonnegative, got {self.E}")
        if not 0.0 < self.q_E < 1.0:
            raise ValueError(f"q_E must lie in (0, 1), got {self.q_E}")
        if not 0.0 < self.alpha_E < 1.0:
            raise ValueError(f"alpha_E must lie in (0, 1), got {self.alpha_E}")
        if not self.rho >= 0.0:
            raise ValueError(f"rho must be nonnegative, got {self.rho}")
        lo, hi = self.gamma_interval
        if not (0.0 < lo <= 1.0 <= hi and lo < hi):
            raise ValueError(f"gamma_interval must straddle 1 with lo < hi, got {self.gamma_interval}")
        object.__setattr__(self, "gamma_interval", (float(lo), float(hi)))

    @classmethod
    def for_alpha(
        cls,
        E: float,
        q_E: float,
        alpha_E: float,
        alpha: float,
        gamma_interval: tuple[float, float],
    ) -> "ErrorBudget":
        return cls(E, q_E, alpha_E, error_budget(alpha, q_E, alpha_E), gamma_interval)

    @property
    def feasible(self) -> bool:
        return self.rho < 0.5

    def to_json(self) -> dict:
        return {
            "E": self.E,
            "q_E": self.q_E,
            "alpha_E": self.alpha_E,
            "rho": self.rho,
            "gamma_interval": list(self.gamma_interval),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ErrorBudget":
        lo, hi = doc["gamma_interval"]
        return cls(float(doc["E"]), float(doc["q_E"]), float(doc["alpha_E"]), float(doc["rho"]), (lo, hi))

    @classmethod
    def load(cls, path) -> "ErrorBudget":
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class RealisticConfig:
    """Sampling plan: n_eps inner Gaussian draws per each of n_gamma factor draws."""

    n_eps: int
    n_gamma: int
    sigma_gauss: float
    alpha: float
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_eps < 1:
            raise ValueError(f"n_eps must be positive, got {self.n_eps}")
        if self.n_gamma < 1:
            raise ValueError(f"n_gamma must be positive, got {self.n_gamma}")
        if not self.sigma_gauss > 0.0:
            raise ValueError(f"sigma_gauss must be positive, got {self.sigma_gauss}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")

    @property
    def total_samples(self) -> int:
        return self.n_eps * self.n_gamma

    def to_json(self) -> dict:
        return {
            "n_eps": self.n_eps,
            "n_gamma": self.n_gamma,
            "sigma_gauss": self.sigma_gauss,
            "alpha": self.alpha,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "RealisticConfig":
        return cls(
            int(doc["n_eps"]),
            int(doc["n_gamma"]),
            float(doc["sigma_gauss"]),
            float(doc["alpha"]),
            int(doc["seed"]),
        )

    @classmethod
    def load(cls, path) -> "RealisticConfig":
        return cls.from_json(json.loads(Path(path).read_text()))


def adjust_probabilities(pa_lower: float, pb_upper: float, rho: float) -> ProbBounds | Abstain:
    """Shift both bounds by the mistake budget: pa - rho versus pb + rho."""
    if not rho >= 0.0:
        raise ValueError(f"rho must be nonnegative, got {rho}")
    pa = pa_lower - rho
    pb = pb_upper + rho
    if pa <= 0.5:
        return Abstain(f"adjusted pa_lower={pa:.6f} <= 1/2 (rho={rho})")
    if pa <= pb:
        return Abstain(f"adjusted bounds cross: {pa:.6f} <= {pb:.6f} (rho={rho})")
    return ProbBounds(pa, pb, confidence=max(1.0 - rho, 0.0))


def gaussian_l2_radius(pa_lower: float, sigma_gauss: float) -> float | Abstain:
    """Certified l2 radius of Gaussian smoothing with the trivial runner-up bound."""
    if not 0.0 < pa_lower < 1.0:
        raise ValueError(f"pa_lower must lie in (0, 1), got {pa_lower}")
    if not sigma_gauss > 0.0:
        raise ValueError(f"sigma_gauss must be positive, got {sigma_gauss}")
    if pa_lower <= 0.5:
        return Abstain(f"pa_lower={pa_lower} <= 1/2: no l2 radius")
    return sigma_gauss * float(ndtri(pa_lower))


def min_samples_for_quantile_bound(q: float, alpha: float) -> int:
    """Smallest sample count for which an order statistic can bound the q-quantile.

    Needs q**m <= alpha, i.e. m >= ln(alpha) / ln(q).
    """
    if not 0.0 < q < 1.0 or not 0.0 < alpha < 1.0:
        raise ValueError("q and alpha must lie in (0, 1)")
    return int(math.ceil(math.log(alpha) / math.log(q)))


def quantile_upper_confidence(samples: Sequence[float], q: float, alpha: float) -> float:
    """Distribution-free upper confidence bound on the q-quantile.

    Returns the k-th order statistic with k the smallest index whose
    binomial coverage argument P(Bin(m, q) >= k) <= alpha; the bound covers
    the true quantile with probability at least 1 - alpha for any law.
    """
    values = np.sort(np.asarray(samples, dtype=float))
    m = values.size
    needed = min_samples_for_quantile_bound(q, alpha)
    if m < needed:
        raise ValueError(
            f"need >= {needed} samples for a {q}-quantile bound at confidence "
            f"{1 - alpha}, got {m}"
        )
    # smallest k with P(Bin(m, q) >= k) <= alpha; k = m always qualifies here.
    tail = binom.sf(np.arange(m), m, q)  # tail[j] = P(X >= j+1)
    k = int(np.argmax(tail <= alpha)) + 1
    return float(values[k - 1])


def estimate_conversion_error(
    dataset: Sequence[np.ndarray],
    gamma_interval: tuple[float, float],
    q_E: float,
    alpha_E: float,
    grid_points: int = 64,
    seed: int = 0,
    dist: SmoothingDistribution | None = None,
) -> float:
    """Distributional bound E on the l2 conversion error over an attack interval.

    Pairs every dataset tensor with one smoothing-factor draw, takes the worst
    conversion error over a ``grid_points`` grid of attack factors in the
    interval, and lifts the empirical q_E-quantile of those maxima to a
    one-sided upper confidence bound at level 1 - alpha_E.  The grid max is an
    approximation of the true supremum; 64 points is the default trade-off.

    For a per-input guarantee at inference time, pass the same tensor repeated
    enough times to satisfy the sample requirement: the maxima then vary only
    over the factor draws.
    """
    lo, hi = gamma_interval
    if not 0.0 < lo < hi:
        raise ValueError(f"gamma interval must satisfy 0 < lo < hi, got {gamma_interval}")
    if grid_points < 2:
        raise ValueError(f"grid_points must be >= 2, got {grid_points}")
    tensors = [validate_image(x) for x in dataset]
    if not tensors:
        raise ValueError("dataset must be nonempty")
    needed = min_samples_for_quantile_bound(q_E, alpha_E)
    if len(tensors) < needed:
        raise ValueError(
            f"need >= {needed} dataset tensors for q_E={q_E} at confidence "
            f"{1 - alpha_E}, got {len(tensors)}"
        )
    law = dist or rayleigh()
    betas = law.sample(SeededSampler(seed), len(tensors))
    grid = np.linspace(lo, hi, grid_points)
    maxima = [
        max(conversion_error(x, float(beta), float(g)) for g in grid)
        for x, beta in zip(tensors, betas)
    ]
    return quantile_upper_confidence(maxima, q_E, alpha_E)


@dataclass(frozen=True)
class RealisticResult:
    """Outcome of a realistic-setting certification."""

    label: int | None
    pa_lower: float
    adjusted: ProbBounds | None
    certificate: Certificate | None
    counts: SampleCounts | None
    reason: str | None = None

    @property
    def abstained(self) -> bool:
        return self.label is None


def _gaussian_noise(sampler: SeededSampler, count: int, shape: tuple, sigma: float) -> np.ndarray:
    u = sampler.uniforms(count * int(np.prod(shape)))
    return sigma * ndtri(u).reshape((count,) + shape)


def certify_realistic(
    base: BaseClassifier,
    x: np.ndarray,
    cfg: RealisticConfig,
    budget: ErrorBudget,
    dist: SmoothingDistribution | None = None,
) -> RealisticResult:
    """Certify through the double-smoothing pipeline and clip to the attack interval.

    For each factor draw, the inner Gaussian-smoothed prediction contributes a
    vote only when its own lower bound clears 1/2 *and* its certified l2
    radius covers the conversion-error bound; anything less counts as a miss.
    The outer hit count gives a Clopper-Pearson bound, shifted by the budget
    total, certified, and clipped.  The certification-time alpha is the single
    confidence knob: both the inner and outer binomial bounds spend it, and it
    must be the alpha the budget's rho was computed from.
    """
    arr = validate_image(x)
    if dist is not None and dist.kind is not Kind.RAYLEIGH:
        raise ValueError("the outer certificate requires Rayleigh-distributed factors")
    expected_rho = error_budget(cfg.alpha, budget.q_E, budget.alpha_E)
    if abs(expected_rho - budget.rho) > 1e-9:
        raise ValueError(
            f"budget.rho={budget.rho} does not match alpha={cfg.alpha} "
            f"(expected {expected_rho})"
        )
    if not budget.feasible:
        return RealisticResult(
            None, 0.0, None, None, None, reason=f"rho={budget.rho} >= 1/2 always abstains"
        )

    law = dist or rayleigh()
    sampler = SeededSampler(cfg.seed)
    factors = law.sample(sampler.stream(0), cfg.n_gamma)

    radius_cache: dict[int, float | Abstain] = {}

    def inner_radius(hits: int) -> float | Abstain:
        if hits not in radius_cache:
            pa_inner = clopper_pearson(SampleCounts(hits, cfg.n_eps), cfg.alpha, Side.LOWER)
            if pa_inner <= 0.5:
                radius_cache[hits] = Abstain("inner bound at or below 1/2")
            else:
                radius_cache[hits] = gaussian_l2_radius(pa_inner, cfg.sigma_gauss)
        return radius_cache[hits]

    votes = np.full(cfg.n_gamma, _MISS, dtype=int)
    for j, beta in enumerate(factors):
        transformed = gamma_correct(arr, float(beta))
        noise = _gaussian_noise(sampler.stream(j + 1), cfg.n_eps, arr.shape, cfg.sigma_gauss)
        labels = base.labels(transformed[np.newaxis, ...] + noise)
        candidate = int(np.argmax(np.bincount(labels)))
        hits = int(np.sum(labels == candidate))
        radius = inner_radius(hits)
        if not isinstance(radius, Abstain) and radius >= budget.E:
            votes[j] = candidate

    scored = votes[votes != _MISS]
    if scored.size == 0:
        return RealisticResult(
            None,
            0.0,
            None,
            None,
            SampleCounts(0, cfg.n_gamma),
            reason="no factor draw produced a robust inner vote",
        )
    label = int(np.argmax(np.bincount(scored)))
    outer = SampleCounts(int(np.sum(votes == label)), cfg.n_gamma)
    pa_lower = clopper_pearson(outer, cfg.alpha, Side.LOWER)

    adjusted = adjust_probabilities(pa_lower, 1.0 - pa_lower, budget.rho)
    if isinstance(adjusted, Abstain):
        return RealisticResult(None, pa_lower, None, None, outer, reason=adjusted.reason)
    outcome = certify_rayleigh(adjusted)
    if isinstance(outcome, Abstain):
        return RealisticResult(None, pa_lower, adjusted, None, outer, reason=outcome.reason)
    lo, hi = budget.gamma_interval
    return RealisticResult(label, pa_lower, adjusted, outcome.clipped(lo, hi), outer)
