"""Smoothing distributions over multiplicative factors.

All laws here have strictly positive support: the Rayleigh family used for
direct multiplicative smoothing, its reciprocal, and log-space wrappers of the
usual symmetric laws (Gaussian, Laplace, uniform) used as comparison
baselines.  Each exposes an exact CDF, quantile and density, plus seeded
inverse-CDF sampling via :class:`~smoothcert.rng.SeededSampler`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .rng import SeededSampler

__all__ = [
    "RayleighParams",
    "ScaleTarget",
    "Kind",
    "SmoothingDistribution",
    "rayleigh",
    "inverse_rayleigh",
    "log_gaussian",
    "log_laplace",
    "log_uniform",
    "rayleigh_cdf",
    "rayleigh_quantile",
    "inverse_rayleigh_cdf",
    "rayleigh_scale_for",
    "UNIT_MEDIAN_SIGMA",
    "UNIT_MEAN_SIGMA",
]

# Rayleigh median is sigma * sqrt(2 ln 2), mean is sigma * sqrt(pi / 2).
UNIT_MEDIAN_SIGMA = 1.0 / math.sqrt(2.0 * math.log(2.0))
UNIT_MEAN_SIGMA = math.sqrt(2.0 / math.pi)


@dataclass(frozen=True)
class RayleighParams:
    """Scale parameter of a Rayleigh law (dimensionless multiplicative units)."""

    sigma: float

    def __post_init__(self) -> None:
        if not (self.sigma > 0.0 and math.isfinite(self.sigma)):
            raise ValueError(f"sigma must be a positive finite real, got {self.sigma}")

    @classmethod
    def unit_median(cls) -> "RayleighParams":
        """Scale placing the median at 1, the default centering."""
        return cls(UNIT_MEDIAN_SIGMA)

    @classmethod
    def unit_mean(cls) -> "RayleighParams":
        """Scale placing the mean at 1."""
        return cls(UNIT_MEAN_SIGMA)


class ScaleTarget(enum.Enum):
    UNIT_MEDIAN = "unit_median"
    UNIT_MEAN = "unit_mean"


def rayleigh_scale_for(target: ScaleTarget) -> RayleighParams:
    """Rayleigh scale whose median (or mean) equals the identity factor 1."""
    if target is ScaleTarget.UNIT_MEDIAN:
        return RayleighParams.unit_median()
    if target is ScaleTarget.UNIT_MEAN:
        return RayleighParams.unit_mean()
    raise ValueError(f"unknown scale target: {target!r}")


def rayleigh_cdf(params: RayleighParams, z):
    """P(beta <= z) = 1 - exp(-z^2 / (2 sigma^2)) for z >= 0."""
    z_arr = np.asarray(z, dtype=float)
    if np.any(z_arr < 0.0):
        raise ValueError("rayleigh_cdf requires z >= 0")
    out = -np.expm1(-(z_arr * z_arr) / (2.0 * params.sigma**2))
    return float(out) if np.isscalar(z) else out


def rayleigh_quantile(params: RayleighParams, p):
    """Inverse CDF: sigma * sqrt(-2 ln(1 - p)) for p in [0, 1)."""
    p_arr = np.asarray(p, dtype=float)
    if np.any((p_arr < 0.0) | (p_arr >= 1.0)):
        raise ValueError("rayleigh_quantile requires 0 <= p < 1")
    out = params.sigma * np.sqrt(-2.0 * np.log1p(-p_arr))
    return float(out) if np.isscalar(p) else out


def inverse_rayleigh_cdf(params: RayleighParams, z):
    """P(1/beta <= z) = P(beta >= 1/z) = exp(-1 / (2 sigma^2 z^2)) for z > 0."""
    z_arr = np.asarray(z, dtype=float)
    if np.any(z_arr <= 0.0):
        raise ValueError("inverse_rayleigh_cdf requires z > 0")
    out = np.exp(-1.0 / (2.0 * params.sigma**2 * z_arr * z_arr))
    return float(out) if np.isscalar(z) else out


class Kind(enum.Enum):
    RAYLEIGH = "rayleigh"
    INVERSE_RAYLEIGH = "inverse-rayleigh"
    LOG_GAUSSIAN = "log-gaussian"
    LOG_LAPLACE = "log-laplace"
    LOG_UNIFORM = "log-uniform"


_LOG_KINDS = frozenset({Kind.LOG_GAUSSIAN, Kind.LOG_LAPLACE, Kind.LOG_UNIFORM})


@dataclass(frozen=True)
class SmoothingDistribution:
    """A one-parameter positive-support smoothing law.

    ``scale`` is the Rayleigh sigma for the Rayleigh kinds, and the scale of
    the underlying additive law (standard deviation, Laplace scale, or support
    half-width) for the log-space kinds.  ``log_base`` applies only to the
    log-space kinds and defaults to e.
    """

    kind: Kind
    scale: float
    log_base: float = math.e

    def __post_init__(self) -> None:
        if not (self.scale > 0.0 and math.isfinite(self.scale)):
            raise ValueError(f"scale must be a positive finite real, got {self.scale}")
        if self.kind in _LOG_KINDS:
            if not (self.log_base > 0.0 and self.log_base != 1.0 and math.isfinite(self.log_base)):
                raise ValueError(f"log_base must be positive and != 1, got {self.log_base}")

    @property
    def descriptor(self) -> str:
        if self.kind in _LOG_KINDS:
            return f"{self.kind.value}(scale={self.scale:g}, base={self.log_base:g})"
        return f"{self.kind.value}(sigma={self.scale:g})"

    def _log(self, z: np.ndarray) -> np.ndarray:
        return np.log(z) / math.log(self.log_base)

    def cdf(self, z):
        """P(Z <= z); 0 below the support, approaching 1 at +inf."""
        z_arr = np.asarray(z, dtype=float)
        if self.kind is Kind.RAYLEIGH:
            out = np.asarray(rayleigh_cdf(RayleighParams(self.scale), np.maximum(z_arr, 0.0)))
            out = np.where(z_arr < 0.0, 0.0, out)
        elif self.kind is Kind.INVERSE_RAYLEIGH:
            with np.errstate(divide="ignore"):
                out = np.where(
                    z_arr <= 0.0,
                    0.0,
                    np.exp(-1.0 / (2.0 * self.scale**2 * np.maximum(z_arr, 1e-300) ** 2)),
                )
        else:
            zsafe = np.maximum(z_arr, 1e-300)
            out = np.where(z_arr <= 0.0, 0.0, self._additive_cdf(self._log(zsafe)))
        return float(out) if np.isscalar(z) else out

    def quantile(self, p):
        """Inverse CDF on [0, 1); exact inverse of :meth:`cdf` on the support interior."""
        p_arr = np.asarray(p, dtype=float)
        if np.any((p_arr < 0.0) | (p_arr >= 1.0)):
            raise ValueError("quantile requires 0 <= p < 1")
        if self.kind is Kind.RAYLEIGH:
            out = np.asarray(rayleigh_quantile(RayleighParams(self.scale), p_arr))
        elif self.kind is Kind.INVERSE_RAYLEIGH:
            with np.errstate(divide="ignore"):
                out = np.where(
                    p_arr == 0.0,
                    0.0,
                    1.0 / (self.scale * np.sqrt(-2.0 * np.log(np.maximum(p_arr, 1e-300)))),
                )
        else:
            out = np.power(self.log_base, self._additive_quantile(p_arr))
        return float(out) if np.isscalar(p) else out

    def pdf(self, z):
        """Density with respect to Lebesgue measure on the positive reals."""
        z_arr = np.asarray(z, dtype=float)
        s = self.scale
        if self.kind is Kind.RAYLEIGH:
            out = np.where(z_arr < 0.0, 0.0, z_arr / s**2 * np.exp(-(z_arr**2) / (2 * s**2)))
        elif self.kind is Kind.INVERSE_RAYLEIGH:
            zsafe = np.maximum(z_arr, 1e-300)
            out = np.where(
                z_arr <= 0.0, 0.0, np.exp(-1.0 / (2 * s**2 * zsafe**2)) / (s**2 * zsafe**3)
            )
        else:
            zsafe = np.maximum(z_arr, 1e-300)
            jac = 1.0 / (zsafe * math.log(self.log_base))
            out = np.where(z_arr <= 0.0, 0.0, self._additive_pdf(self._log(zsafe)) * jac)
        return float(out) if np.isscalar(z) else out

    def sample(self, sampler: SeededSampler, count: int, start: int = 0) -> np.ndarray:
        """``count`` i.i.d. draws at absolute draw indices ``start..``.

        Inverse-CDF transform of the sampler's uniform stream, so the result
        is a pure function of ``(sampler.seed, sampler.stream_index, start)``.
        """
        if count < 1:
            raise ValueError(f"count must be >= 1, got {count}")
        return self.quantile(sampler.uniforms(count, start))

    # Underlying symmetric additive laws (zero-centered, scale = self.scale).

    def _additive_cdf(self, a: np.ndarray) -> np.ndarray:
        s = self.scale
        if self.kind is Kind.LOG_GAUSSIAN:
            return ndtr(a / s)
        if self.kind is Kind.LOG_LAPLACE:
            return np.where(a < 0.0, 0.5 * np.exp(a / s), 1.0 - 0.5 * np.exp(-a / s))
        return np.clip((a + s) / (2.0 * s), 0.0, 1.0)

    def _additive_quantile(self, p: np.ndarray) -> np.ndarray:
        s = self.scale
        if self.kind is Kind.LOG_GAUSSIAN:
            with np.errstate(divide="ignore"):
                return np.where(p == 0.0, -np.inf, s * ndtri(np.maximum(p, 1e-300)))
        if self.kind is Kind.LOG_LAPLACE:
            with np.errstate(divide="ignore"):
                return np.where(
                    p < 0.5,
                    s * np.log(np.maximum(2.0 * p, 1e-300)),
                    -s * np.log1p(-np.minimum(2.0 * p - 1.0, 1.0 - 1e-16)),
                )
        return s * (2.0 * p - 1.0)

    def _additive_pdf(self, a: np.ndarray) -> np.ndarray:
        s = self.scale
        if self.kind is Kind.LOG_GAUSSIAN:
            return np.exp(-(a**2) / (2 * s**2)) / (s * math.sqrt(2 * math.pi))
        if self.kind is Kind.LOG_LAPLACE:
            return np.exp(-np.abs(a) / s) / (2 * s)
        return np.where(np.abs(a) <= s, 1.0 / (2 * s), 0.0)


def rayleigh(params: RayleighParams | None = None) -> SmoothingDistribution:
    """Rayleigh smoothing law, unit-median scale by default."""
    params = params or RayleighParams.unit_median()
    return SmoothingDistribution(Kind.RAYLEIGH, params.sigma)


def inverse_rayleigh(params: RayleighParams | None = None) -> SmoothingDistribution:
    """Reciprocal-Rayleigh law: the distribution of 1/beta."""
    params = params or RayleighParams.unit_median()
    return SmoothingDistribution(Kind.INVERSE_RAYLEIGH, params.sigma)


def log_gaussian(scale: float = 1.0, log_base: float = math.e) -> SmoothingDistribution:
    return SmoothingDistribution(Kind.LOG_GAUSSIAN, scale, log_base)


def log_laplace(scale: float = 1.0, log_base: float = math.e) -> SmoothingDistribution:
    return SmoothingDistribution(Kind.LOG_LAPLACE, scale, log_base)


def log_uniform(scale: float = 1.0, log_base: float = math.e) -> SmoothingDistribution:
    return SmoothingDistribution(Kind.LOG_UNIFORM, scale, log_base)
