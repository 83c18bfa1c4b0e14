"""Monte-Carlo smoothed classification over multiplicative factors.

The smoothed classifier draws random power factors, evaluates the base
classifier on every transformed copy of the input, and certifies the modal
label from exact binomial confidence bounds, abstaining when the lower bound
does not clear 1/2.  Evaluation is batched: base classifiers label a whole
stack of transformed inputs at once, which keeps 10^5-sample runs fast.

Shipped base classifiers are synthetic and analytic on purpose — the
single-pixel threshold rule admits an exact smoothed probability, making it
the ground-truth oracle the test suite certifies against.
"""

from __future__ import annotations

import hashlib
import json
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .certify import (
    Abstain,
    Certificate,
    ProbBounds,
    SampleCounts,
    Side,
    certify_inverse_rayleigh,
    certify_rayleigh_closed_form,
    clopper_pearson,
    log_space_radius,
)
from .distributions import Kind, SmoothingDistribution, rayleigh
from .rng import SeededSampler
from .transforms import gamma_correct_batch, read_tensor, validate_image

__all__ = [
    "BaseClassifier",
    "ThresholdOracle",
    "ConstantClassifier",
    "HashLabelClassifier",
    "LinearClassifier",
    "load_classifier",
    "SmoothingConfig",
    "PredictionResult",
    "SmoothedClassifier",
    "smoothed_predict_certify",
    "empirical_sweep",
    "exact_oracle_probability",
]

_SELECTION_STREAM = 0
_ESTIMATION_STREAM = 1
_PREDICT_STREAM_BASE = 16


class BaseClassifier(ABC):
    """Deterministic labelling contract: same tensor in, same label out.

    Implementations must be safe for concurrent evaluation; all the shipped
    ones are stateless.
    """

    @abstractmethod
    def labels(self, batch: np.ndarray) -> np.ndarray:
        """Label a stack of inputs, shape (m, *dims) -> (m,) int array."""

    @property
    @abstractmethod
    def descriptor(self) -> str:
        """Short human-readable identity for reports."""

    def label(self, x: np.ndarray) -> int:
        return int(self.labels(np.asarray(x, dtype=float)[np.newaxis, ...])[0])


@dataclass(frozen=True)
class ThresholdOracle(BaseClassifier):
    """Single-pixel threshold rule with an exact smoothed probability.

    Predicts class 1 iff the first pixel is at least ``threshold``.  For a
    clean pixel ``pixel_value`` under power-factor smoothing the smoothed
    top-class probability is the factor law's CDF at ln(threshold)/ln(pixel).
    """

    pixel_value: float
    threshold: float

    def __post_init__(self) -> None:
        if not 0.0 < self.pixel_value < 1.0:
            raise ValueError(f"pixel_value must lie in (0, 1), got {self.pixel_value}")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold must lie in (0, 1), got {self.threshold}")

    def labels(self, batch: np.ndarray) -> np.ndarray:
        flat = batch.reshape(batch.shape[0], -1)
        return (flat[:, 0] >= self.threshold).astype(int)

    @property
    def descriptor(self) -> str:
        return f"threshold(pixel={self.pixel_value:g}, t={self.threshold:g})"

    def clean_input(self) -> np.ndarray:
        return np.array([self.pixel_value])


@dataclass(frozen=True)
class ConstantClassifier(BaseClassifier):
    constant_label: int = 0

    def labels(self, batch: np.ndarray) -> np.ndarray:
        return np.full(batch.shape[0], self.constant_label, dtype=int)

    @property
    def descriptor(self) -> str:
        return f"constant(label={self.constant_label})"


@dataclass(frozen=True)
class HashLabelClassifier(BaseClassifier):
    """Labels from a content hash: deterministic but uniformly scattered."""

    num_classes: int = 10

    def __post_init__(self) -> None:
        if self.num_classes < 2:
            raise ValueError(f"num_classes must be >= 2, got {self.num_classes}")

    def labels(self, batch: np.ndarray) -> np.ndarray:
        flat = np.ascontiguousarray(batch.reshape(batch.shape[0], -1), dtype="<f8")
        out = np.empty(batch.shape[0], dtype=int)
        for i, row in enumerate(flat):
            digest = hashlib.blake2b(row.tobytes(), digest_size=8).digest()
            out[i] = int.from_bytes(digest, "little") % self.num_classes
        return out

    @property
    def descriptor(self) -> str:
        return f"hash(classes={self.num_classes})"


@dataclass(frozen=True)
class LinearClassifier(BaseClassifier):
    """argmax(W x + b) over flattened inputs; first index wins ties."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float)
        b = np.asarray(self.bias, dtype=float)
        if w.ndim != 2:
            raise ValueError(f"weights must be 2-D (classes, features), got shape {w.shape}")
        if b.shape != (w.shape[0],):
            raise ValueError(f"bias shape {b.shape} does not match {w.shape[0]} classes")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    def labels(self, batch: np.ndarray) -> np.ndarray:
        flat = batch.reshape(batch.shape[0], -1)
        if flat.shape[1] != self.weights.shape[1]:
            raise ValueError(
                f"input has {flat.shape[1]} features, classifier expects {self.weights.shape[1]}"
            )
        scores = flat @ self.weights.T + self.bias
        return np.argmax(scores, axis=1).astype(int)

    @property
    def descriptor(self) -> str:
        return f"linear(classes={self.weights.shape[0]}, features={self.weights.shape[1]})"


def load_classifier(manifest_path) -> BaseClassifier:
    """Build a base classifier from a JSON manifest.

    The linear form references MST1 tensors next to the manifest:
    ``{"weights": path, "bias": path, "classes": k}``.  Synthetic classifiers
    use a ``type`` tag instead: ``threshold`` (pixel_value, threshold),
    ``constant`` (label) or ``hash`` (classes).
    """
    manifest_path = Path(manifest_path)
    spec = json.loads(manifest_path.read_text())
    if "weights" in spec:
        weights = read_tensor(manifest_path.parent / spec["weights"])
        bias = read_tensor(manifest_path.parent / spec["bias"])
        classifier = LinearClassifier(weights, bias.reshape(-1))
        if classifier.weights.shape[0] != int(spec["classes"]):
            raise ValueError(
                f"{manifest_path}: manifest declares {spec['classes']} classes, "
                f"weights have {classifier.weights.shape[0]}"
            )
        return classifier
    kind = spec.get("type")
    if kind == "threshold":
        return ThresholdOracle(float(spec["pixel_value"]), float(spec["threshold"]))
    if kind == "constant":
        return ConstantClassifier(int(spec["label"]))
    if kind == "hash":
        return HashLabelClassifier(int(spec["classes"]))
    raise ValueError(f"{manifest_path}: unrecognized classifier manifest")


@dataclass(frozen=True)
class SmoothingConfig:
    """Two-phase Monte-Carlo protocol parameters.

    ``n0`` draws pick the candidate label, ``n`` fresh draws estimate its
    probability, and the whole mistake budget ``alpha`` is spent on the
    estimation bound.
    """

    n: int
    alpha: float
    dist: SmoothingDistribution = field(default_factory=rayleigh)
    seed: int = 0
    n0: int = 100

    def __post_init__(self) -> None:
        if self.n0 < 10:
            raise ValueError(f"n0 must be >= 10, got {self.n0}")
        if self.n < self.n0:
            raise ValueError(f"n must be >= n0 ({self.n0}), got {self.n}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")


@dataclass(frozen=True)
class PredictionResult:
    """Outcome of one smoothed prediction; certificate present iff not abstained."""

    label: int | None
    pa_lower: float
    certificate: Certificate | None
    counts: SampleCounts

    @property
    def abstained(self) -> bool:
        return self.label is None


def _modal_label(labels: np.ndarray) -> int:
    counts = np.bincount(labels)
    return int(np.argmax(counts))  # ties resolve to the lowest class index


def _certificate_for(dist: SmoothingDistribution, pa_lower: float, confidence: float):
    """Trivial-runner-up certificate matched to the smoothing law in use."""
    if dist.kind is Kind.RAYLEIGH:
        return certify_rayleigh_closed_form(pa_lower, confidence)
    if dist.kind is Kind.INVERSE_RAYLEIGH:
        return certify_inverse_rayleigh(ProbBounds.with_trivial_pb(pa_lower, confidence))
    if not math.isclose(dist.log_base, math.e):
        raise ValueError("log-space certification is only defined for base e")
    return log_space_radius(dist.kind, dist.scale, pa_lower, 1.0 - pa_lower, confidence)


def smoothed_predict_certify(
    base: BaseClassifier,
    x: np.ndarray,
    cfg: SmoothingConfig,
    transform: Callable[[np.ndarray, np.ndarray], np.ndarray] = gamma_correct_batch,
) -> PredictionResult:
    """Predict and certify in one pass, abstaining below the 1/2 bound.

    Phase 1 votes with ``cfg.n0`` draws; phase 2 re-estimates the winner on
    ``cfg.n`` fresh draws and converts the Clopper-Pearson lower bound into a
    certificate with the trivial runner-up estimate, using the interval rule
    that matches ``cfg.dist``.  All draws derive from ``cfg.seed``, so reruns
    reproduce the result bit-for-bit.
    """
    arr = validate_image(x)
    sampler = SeededSampler(cfg.seed)

    selection = cfg.dist.sample(sampler.stream(_SELECTION_STREAM), cfg.n0)
    candidate = _modal_label(base.labels(transform(arr, selection)))

    estimation = cfg.dist.sample(sampler.stream(_ESTIMATION_STREAM), cfg.n)
    hits = int(np.sum(base.labels(transform(arr, estimation)) == candidate))
    counts = SampleCounts(hits, cfg.n)

    pa_lower = clopper_pearson(counts, cfg.alpha, Side.LOWER)
    if pa_lower <= 0.5:
        return PredictionResult(None, pa_lower, None, counts)
    outcome = _certificate_for(cfg.dist, pa_lower, 1.0 - cfg.alpha)
    if isinstance(outcome, Abstain):
        return PredictionResult(None, pa_lower, None, counts)
    return PredictionResult(candidate, pa_lower, outcome, counts)


@dataclass
class SmoothedClassifier:
    """Prediction-only handle over the smoothed classifier, for sweeps.

    Each :meth:`predict` call uses the next derived sample stream, so a sweep
    is deterministic end to end while successive queries stay independent.
    Holds a call counter: use one instance per thread.
    """

    base: BaseClassifier
    cfg: SmoothingConfig
    transform: Callable[[np.ndarray, np.ndarray], np.ndarray] = gamma_correct_batch
    _calls: int = 0

    def predict(self, x: np.ndarray) -> int | None:
        """Modal label under ``cfg.n`` draws, or None when not confidently above 1/2."""
        sampler = SeededSampler(self.cfg.seed, _PREDICT_STREAM_BASE + self._calls)
        self._calls += 1
        factors = self.cfg.dist.sample(sampler, self.cfg.n)
        labels = self.base.labels(self.transform(np.asarray(x, dtype=float), factors))
        candidate = _modal_label(labels)
        hits = int(np.sum(labels == candidate))
        pa_lower = clopper_pearson(SampleCounts(hits, self.cfg.n), self.cfg.alpha, Side.LOWER)
        return candidate if pa_lower > 0.5 else None

    def reset(self) -> None:
        self._calls = 0


def empirical_sweep(
    predict: Callable[[np.ndarray], int | None],
    x: np.ndarray,
    step: float,
    gamma_max: float,
    expected_label: int | None = None,
    transform: Callable[[np.ndarray, np.ndarray], np.ndarray] = gamma_correct_batch,
) -> tuple[float, float] | None:
    """Walk the attack factor away from 1 until the prediction changes.

    Upward in additive increments of ``step`` to ``gamma_max``, downward in
    the same increments to a floor of ``step``; both ends are the last factor
    at which the prediction still matched the factor-1 label.  Returns None
    when the clean prediction is already wrong (or abstains).
    """
    if not step > 0.0:
        raise ValueError(f"step must be positive, got {step}")
    if not gamma_max > 1.0:
        raise ValueError(f"gamma_max must exceed 1, got {gamma_max}")
    arr = validate_image(x)

    def predict_at(gamma: float) -> int | None:
        return predict(transform(arr, np.array([gamma]))[0])

    label0 = predict_at(1.0)
    if label0 is None or (expected_label is not None and label0 != expected_label):
        return None

    right = 1.0
    k = 1
    while True:
        gamma = min(1.0 + k * step, gamma_max)
        if predict_at(gamma) != label0:
            break
        right = gamma
        if gamma >= gamma_max:
            break
        k += 1

    left = 1.0
    k = 1
    while True:
        gamma = 1.0 - k * step
        if gamma < step - 1e-12:
            break
        if predict_at(gamma) != label0:
            break
        left = gamma
        k += 1

    return left, right


def exact_oracle_probability(
    oracle: ThresholdOracle, attack_gamma: float, dist: SmoothingDistribution
) -> float:
    """Ground-truth smoothed top-class probability for the threshold oracle.

    Under attack ``gamma`` the smoothed pixel is pixel**(beta*gamma), so the
    top class wins iff beta <= beta*/gamma with beta* = ln t / ln pixel.
    """
    if not attack_gamma > 0.0:
        raise ValueError(f"attack_gamma must be positive, got {attack_gamma}")
    beta_star = np.log(oracle.threshold) / np.log(oracle.pixel_value)
    return float(dist.cdf(beta_star / attack_gamma))
