"""Robustness certificates for classifiers smoothed over multiplicative factors."""

from .certify import (
    Abstain,
    Certificate,
    Method,
    ProbBounds,
    SampleCounts,
    Side,
    certify_from_counts,
    certify_inverse_rayleigh,
    certify_rayleigh,
    certify_rayleigh_closed_form,
    certify_rayleigh_explicit,
    clopper_pearson,
    log_space_radius,
    reduced_cdf_map,
)
from .distributions import (
    Kind,
    RayleighParams,
    ScaleTarget,
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
from .multicert import (
    McEstimate,
    MultiCertProblem,
    RegionQuery,
    Verdict,
    in_robust_region,
    scan_gamma_grid,
    solve_thresholds,
    weighted_expsum_cdf,
)
from .realistic import (
    ErrorBudget,
    RealisticConfig,
    RealisticResult,
    adjust_probabilities,
    certify_realistic,
    error_budget,
    estimate_conversion_error,
    gaussian_l2_radius,
    min_samples_for_quantile_bound,
    quantile_upper_confidence,
)
from .rng import SeededSampler
from .runtime import (
    BaseClassifier,
    ConstantClassifier,
    HashLabelClassifier,
    LinearClassifier,
    PredictionResult,
    SmoothedClassifier,
    SmoothingConfig,
    ThresholdOracle,
    empirical_sweep,
    exact_oracle_probability,
    load_classifier,
    smoothed_predict_certify,
)
from .transforms import (
    BadMagicError,
    OutOfRangeError,
    TensorFormatError,
    TruncatedPayloadError,
    conversion_error,
    conversion_error_diff,
    gamma_correct,
    gamma_correct_batch,
    quantize8,
    read_tensor,
    scale_interpolate,
    validate_image,
    write_tensor,
)

__version__ = "0.1.0"
