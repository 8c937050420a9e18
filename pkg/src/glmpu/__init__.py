"""Local detectors for small frequency deviations in multi-sensor sinusoids."""

from .detectors import (
    DetectorId,
    FrequencyBank,
    GridSpec,
    KappaPair,
    amplitude_ml_alt,
    amplitude_ml_null,
    compute_statistic,
    glmp_one_sided,
    glmpu_statistic,
    glrt_known_amplitudes,
    glrt_statistic,
    lmpu_statistic,
    lrt_statistic,
    ml_frequency,
    score_first,
    score_second,
)
from .bench import CostReport, flop_estimate, runtime_sweep
from .estimators import LocalFrequencyDetector
from .montecarlo import (
    Axis,
    CalibratedDetector,
    DetectionCurve,
    InsufficientTrialsError,
    UnbiasednessReport,
    calibrate_threshold,
    derive_seed,
    detection_curve,
    estimate_pd,
    roc_curve,
    search_kappa2,
    verify_unbiasedness,
)
from .signal_model import (
    Hypothesis,
    ObservationSet,
    Scenario,
    generate_observations,
    loglik,
    ramp_diagonal,
    simulate_batch,
    snr_to_variance,
    steering_vector,
)

__version__ = "0.1.0"
