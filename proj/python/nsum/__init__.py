"""Network scale-up size estimation (C++ core)."""

from ._nsum import (
    NsumError,
    beta_mr_to_shapes,
    effective_sample_size,
    fit,
    fit_recall_calibration,
    gelman_rubin,
    log_beta,
    log_choose,
    log_gamma,
    prior_quantiles,
    recall_adjust_draws,
    reflect_into,
    scaleup,
    simulate,
    summarize,
)

__all__ = [
    "NsumError",
    "beta_mr_to_shapes",
    "effective_sample_size",
    "fit",
    "fit_recall_calibration",
    "gelman_rubin",
    "log_beta",
    "log_choose",
    "log_gamma",
    "prior_quantiles",
    "recall_adjust_draws",
    "reflect_into",
    "scaleup",
    "simulate",
    "summarize",
]
