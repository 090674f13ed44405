"""Debiased UQPE estimation with multiplier-bootstrap uniform bands."""

from ._uqpe import (
    UqpeError,
    __version__,
    bandwidth_rot,
    bootstrap_quantile,
    empirical_quantile,
    estimate,
    kde,
    lambda_logit,
    lambda_riesz,
    run_mc_study,
    simulate_dataset,
    true_uqpe,
)

__all__ = [
    "UqpeError",
    "__version__",
    "bandwidth_rot",
    "bootstrap_quantile",
    "empirical_quantile",
    "estimate",
    "kde",
    "lambda_logit",
    "lambda_riesz",
    "run_mc_study",
    "simulate_dataset",
    "true_uqpe",
]
