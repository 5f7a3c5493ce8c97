"""Diffusion-time anomaly detectors.

Thin wrapper over the compiled ``_dtpm`` extension.
"""

from ._dtpm import (
    ConfigError,
    ContractError,
    DataError,
    DimensionError,
    DomainError,
    Error,
    IndexError,
    MetricError,
    Model,
    NumericError,
    Schedule,
    analytic_scores,
    auc_pr,
    auc_roc,
    build_schedule,
    f1_at_contamination,
    fit,
    logsumexp,
    nonparametric_scores,
    run_cli,
)

__all__ = [
    "ConfigError",
    "ContractError",
    "DataError",
    "DimensionError",
    "DomainError",
    "Error",
    "IndexError",
    "MetricError",
    "Model",
    "NumericError",
    "Schedule",
    "analytic_scores",
    "auc_pr",
    "auc_roc",
    "build_schedule",
    "f1_at_contamination",
    "fit",
    "logsumexp",
    "nonparametric_scores",
    "run_cli",
]
