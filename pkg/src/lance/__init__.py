"""Bayesian learning of local dependence with varying-bandwidth Cholesky factors."""

from .model import (
    CholeskyModel,
    DataMatrix,
    Hyperparameters,
    assemble_precision,
    mcd_from_precision,
    precision_logdet,
    validate_bandwidths,
)
from .regression import BandProfile, residual_profile, coefficients_at, cov_factor_at
from .posterior import (
    BandwidthPosterior,
    FitReport,
    bandwidth_log_posterior,
    ridge_fit,
    sample_posterior,
    select_bandwidths,
)
from .cv import lpd_cv, make_splits, log_marginal_test
from .simulation import (
    TrueModelSpec,
    generate_truth,
    recovery_metrics,
    roc_sweep,
    sample_data,
)
from .applications import (
    best_linear_predict,
    fit_qda,
    ingest_csv,
    ingest_ucr_timeseries,
    prediction_error_table,
    qda_classify,
)

__version__ = "0.1.0"
