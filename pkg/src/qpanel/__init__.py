"""Bayesian non-parametric quantile panel regression with a common factor.

Public surface: panel ingestion, model specification, the Gibbs sampler and
its draw store, predictive quantiles and scoring, impulse responses, and
variance decompositions.
"""

from .ald import QuantileConstants, ald_cdf, ald_log_density, check_loss, quantile_constants
from .errors import (
    ChainError,
    ConfigError,
    ContractError,
    DateRangeError,
    DomainError,
    InsufficientDataError,
    MissingDataError,
    NumericalError,
    QPanelError,
    SchemaError,
)
from .forecast import (
    QS_GRID,
    WEIGHT_SCHEMES,
    ScoreTable,
    crps_weight,
    predict_quantiles,
    quantile_score,
    qw_crps,
    recursive_oos,
)
from .gibbs import DEFAULT_QUANTILES, ChainState, DrawStore, Hyper, ModelSpec, run_chain
from .panel import (
    CovariateSpec,
    DesignMatrix,
    PanelDataset,
    build_all_designs,
    build_design,
    forecast_covariates,
    load_panel,
    train_holdout_split,
)
from .scenario import (
    GirfResult,
    VarianceDecomposition,
    girf_factor_shock,
    girf_fci_shock,
    variance_decomposition,
)

__version__ = "0.1.0"

__all__ = [
    "QuantileConstants",
    "quantile_constants",
    "check_loss",
    "ald_cdf",
    "ald_log_density",
    "QPanelError",
    "ConfigError",
    "SchemaError",
    "MissingDataError",
    "InsufficientDataError",
    "DateRangeError",
    "DomainError",
    "NumericalError",
    "ContractError",
    "ChainError",
    "PanelDataset",
    "CovariateSpec",
    "DesignMatrix",
    "load_panel",
    "build_design",
    "build_all_designs",
    "forecast_covariates",
    "train_holdout_split",
    "DEFAULT_QUANTILES",
    "Hyper",
    "ModelSpec",
    "ChainState",
    "DrawStore",
    "run_chain",
    "predict_quantiles",
    "quantile_score",
    "crps_weight",
    "qw_crps",
    "ScoreTable",
    "recursive_oos",
    "WEIGHT_SCHEMES",
    "QS_GRID",
    "VarianceDecomposition",
    "GirfResult",
    "variance_decomposition",
    "girf_factor_shock",
    "girf_fci_shock",
    "__version__",
]
