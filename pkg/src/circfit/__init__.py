"""Nonparametric regression of a circular response on a noisy linear covariate.

The covariate is observed with additive error from a known family
(gaussian or laplace, or none). Fitting goes through ``Dataset`` +
``FitConfig`` + ``fit``; bandwidth selection through the ``select_*``
functions; simulation studies through ``simlab``.
"""

__version__ = "0.1.0"

from ._backend import BACKEND
from .angles import circular_mean, cosine_dissimilarity, wrap_angle
from .bandwidth import (
    BandwidthReport,
    amise_h,
    cv_loss,
    make_grid,
    select_cv_ce,
    select_naive_cv,
    select_oracle,
    select_simex,
)
from .dataio import load_dataset, read_fit_result, write_dataset, write_fit_result
from .error_models import (
    ErrorModel,
    gaussian_error,
    laplace_error,
    sigma_from_reliability,
)
from .exceptions import (
    CircfitError,
    DataError,
    DegenerateNeighborhoodError,
    DomainError,
    NumericError,
    SelectionError,
    UndefinedMeanError,
)
from .fit import Dataset, FitConfig, FitResult, evaluate_components, fit
from .simlab import PRESETS, Scenario, run_matrix, run_preset, true_regression

__all__ = [
    "BACKEND",
    "BandwidthReport",
    "CircfitError",
    "DataError",
    "Dataset",
    "DegenerateNeighborhoodError",
    "DomainError",
    "ErrorModel",
    "FitConfig",
    "FitResult",
    "NumericError",
    "PRESETS",
    "Scenario",
    "SelectionError",
    "UndefinedMeanError",
    "amise_h",
    "circular_mean",
    "cosine_dissimilarity",
    "cv_loss",
    "evaluate_components",
    "fit",
    "gaussian_error",
    "laplace_error",
    "load_dataset",
    "make_grid",
    "read_fit_result",
    "run_matrix",
    "run_preset",
    "select_cv_ce",
    "select_naive_cv",
    "select_oracle",
    "select_simex",
    "sigma_from_reliability",
    "true_regression",
    "wrap_angle",
    "write_dataset",
    "write_fit_result",
    "__version__",
]
