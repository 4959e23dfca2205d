"""Additive measurement-error models for the linear covariate.

The observed covariate is w = x + u with u independent of everything else.
Three families are supported: "none" (u identically zero), "gaussian" and
"laplace", the latter two parameterized by the standard deviation sigma_u so
that variances match across families.
"""

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError

FAMILIES = ("none", "gaussian", "laplace")


@dataclass(frozen=True)
class ErrorModel:
    family: str
    sigma_u: float = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(f"unknown error family {self.family!r}")
        if not np.isfinite(self.sigma_u) or self.sigma_u < 0.0:
            raise DomainError("sigma_u must be finite and nonnegative")
        if self.family == "none" and self.sigma_u != 0.0:
            raise DomainError("family 'none' requires sigma_u = 0")

    @property
    def variance(self):
        return self.sigma_u**2


NO_ERROR = ErrorModel("none")


def gaussian_error(sigma_u):
    return ErrorModel("gaussian", float(sigma_u))


def laplace_error(sigma_u):
    return ErrorModel("laplace", float(sigma_u))


def _as_model(model):
    """None is accepted everywhere a model is and means error-free."""
    return NO_ERROR if model is None else model


def characteristic_fn(model, t):
    """E exp(i t u) as a real function of t (all supported families are
    symmetric, so the characteristic function is real and even)."""
    model = _as_model(model)
    t = np.asarray(t, dtype=np.float64)
    if model.family == "none" or model.sigma_u == 0.0:
        return np.ones_like(t)
    if model.family == "gaussian":
        return np.exp(-0.5 * (model.sigma_u * t) ** 2)
    return 1.0 / (1.0 + 0.5 * (model.sigma_u * t) ** 2)


def density(model, u):
    """Error density evaluated at u; the 'none' family has no density."""
    model = _as_model(model)
    if model.family == "none" or model.sigma_u == 0.0:
        raise DomainError("a degenerate error model has no density")
    u = np.asarray(u, dtype=np.float64)
    s = model.sigma_u
    if model.family == "gaussian":
        return np.exp(-0.5 * (u / s) ** 2) / (s * math.sqrt(2.0 * math.pi))
    b = s / math.sqrt(2.0)
    return np.exp(-np.abs(u) / b) / (2.0 * b)


def sample_error(model, rng, size=None):
    """Draw measurement errors.  Laplace uses the inverse-CDF sampler (numpy's
    Generator implements exactly that), gaussian the ziggurat normal."""
    model = _as_model(model)
    if model.family == "none" or model.sigma_u == 0.0:
        return np.zeros(() if size is None else size)
    if model.family == "gaussian":
        return model.sigma_u * rng.standard_normal(size)
    return rng.laplace(0.0, model.sigma_u / math.sqrt(2.0), size)


def sigma_from_reliability(var_x, reliability):
    """Noise scale that makes Var(x) / (Var(x) + sigma_u^2) hit the target.

    reliability = 1 returns 0 (no noise); values must lie in (0, 1].
    """
    if not np.isfinite(var_x) or var_x <= 0.0:
        raise DomainError("var_x must be positive")
    if not np.isfinite(reliability) or not 0.0 < reliability <= 1.0:
        raise DomainError("reliability must lie in (0, 1]")
    return math.sqrt(var_x * (1.0 - reliability) / reliability)
