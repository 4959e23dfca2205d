"""Estimator drivers: data containers, configuration, grid evaluation.

Five estimators share one driver:

* "ideal"  - smooths the angles against the true covariate (needs x);
* "naive"  - same machinery against the contaminated covariate;
* "dk"     - deconvoluting-kernel weights on the contaminated covariate;
* "ce"     - complex-replicate averaged weights (gaussian errors);
* "os"     - one-step spectral correction: naive numerator components times
             the covariate density estimate are deconvolved in the Fourier
             domain on an extended grid and interpolated back.

Every estimator produces the two smoothed trigonometric components g1
(sine) and g2 (cosine); the fitted angle is atan2(g1, g2) where at least one
component clears a relative floor, and is recorded as undefined elsewhere.
"""

from dataclasses import dataclass, replace

import numpy as np

from ._backend import kernel_values
from .angles import wrap_angle
from .deconv import EvaluationGrid, deconv_kernel_engine, fourier_deconvolve
from .error_models import NO_ERROR, ErrorModel, _as_model
from .exceptions import DegenerateNeighborhoodError, DomainError
from .weights import DET_REL_TOL, CeReplicateEngine, weight_normalized

ESTIMATORS = ("ideal", "naive", "dk", "ce", "os")
WEIGHT_ORDERS = ("local_constant", "local_linear")

#: Relative floor defining when an atan2 pair counts as undefined.
ATAN2_REL_TOL = 1e-12

_OS_MIN_POINTS = 512
_OS_SPAN_FACTOR = 3.0


@dataclass(frozen=True)
class Dataset:
    """Angles theta, contaminated covariate w, optional true covariate x."""

    theta: np.ndarray
    w: np.ndarray
    x: np.ndarray = None

    def __post_init__(self):
        theta = wrap_angle(np.asarray(self.theta, dtype=np.float64))
        w = np.ascontiguousarray(self.w, dtype=np.float64)
        if theta.ndim != 1 or w.shape != theta.shape:
            raise DomainError("theta and w must be equal-length vectors")
        # Loading tiny files is allowed; estimators enforce n >= 5 at fit
        # time.
        if theta.size < 2:
            raise DomainError("at least two observations are required")
        if not np.all(np.isfinite(w)):
            raise DomainError("covariates must be finite")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "w", w)
        if self.x is not None:
            x = np.ascontiguousarray(self.x, dtype=np.float64)
            if x.shape != theta.shape or not np.all(np.isfinite(x)):
                raise DomainError("x must match theta and be finite")
            object.__setattr__(self, "x", x)

    @property
    def n(self):
        return self.theta.size


@dataclass(frozen=True)
class FitConfig:
    estimator: str
    h: float
    error: ErrorModel = NO_ERROR
    weight_order: str = "local_linear"
    b_star: int = 250
    seed: int = 0

    def __post_init__(self):
        if self.estimator not in ESTIMATORS:
            raise DomainError(f"unknown estimator {self.estimator!r}")
        if self.weight_order not in WEIGHT_ORDERS:
            raise DomainError(f"unknown weight order {self.weight_order!r}")
        if not np.isfinite(self.h) or self.h <= 0.0:
            raise DomainError("bandwidth must be positive")
        if self.error is None:
            object.__setattr__(self, "error", NO_ERROR)
        if self.estimator == "ce" and self.error.family == "laplace":
            raise DomainError("the ce estimator requires gaussian errors")
        if self.estimator in ("ce", "os") and self.weight_order != "local_linear":
            raise DomainError(f"the {self.estimator} estimator is local-linear only")
        if not isinstance(self.b_star, (int, np.integer)) or self.b_star < 1:
            raise DomainError("b_star must be a positive integer")


@dataclass(frozen=True)
class FitResult:
    """Fitted components on a grid of points.

    g1/g2 are the smoothed sine and cosine components feeding atan2 (their
    common positive scale is irrelevant to the angle), m_hat is the fitted
    angle in [-pi, pi) with NaN at undefined points, defined the boolean
    mask, atan2_tol the floor that decided definedness.
    """

    points: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    m_hat: np.ndarray
    defined: np.ndarray
    atan2_tol: float
    config: FitConfig

    def interpolated(self):
        """m_hat with undefined entries filled by circular interpolation
        between the nearest defined neighbors (reporting convenience; the
        estimator itself never interpolates)."""
        if not self.defined.any():
            raise DomainError("no defined fitted values to interpolate from")
        if self.defined.all():
            return self.m_hat.copy()
        pts = self.points
        good = np.flatnonzero(self.defined)
        sin_i = np.interp(pts, pts[good], np.sin(self.m_hat[good]))
        cos_i = np.interp(pts, pts[good], np.cos(self.m_hat[good]))
        filled = wrap_angle(np.arctan2(sin_i, cos_i))
        return np.where(self.defined, self.m_hat, filled)

    def to_csv(self, path):
        from . import dataio

        dataio.write_fit_result(self, path)


def _direct_components(theta, covariate, points, h, weight_order):
    """Ideal/naive components: n^-1 sum of trig values times local weights."""
    n = covariate.size
    u = (points[:, None] - covariate[None, :]) / h
    k = kernel_values(u) / h
    u = -u  # weights use (X_j - x) / h
    if weight_order == "local_constant":
        wmat = k
    else:
        s1 = (u * k).mean(axis=1)
        s2 = (u * u * k).mean(axis=1)
        wmat = k * s2[:, None] - u * k * s1[:, None]
    return (wmat @ np.sin(theta)) / n, (wmat @ np.cos(theta)) / n


def _dk_components(theta, w, points, model, h, weight_order):
    # values at (w_l - x_i) / h via the factored outer-difference path
    ws = w / h
    ps = points / h
    n = w.size
    k0 = deconv_kernel_engine(model, 0, h).eval_outer(ws, ps).T / h
    if weight_order == "local_constant":
        wmat = k0
    else:
        k1 = deconv_kernel_engine(model, 1, h).eval_outer(ws, ps).T / h
        k2 = deconv_kernel_engine(model, 2, h).eval_outer(ws, ps).T / h
        wmat = k0 * k2.mean(axis=1)[:, None] - k1 * k1.mean(axis=1)[:, None]
    return (wmat @ np.sin(theta)) / n, (wmat @ np.cos(theta)) / n


def _ce_components(theta, w, points, sigma, h, b_star, seed):
    sin_t = np.sin(theta)
    cos_t = np.cos(theta)
    g1 = np.zeros(points.size)
    g2 = np.zeros(points.size)
    if sigma == 0.0:
        for i, x in enumerate(points):
            try:
                wts = weight_normalized(w, x, h)
            except DegenerateNeighborhoodError:
                continue
            g1[i] = wts @ sin_t
            g2[i] = wts @ cos_t
        return g1, g2
    rng = np.random.default_rng(seed)
    engine = CeReplicateEngine(w, sigma, h, b_star, rng)
    for i, x in enumerate(points):
        try:
            avg, _ = engine.weights_at(complex(x))
        except DegenerateNeighborhoodError:
            continue
        g1[i] = avg.real @ sin_t
        g2[i] = avg.real @ cos_t
    return g1, g2


def _os_components(theta, w, points, model, h):
    lo = min(float(w.min()), float(points.min())) - _OS_SPAN_FACTOR * h
    hi = max(float(w.max()), float(points.max())) + _OS_SPAN_FACTOR * h
    span = hi - lo
    spacing = min(h / 8.0, span / (_OS_MIN_POINTS - 1))
    count = max(_OS_MIN_POINTS, int(np.ceil(span / spacing)) + 1)
    grid = EvaluationGrid(np.linspace(lo, hi, count))
    g = grid.points
    n = w.size
    u = (w[None, :] - g[:, None]) / h
    k = kernel_values(u) / h
    s0 = k.mean(axis=1)
    s1 = (u * k).mean(axis=1)
    s2 = (u * u * k).mean(axis=1)
    det = s0 * s2 - s1 * s1
    scale = np.maximum(np.abs(s0 * s2), s1 * s1)
    # interior normalized fit; |det| accepted on the extended grid, far-tail
    # points with no mass contribute zero to the transform input
    good = np.abs(det) > DET_REL_TOL * scale
    wmat = k * s2[:, None] - u * k * s1[:, None]
    raw1 = wmat @ np.sin(theta)
    raw2 = wmat @ np.cos(theta)
    dens = s0  # kernel density estimate of the covariate, same bandwidth
    with np.errstate(divide="ignore", invalid="ignore"):
        gs1 = np.where(good, raw1 / (n * det) * dens, 0.0)
        gs2 = np.where(good, raw2 / (n * det) * dens, 0.0)
    t1 = fourier_deconvolve(model, gs1, grid, h)
    t2 = fourier_deconvolve(model, gs2, grid, h)
    return np.interp(points, g, t1), np.interp(points, g, t2)


def evaluate_components(dataset, config, points):
    """Smoothed (sine, cosine) component arrays at arbitrary points."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    if points.ndim != 1 or points.size == 0:
        raise DomainError("points must be a nonempty vector")
    if not np.all(np.isfinite(points)):
        raise DomainError("points must be finite")
    if dataset.n < 5:
        raise DomainError("estimation requires at least five observations")
    est = config.estimator
    h = float(config.h)
    if est == "ideal":
        if dataset.x is None:
            raise DomainError("the ideal estimator needs the true covariate")
        return _direct_components(
            dataset.theta, dataset.x, points, h, config.weight_order
        )
    if est == "naive":
        return _direct_components(
            dataset.theta, dataset.w, points, h, config.weight_order
        )
    if est == "dk":
        if config.error.family == "none" or config.error.sigma_u == 0.0:
            # graceful degradation: identical code path to the naive fit
            # (at sigma_u = 0 the deconvoluting kernels are plain kernels)
            return _direct_components(
                dataset.theta, dataset.w, points, h, config.weight_order
            )
        return _dk_components(
            dataset.theta, dataset.w, points, config.error, h, config.weight_order
        )
    if est == "ce":
        return _ce_components(
            dataset.theta,
            dataset.w,
            points,
            config.error.sigma_u,
            h,
            int(config.b_star),
            config.seed,
        )
    return _os_components(dataset.theta, dataset.w, points, config.error, h)


def atan2_tolerance(g1, g2):
    """Relative floor below which both components count as zero."""
    peak = max(1.0, float(np.abs(g1).max()), float(np.abs(g2).max()))
    return ATAN2_REL_TOL * peak


def components_to_angles(g1, g2):
    """(m_hat, defined, tol) from component arrays."""
    tol = atan2_tolerance(g1, g2)
    defined = ~((np.abs(g1) < tol) & (np.abs(g2) < tol))
    m = np.full(g1.shape, np.nan)
    if defined.any():
        m[defined] = wrap_angle(np.arctan2(g1[defined], g2[defined]))
    return m, defined, tol


def fit(dataset, config, points):
    """Run one estimator over a vector of evaluation points."""
    if isinstance(points, EvaluationGrid):
        points = points.points
    points = np.ascontiguousarray(points, dtype=np.float64)
    g1, g2 = evaluate_components(dataset, config, points)
    m, defined, tol = components_to_angles(g1, g2)
    return FitResult(
        points=points,
        g1=g1,
        g2=g2,
        m_hat=m,
        defined=defined,
        atan2_tol=tol,
        config=config,
    )
