"""Local-fit weight constructions.

Four flavors, all at a single target point x with bandwidth h:

* plain kernel weights (local constant);
* local-linear weights built from kernel moment sums;
* their normalized version (sums to one, kills the linear term);
* the deconvoluting (DK) analogue, where kernel and moment sums are replaced
  by deconvoluting kernels of orders 0..2 evaluated at the contaminated
  covariate;
* the complex-replicate (CE) analogue: normalized local-linear weights are
  averaged over covariate copies perturbed by imaginary gaussian noise
  i * sigma_u * Z, which unbiases the smoothing in expectation; the real
  part is kept after a noise-consistency check on the imaginary part.
"""

import numpy as np

from . import _backend
from .deconv import deconv_kernel, smoothing_kernel
from .error_models import _as_model
from .exceptions import DegenerateNeighborhoodError, DomainError, NumericError

#: Relative floor for the local-linear determinant s0*s2 - s1^2.
DET_REL_TOL = 1e-12

#: Cap on the fraction of rejected replicate columns before a neighborhood
#: is declared degenerate.
CE_REJECT_LIMIT = 0.1

_CE_REDRAW_ROUNDS = 16


def _check_point(x, h):
    if not np.isfinite(x):
        raise DomainError("target point must be finite")
    if not np.isfinite(h) or h <= 0.0:
        raise DomainError("bandwidth must be positive")


def kernel_weights(xdata, x, h):
    """Local-constant weights K((X_j - x) / h) / h."""
    _check_point(x, h)
    xdata = np.asarray(xdata, dtype=np.float64)
    return _backend.kernel_values((xdata - x) / h) / h


def _moment_sums(u, k):
    s0 = k.mean()
    s1 = (u * k).mean()
    s2 = (u * u * k).mean()
    return s0, s1, s2


def weight_local_linear(xdata, x, h):
    """Local-linear weights K_h(X_j - x) * s2 - ((X_j - x)/h) K_h(X_j - x) * s1,
    with s_r the r-th scaled moment sum (means over the sample)."""
    _check_point(x, h)
    xdata = np.asarray(xdata, dtype=np.float64)
    u = (xdata - x) / h
    k = _backend.kernel_values(u) / h
    _, s1, s2 = _moment_sums(u, k)
    return k * s2 - u * k * s1


def weight_normalized(xdata, x, h):
    """Local-linear weights normalized to sum to one.

    Raises DegenerateNeighborhoodError when the determinant s0*s2 - s1^2 is
    at or below the relative floor (no usable mass around x).
    """
    _check_point(x, h)
    xdata = np.asarray(xdata, dtype=np.float64)
    n = xdata.size
    u = (xdata - x) / h
    k = _backend.kernel_values(u) / h
    s0, s1, s2 = _moment_sums(u, k)
    det = s0 * s2 - s1 * s1
    scale = max(abs(s0 * s2), s1 * s1)
    if det <= DET_REL_TOL * scale or scale == 0.0:
        raise DegenerateNeighborhoodError(
            f"local-linear system is singular at x={x:g} (h={h:g})"
        )
    return (k * s2 - u * k * s1) / (n * det)


def weight_dk(model, wdata, x, h, weight_order="local_linear"):
    """Deconvoluting-kernel weights at a point.

    With no error model this degrades gracefully to the ideal weights (exact
    same code path, so results are bit identical).  Otherwise kernel values
    and moment sums are replaced by deconvoluting kernels of orders 0..2.
    """
    model = _as_model(model)
    _check_point(x, h)
    wdata = np.asarray(wdata, dtype=np.float64)
    if model.family == "none" or model.sigma_u == 0.0:
        if weight_order == "local_constant":
            return kernel_weights(wdata, x, h)
        return weight_local_linear(wdata, x, h)
    v = (wdata - x) / h
    k0 = deconv_kernel(model, 0, h, v) / h
    if weight_order == "local_constant":
        return k0
    k1 = deconv_kernel(model, 1, h, v) / h
    k2 = deconv_kernel(model, 2, h, v) / h
    return k0 * k2.mean() - k1 * k1.mean()


def check_imag_noise(avg, imsq, count, label):
    """Assert that the imaginary part of replicate-averaged weights is
    explainable as Monte Carlo noise: mean |imag| must stay below ten times
    the mean standard error of the imaginary parts across replicates."""
    if count < 2:
        return
    mean_im = avg.imag
    var_im = np.maximum(imsq - count * mean_im**2, 0.0) / (count - 1)
    se = np.sqrt(var_im / count)
    lhs = float(np.abs(mean_im).mean())
    rhs = 10.0 * float(se.mean()) + 1e-14 * float(np.abs(avg).mean())
    if lhs > rhs:
        raise NumericError(
            "imaginary part of replicate-averaged weights exceeds its Monte "
            f"Carlo noise level at {label} (|imag|={lhs:.3e}, 10*SE={rhs:.3e})"
        )


class CeReplicateEngine:
    """One replicate matrix, many target points.

    Holds the imaginary-noise copies w + i * sigma * z (as the raw z matrix)
    together with trigonometric/hyperbolic tables of the data and replicate
    entries; averaged weights at each target then need no transcendentals in
    the inner sweep.  Rejected replicate columns (degenerate local-linear
    systems) are redrawn in place, so later targets see the refreshed matrix;
    more than 10 percent cumulative rejections at one target raise
    DegenerateNeighborhoodError.
    """

    def __init__(self, wdata, sigma, h, b_star=250, rng=None, z=None):
        self.w = np.ascontiguousarray(wdata, dtype=np.float64)
        if not np.isfinite(h) or h <= 0.0:
            raise DomainError("bandwidth must be positive")
        if not np.isfinite(sigma) or sigma <= 0.0:
            raise DomainError("the replicate engine needs sigma_u > 0")
        self.sigma = float(sigma)
        self.h = float(h)
        self.rng = rng
        if z is None:
            if rng is None:
                raise DomainError("either a Generator or a replicate matrix is needed")
            if not isinstance(b_star, (int, np.integer)) or b_star < 1:
                raise DomainError("b_star must be a positive integer")
            z = rng.standard_normal((self.w.size, int(b_star)))
        else:
            z = np.array(z, dtype=np.float64, copy=True, order="C")
            if z.ndim != 2 or z.shape[0] != self.w.size:
                raise DomainError("replicate matrix must be (n, b_star)")
        self.z = z
        self.b = z.shape[1]
        scaled = self.w / self.h
        self._cos_a = np.cos(scaled)
        self._sin_a = np.sin(scaled)
        self._rebuild_columns(slice(None))

    def _rebuild_columns(self, cols):
        p = self.sigma * self.z[:, cols] / self.h
        if not hasattr(self, "_cosh_p"):
            self._cosh_p = np.empty_like(self.z)
            self._sinh_p = np.empty_like(self.z)
        self._cosh_p[:, cols] = np.cosh(p)
        self._sinh_p[:, cols] = np.sinh(p)

    def weights_at(self, x, assert_imag=True):
        """Replicate-averaged complex normalized weights at target x (real or
        complex).  The real part is the usable weight vector; the imaginary
        part is kept for the caller-side noise check when assert_imag is
        False."""
        x = complex(x)
        rejected_total = 0
        for _ in range(_CE_REDRAW_ROUNDS):
            wsum, imsq, accept = _backend.ce_weight_sums_tabled(
                self.w,
                self.z,
                self.sigma,
                self.h,
                x.real,
                x.imag,
                DET_REL_TOL,
                self._cos_a,
                self._sin_a,
                self._cosh_p,
                self._sinh_p,
            )
            bad = ~accept
            nbad = int(bad.sum())
            if nbad == 0:
                break
            rejected_total += nbad
            if rejected_total > CE_REJECT_LIMIT * self.b:
                raise DegenerateNeighborhoodError(
                    f"more than {CE_REJECT_LIMIT:.0%} of replicate draws "
                    f"rejected at x={x.real:g} (h={self.h:g})"
                )
            if self.rng is None:
                raise DegenerateNeighborhoodError(
                    f"replicate draws rejected at x={x.real:g} with no "
                    "generator available for redraws"
                )
            self.z[:, bad] = self.rng.standard_normal((self.w.size, nbad))
            self._rebuild_columns(bad)
        else:
            raise DegenerateNeighborhoodError(
                f"replicate redraws did not stabilize at x={x.real:g} "
                f"(h={self.h:g})"
            )
        avg = wsum / self.b
        if assert_imag:
            check_imag_noise(avg, imsq, self.b, f"x={x.real:g}")
        return avg, imsq


def weight_ce(model, wdata, x, h, b_star=250, rng=None):
    """Complex-replicate weights: real part of normalized local-linear
    weights averaged over b_star imaginary-noise copies of the data.

    Requires a gaussian (or degenerate) error model.  With sigma_u = 0 the
    replicates coincide with the data and the result equals
    weight_normalized exactly, for any b_star.
    """
    model = _as_model(model)
    if model.family == "laplace":
        raise DomainError("complex-replicate weights require gaussian errors")
    _check_point(x, h)
    wdata = np.ascontiguousarray(wdata, dtype=np.float64)
    if model.sigma_u == 0.0:
        return weight_normalized(wdata, x, h)
    engine = CeReplicateEngine(wdata, model.sigma_u, float(h), b_star, rng)
    avg, _ = engine.weights_at(complex(x))
    return np.ascontiguousarray(avg.real)
