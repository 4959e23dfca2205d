"""Circular primitives: wrapping, means, dissimilarity, von Mises draws."""

import numpy as np

from .exceptions import DomainError, UndefinedMeanError

TWO_PI = 2.0 * np.pi

#: Relative floor on the resultant length below which the circular mean is
#: treated as undefined (scaled by the sample size).
RESULTANT_TOL = 1e-12


def wrap_angle(theta):
    """Wrap angles to [-pi, pi).

    +pi maps to -pi so the interval stays half-open.  Scalars come back as
    Python floats, arrays as float64 arrays.
    """
    arr = np.asarray(theta, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise DomainError("angles must be finite")
    out = np.mod(arr + np.pi, TWO_PI) - np.pi
    # np.mod can land exactly on 2*pi through rounding; fold that edge back.
    out = np.where(out >= np.pi, out - TWO_PI, out)
    if np.ndim(theta) == 0:
        return float(out)
    return out


def circular_mean(angles):
    """Direction of the resultant vector of a sample of angles.

    Raises UndefinedMeanError when the resultant length is numerically zero
    (antipodal or empty-direction samples have no meaningful mean).
    """
    arr = np.asarray(angles, dtype=np.float64)
    if arr.size == 0:
        raise DomainError("circular mean of an empty sample")
    if not np.all(np.isfinite(arr)):
        raise DomainError("angles must be finite")
    s = np.sin(arr).sum()
    c = np.cos(arr).sum()
    if np.hypot(s, c) <= RESULTANT_TOL * arr.size:
        raise UndefinedMeanError("resultant length is numerically zero")
    return wrap_angle(float(np.arctan2(s, c)))


def cosine_dissimilarity(a, b):
    """1 - cos(a - b), the squared-error analogue for angles (range [0, 2])."""
    return 1.0 - np.cos(np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64))


def sample_von_mises(mu, kappa, rng, size=None):
    """Draw von Mises angles with mode mu and concentration kappa.

    kappa = 0 gives the uniform distribution on the circle.  mu may be an
    array (one mean per draw).  Sampling is the wrapped-Cauchy envelope
    rejection method as implemented by numpy's Generator; draws are wrapped
    to [-pi, pi).
    """
    if not np.all(np.isfinite(mu)):
        raise DomainError("mu must be finite")
    if not np.isfinite(kappa) or kappa < 0.0:
        raise DomainError("kappa must be finite and nonnegative")
    draws = rng.vonmises(mu, kappa, size)
    return wrap_angle(draws)
