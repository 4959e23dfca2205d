"""Smoothing kernel and deconvolution machinery against frozen oracles.

The reference numbers were produced outside the package: kernel point
values from the closed form in 40-digit arithmetic, deconvoluting kernel
values by adaptive quadrature of the characteristic-function inversion
integral (derivative form), integrals by panelled Gauss-Legendre with
oscillatory tails handled in closed form.
"""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import integrate

from circfit.deconv import (
    EvaluationGrid,
    deconv_kernel,
    deconv_kernel_engine,
    fourier_deconvolve,
    fourier_deconvolve_quadrature,
    kernel_cf,
    kernel_cf_deriv,
    kernel_moments,
    smoothing_kernel,
)
from circfit.error_models import (
    NO_ERROR,
    density,
    gaussian_error,
    laplace_error,
    sample_error,
)
from circfit.exceptions import DomainError

# 40-digit closed-form evaluations of the smoothing kernel
KERNEL_POINTS = [
    (0.0, 0.14551309082687573556),
    (1e-4, 0.14551309074603711803),
    (0.05, 0.14549288182363926168),
    (0.3, 0.14478701185893758821),
    (1.0, 0.13761042289407183799),
    (2.5, 0.10161842037700074976),
    (7.0, -0.000071808343173573622581),
    (10.0, -0.00060345206024349065229),
    (31.4159, 0.000015447009110201606935),
]


def test_kernel_point_values():
    x = np.array([p for p, _ in KERNEL_POINTS])
    want = np.array([v for _, v in KERNEL_POINTS])
    assert_allclose(smoothing_kernel(x), want, rtol=1e-13, atol=1e-18)
    # and symmetric
    assert_allclose(smoothing_kernel(-x), want, rtol=1e-13, atol=1e-18)


def test_kernel_center_value():
    assert_allclose(smoothing_kernel(0.0), 16.0 / (35.0 * math.pi), rtol=1e-15)


def test_kernel_series_joins_closed_form():
    """No seam where the small-argument series hands over to the formula."""
    x = np.linspace(0.9, 1.1, 2001)
    vals = smoothing_kernel(x)
    # second differences stay tiny for a smooth function on a fine grid
    assert np.max(np.abs(np.diff(vals, 2))) < 1e-7


def test_kernel_cf_support():
    t = np.array([-1.5, -1.0, -0.3, 0.0, 0.3, 1.0, 1.5])
    want = np.where(np.abs(t) <= 1, (1 - t * t) ** 3, 0.0)
    assert_allclose(kernel_cf(t), want)
    assert kernel_cf(0.0) == 1.0


def test_kernel_cf_derivatives():
    t = np.linspace(-0.99, 0.99, 31)
    assert_allclose(kernel_cf_deriv(t, 1), -6 * t * (1 - t * t) ** 2, rtol=1e-12)
    assert_allclose(kernel_cf_deriv(t, 2), (1 - t * t) * (30 * t * t - 6), rtol=1e-12)
    assert_allclose(kernel_cf_deriv(t, 3), 72 * t - 120 * t**3, rtol=1e-12)
    assert kernel_cf_deriv(2.0, 2) == 0.0
    with pytest.raises(DomainError):
        kernel_cf_deriv(0.0, 4)


def test_kernel_moments():
    assert kernel_moments(0)[0] == 1.0
    assert kernel_moments(2)[0] == 6.0
    assert kernel_moments(4)[0] == 72.0
    assert kernel_moments(6)[0] == 720.0
    with pytest.raises(DomainError):
        kernel_moments(3)


def test_kernel_squared_moment_zero_order():
    """Parseval value for int K^2 checked by direct quadrature."""
    direct, _ = integrate.quad(lambda x: smoothing_kernel(x) ** 2, -80, 80, limit=600)
    assert_allclose(kernel_moments(0)[1], direct, atol=1e-6)


def test_kernel_integrates_to_one():
    # panelled Gauss-Legendre head plus closed-form oscillatory tails
    nodes, wts = np.polynomial.legendre.leggauss(24)
    head = 0.0
    edges = np.linspace(-60.0, 60.0, 241)
    for a, b in zip(edges[:-1], edges[1:]):
        xm = 0.5 * (a + b) + 0.5 * (b - a) * nodes
        head += 0.5 * (b - a) * float((wts * smoothing_kernel(xm)).sum())
    tail = 0.0
    for coef, power, trig in ((48, -4, "cos"), (-288, -5, "sin"), (-720, -6, "cos"), (720, -7, "sin")):
        val, _ = integrate.quad(
            lambda x, p=power: x**p / np.pi,
            60,
            np.inf,
            weight=trig,
            wvar=1.0,
            limit=800,
            epsabs=1e-13,
        )
        tail += coef * val
    assert abs(head + 2.0 * tail - 1.0) < 1e-10


# quadrature of the inversion integral, error below 1e-12 in every case
DECONV_POINTS = [
    ("gaussian", 1.0, 1.0, 0.0, 0, 1.5418584549155834e-01),
    ("gaussian", 1.0, 1.0, 0.7, 0, 1.4968156215630499e-01),
    ("gaussian", 1.0, 1.0, 0.7, 1, 1.1749509647551577e-01),
    ("gaussian", 1.0, 1.0, 0.7, 2, -7.5841613546815345e-02),
    ("gaussian", 0.5, 0.9, -1.3, 0, 1.3435218278211480e-01),
    ("gaussian", 0.5, 0.9, -1.3, 3, -1.5434316380173668e-01),
    ("laplace", 1.0, 1.0, 0.7, 0, 1.4914805571200149e-01),
    ("laplace", 0.8, 0.6, 2.1, 0, 1.2011103074012078e-01),
    ("laplace", 0.8, 0.6, 2.1, 1, 3.0147197072181070e-01),
    ("laplace", 0.8, 0.6, 2.1, 2, 5.3517570632504730e-01),
    ("laplace", 1.0, 1.3, -0.4, 3, 9.1054423963307388e-02),
]


@pytest.mark.parametrize("family,sigma,h,v,order,want", DECONV_POINTS)
def test_deconv_kernel_frozen_values(family, sigma, h, v, order, want):
    model = gaussian_error(sigma) if family == "gaussian" else laplace_error(sigma)
    got = deconv_kernel(model, order, h, np.array([v]))[0]
    assert_allclose(got, want, rtol=2e-11, atol=1e-13)


def test_deconv_none_is_monomial_weighted_kernel():
    """Without error the order-l kernel collapses to v^l K(v)."""
    v = np.linspace(-3.0, 3.0, 101)
    base = smoothing_kernel(v)
    for order in range(4):
        got = deconv_kernel(NO_ERROR, order, 0.7, v)
        assert_allclose(got, v**order * base, atol=1e-8)


def test_deconv_sigma_zero_matches_none():
    v = np.linspace(-2.0, 2.0, 41)
    for order in (0, 1, 2):
        a = deconv_kernel(gaussian_error(0.0), order, 1.1, v)
        b = deconv_kernel(NO_ERROR, order, 1.1, v)
        assert_allclose(a, b, atol=1e-8)


def test_deconv_laplace_closed_form():
    """The laplace family admits K - (s^2/2h^2) K'' in closed form."""
    sigma, h = 0.8, 0.6
    v = np.linspace(-4.0, 4.0, 81)
    got = deconv_kernel(laplace_error(sigma), 0, h, v)
    # central difference; eps much below 1e-3 trades truncation error for
    # cancellation noise
    eps = 1e-3
    kpp = (smoothing_kernel(v + eps) - 2 * smoothing_kernel(v) + smoothing_kernel(v - eps)) / eps**2
    assert_allclose(got, smoothing_kernel(v) - 0.5 * sigma**2 / h**2 * kpp, atol=1e-6)


def test_deconv_parity():
    """Even orders give even kernels, odd orders odd kernels."""
    v = np.linspace(0.1, 3.0, 30)
    model = gaussian_error(0.8)
    for order, sign in ((0, 1.0), (1, -1.0), (2, 1.0), (3, -1.0)):
        left = deconv_kernel(model, order, 1.0, -v)
        right = deconv_kernel(model, order, 1.0, v)
        assert_allclose(left, sign * right, rtol=1e-10, atol=1e-14)


def test_deconv_engine_cached():
    e1 = deconv_kernel_engine(gaussian_error(0.5), 0, 0.9)
    e2 = deconv_kernel_engine(gaussian_error(0.5), 0, 0.9)
    assert e1 is e2
    e3 = deconv_kernel_engine(gaussian_error(0.5), 0, 0.91)
    assert e3 is not e1


def test_deconv_unbiasedness_monte_carlo():
    """E L((x + U - x0)/h) recovers K((x - x0)/h) for contaminated draws."""
    rng = np.random.default_rng(2024)
    n = 200000
    for family, make in (("gaussian", gaussian_error), ("laplace", laplace_error)):
        model = make(0.5)
        u = sample_error(model, rng, n)
        for x_true, x0, h in ((0.4, 0.0, 0.75), (-1.0, -0.5, 1.1)):
            vals = deconv_kernel(model, 0, h, (x_true + u - x0) / h)
            se = vals.std(ddof=1) / math.sqrt(n)
            want = smoothing_kernel((x_true - x0) / h)
            assert abs(vals.mean() - want) < 4.0 * se + 1e-12, (family, x_true, x0, h)


def test_evaluation_grid_validation():
    with pytest.raises(DomainError):
        EvaluationGrid(np.array([0.0, 1.0, 3.0]))
    with pytest.raises(DomainError):
        EvaluationGrid(np.array([1.0]))
    g = EvaluationGrid(np.linspace(0, 1, 11))
    assert_allclose(g.spacing, 0.1)


def test_fourier_deconvolve_identity_without_error():
    grid = EvaluationGrid(np.linspace(-5, 5, 257))
    vals = np.exp(-0.5 * grid.points**2)
    out = fourier_deconvolve(NO_ERROR, vals, grid, 0.4)
    assert_allclose(out, vals, atol=1e-12)


def test_fourier_deconvolve_linearity():
    rng = np.random.default_rng(3)
    grid = EvaluationGrid(np.linspace(-4, 4, 129))
    f = rng.standard_normal(len(grid))
    g = rng.standard_normal(len(grid))
    model = laplace_error(0.6)
    lhs = fourier_deconvolve(model, 2.5 * f - 0.7 * g, grid, 0.5)
    rhs = 2.5 * fourier_deconvolve(model, f, grid, 0.5) - 0.7 * fourier_deconvolve(
        model, g, grid, 0.5
    )
    assert_allclose(lhs, rhs, atol=1e-10)


def test_fourier_deconvolve_round_trip_laplace():
    """Convolve smooth functions with laplace noise, transform, recover.

    The spectral taper at scale h biases the recovery by O(h^2), so the
    round trip is checked at a small taper scale.
    """
    grid = EvaluationGrid(np.linspace(-8.0, 8.0, 401))
    model = laplace_error(0.5)
    uu = np.linspace(-11, 11, 8801)
    du = uu[1] - uu[0]
    dens = density(model, uu)
    funcs = (
        lambda x: np.exp(-0.5 * x * x),
        lambda x: np.cos(1.5 * x) * np.exp(-0.3 * x * x),
    )
    for f in funcs:
        target = f(grid.points)
        convolved = np.array([np.sum(f(p - uu) * dens) * du for p in grid.points])
        recovered = fourier_deconvolve(model, convolved, grid, 0.01)
        assert np.max(np.abs(recovered - target)) < 1e-3


def test_fourier_deconvolve_quadrature_agrees_with_fft():
    grid = EvaluationGrid(np.linspace(-4, 4, 161))
    vals = np.cos(grid.points) * np.exp(-0.25 * grid.points**2)
    model = gaussian_error(0.4)
    fast = fourier_deconvolve(model, vals, grid, 0.6)
    x_out = grid.points[::20]
    slow = fourier_deconvolve_quadrature(model, vals, grid, 0.6, x_out)
    assert_allclose(slow, fast[::20], atol=5e-6)
