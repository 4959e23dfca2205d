"""Pointwise weight construction: local fits, deconvolution, replicates."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from circfit.error_models import NO_ERROR, gaussian_error, laplace_error
from circfit.exceptions import DegenerateNeighborhoodError, DomainError, NumericError
from circfit.weights import (
    CeReplicateEngine,
    check_imag_noise,
    kernel_weights,
    weight_ce,
    weight_dk,
    weight_local_linear,
    weight_normalized,
)


@pytest.fixture
def xdata():
    rng = np.random.default_rng(11)
    return np.sort(rng.uniform(-3, 3, 60))


def test_kernel_weights_shape_and_scale(xdata):
    w = kernel_weights(xdata, 0.5, 0.8)
    assert w.shape == (60,)
    # pure kernel weights are K(u)/h, positive near the point
    near = np.abs(xdata - 0.5) < 0.4
    assert np.all(w[near] > 0)


def test_local_linear_reproduces_lines(xdata):
    """Normalized local-linear weights recover constants and linear maps."""
    for x0 in (-1.2, 0.0, 2.4):
        w = weight_normalized(xdata, x0, 0.7)
        assert_allclose(w.sum(), 1.0, atol=1e-12)
        assert_allclose(w @ xdata, x0, atol=1e-10)


def test_local_linear_unnormalized_sums(xdata):
    w = weight_local_linear(xdata, 0.3, 0.7)
    wn = weight_normalized(xdata, 0.3, 0.7)
    assert_allclose(w / w.sum(), wn, atol=1e-14)


def test_degenerate_neighborhood():
    """All observations at one spot leave the linear system rank one."""
    data = np.full(6, 1.0)
    with pytest.raises(DegenerateNeighborhoodError):
        weight_normalized(data, 1.0, 0.5)


def test_point_validation(xdata):
    with pytest.raises(DomainError):
        weight_normalized(xdata, np.nan, 0.5)
    with pytest.raises(DomainError):
        weight_normalized(xdata, 0.0, -1.0)


def test_dk_none_bit_identical(xdata):
    """No error model: deconvoluting weights ARE the plain weights."""
    for order in ("local_constant", "local_linear"):
        a = weight_dk(NO_ERROR, xdata, 0.4, 0.8, weight_order=order)
        b = weight_dk(gaussian_error(0.0), xdata, 0.4, 0.8, weight_order=order)
        assert np.array_equal(a, b)
    ll = weight_dk(NO_ERROR, xdata, 0.4, 0.8)
    assert np.array_equal(ll, weight_local_linear(xdata, 0.4, 0.8))


def test_dk_weights_continuous_at_zero_error():
    rng = np.random.default_rng(3)
    w = np.sort(rng.uniform(-3, 3, 80))
    tiny = weight_dk(gaussian_error(1e-8), w, 0.2, 0.9)
    plain = weight_dk(NO_ERROR, w, 0.2, 0.9)
    assert np.max(np.abs(tiny - plain)) < 1e-8


def test_dk_local_constant_vs_linear_differ(xdata):
    model = gaussian_error(0.5)
    a = weight_dk(model, xdata, 0.4, 0.8, weight_order="local_constant")
    b = weight_dk(model, xdata, 0.4, 0.8, weight_order="local_linear")
    assert not np.allclose(a, b)


def test_ce_sigma_zero_exact(xdata):
    """sigma = 0 replicates coincide with the data for any b_star."""
    for b_star in (1, 7, 40):
        w = weight_ce(gaussian_error(0.0), xdata, 0.3, 0.7, b_star=b_star,
                      rng=np.random.default_rng(0))
        assert np.array_equal(w, weight_normalized(xdata, 0.3, 0.7))


def test_ce_rejects_laplace(xdata):
    with pytest.raises(DomainError):
        weight_ce(laplace_error(0.5), xdata, 0.3, 0.7)


def test_ce_deterministic(xdata):
    model = gaussian_error(0.4)
    a = weight_ce(model, xdata, 0.3, 0.8, b_star=100, rng=np.random.default_rng(5))
    b = weight_ce(model, xdata, 0.3, 0.8, b_star=100, rng=np.random.default_rng(5))
    assert np.array_equal(a, b)


def test_ce_weights_near_plain_for_small_sigma(xdata):
    """As sigma -> 0 the replicate average approaches the plain weights."""
    plain = weight_normalized(xdata, 0.3, 0.8)
    w = weight_ce(gaussian_error(0.01), xdata, 0.3, 0.8, b_star=400,
                  rng=np.random.default_rng(9))
    assert np.max(np.abs(w - plain)) < 5e-3


def test_ce_engine_deterministic_given_replicates(xdata):
    """The same replicate matrix gives the same weights at every entry."""
    rng = np.random.default_rng(21)
    z = rng.standard_normal((xdata.size, 50))
    engine = CeReplicateEngine(xdata, 0.4, 0.8, b_star=50, z=z)
    got, _ = engine.weights_at(0.3)
    engine2 = CeReplicateEngine(xdata, 0.4, 0.8, b_star=50, z=z.copy())
    again, _ = engine2.weights_at(0.3)
    assert_allclose(got.real, again.real, rtol=1e-13)
    assert got.shape == (xdata.size,)
    assert np.iscomplexobj(got)
    # real parts normalize like proper weights
    assert_allclose(got.real.sum(), 1.0, atol=1e-9)


def test_check_imag_noise_passes_small_imag():
    avg = np.full(5, 0.2) + 1e-13j
    imsq = np.full(5, 1e-4)
    check_imag_noise(avg, imsq, 50, "test")


def test_check_imag_noise_raises_large_imag():
    avg = np.full(5, 0.2) + 0.1j
    imsq = np.full(5, 0.5 + 1e-9)  # variance of imag ~ tiny around mean
    with pytest.raises(NumericError):
        check_imag_noise(avg, imsq, 50, "test")
