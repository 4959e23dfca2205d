"""The compiled extension and the NumPy fallback must be interchangeable."""

import os
import subprocess
import sys

import numpy as np
import pytest
from numpy.testing import assert_allclose

from circfit import _kernels_np
from circfit._backend import BACKEND

_core = pytest.importorskip(
    "circfit._core", reason="compiled extension unavailable on this build"
)


@pytest.fixture(scope="module")
def shared_inputs():
    rng = np.random.default_rng(17)
    w = np.sort(rng.uniform(-3, 3, 40))
    z = rng.standard_normal((40, 25))
    return w, z


def test_kernel_values_agree(shared_inputs):
    # span the series/closed-form seam at |x| = 1 and both signs
    x = np.concatenate([
        np.linspace(-30, 30, 501),
        np.linspace(-1.05, 1.05, 41),
    ])
    assert_allclose(_core.kernel_values(x), _kernels_np.kernel_values(x),
                    rtol=1e-13, atol=1e-16)


def test_kernel_values_complex_agree():
    rng = np.random.default_rng(23)
    zz = rng.uniform(-4, 4, (30, 7)) + 1j * rng.uniform(-1.5, 1.5, (30, 7))
    assert_allclose(
        _core.kernel_values_complex(zz),
        _kernels_np.kernel_values_complex(zz),
        rtol=1e-12, atol=1e-15,
    )


def test_trig_weighted_sum_agree():
    rng = np.random.default_rng(29)
    v = rng.uniform(-20, 20, 300)
    nodes = rng.uniform(0, 1, 48)
    coefs = rng.standard_normal(48)
    for use_sin in (0, 1):
        assert_allclose(
            _core.trig_weighted_sum(v, nodes, coefs, use_sin),
            _kernels_np.trig_weighted_sum(v, nodes, coefs, use_sin),
            rtol=1e-12, atol=1e-14,
        )


def test_ce_weight_sums_agree(shared_inputs):
    w, z = shared_inputs
    for target in (0.0, 0.8 + 0.3j):
        a = _core.ce_weight_sums(w, z, 0.5, 0.7, target.real, target.imag, 1e-10)
        b = _kernels_np.ce_weight_sums(w, z, 0.5, 0.7, target.real, target.imag, 1e-10)
        assert np.array_equal(a[2], b[2])  # same columns accepted
        assert_allclose(a[0], b[0], rtol=1e-10, atol=1e-13)
        assert_allclose(a[1], b[1], rtol=1e-10, atol=1e-13)


def test_tabled_path_matches_plain(shared_inputs):
    """The transcendental-free table path is an algebraic rewrite of the
    plain path, not an approximation."""
    w, z = shared_inputs
    sigma, h = 0.5, 0.7
    cos_a, sin_a = np.cos(w / h), np.sin(w / h)
    p = sigma * z / h
    cosh_p, sinh_p = np.cosh(p), np.sinh(p)
    for impl in (_core, _kernels_np):
        for target in (0.3, -1.2 + 0.4j):
            plain = impl.ce_weight_sums(
                w, z, sigma, h, target.real, target.imag, 1e-10
            )
            tabled = impl.ce_weight_sums_tabled(
                w, z, sigma, h, target.real, target.imag, 1e-10,
                cos_a, sin_a, cosh_p, sinh_p,
            )
            assert np.array_equal(plain[2], tabled[2])
            assert_allclose(tabled[0], plain[0], rtol=1e-9, atol=1e-12)
            assert_allclose(tabled[1], plain[1], rtol=1e-9, atol=1e-12)


_PROBE = """
import numpy as np
from circfit._backend import BACKEND
from circfit.fit import Dataset, FitConfig, fit
from circfit.error_models import gaussian_error
rng = np.random.default_rng(41)
x = np.sort(rng.uniform(-2, 2, 50))
theta = 2 * np.arctan(x) + 0.2 * rng.standard_normal(50)
w = x + 0.4 * rng.standard_normal(50)
res = fit(Dataset(theta, w), FitConfig("dk", h=0.6, error=gaussian_error(0.4)),
          np.linspace(-1.5, 1.5, 11))
print(BACKEND)
for v in res.m_hat:
    print(repr(float(v)))
"""


def _probe(disable_ext):
    env = dict(os.environ, CIRCFIT_DISABLE_EXT="1" if disable_ext else "0")
    out = subprocess.run(
        [sys.executable, "-c", _PROBE], env=env,
        capture_output=True, text=True, check=True,
    )
    lines = out.stdout.split()
    return lines[0], np.array([float(v) for v in lines[1:]])


def test_backend_switch_is_numerically_invisible():
    assert BACKEND == "compiled"
    name_c, fit_c = _probe(disable_ext=False)
    name_n, fit_n = _probe(disable_ext=True)
    assert name_c == "compiled"
    assert name_n == "numpy"
    assert_allclose(fit_n, fit_c, rtol=1e-12, atol=1e-14)
