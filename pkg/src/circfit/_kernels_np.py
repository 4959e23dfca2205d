"""Pure NumPy implementations of the numeric hot spots.

This module is the fallback twin of the compiled extension ``_core``.  Both
expose the same four functions with identical semantics; ``_backend`` decides
which one the rest of the package uses.

The smoothing kernel is

    K(x) = 48 * {x (x^2 - 15) cos x + 3 (5 - 2 x^2) sin x} / (pi x^7),

an even, bounded-support-in-frequency kernel whose Fourier transform is
(1 - t^2)^3 on [-1, 1].  The closed form cancels catastrophically near the
origin (the bracket is O(x^7)), so below |x| = 1 the kernel is evaluated from
its Maclaurin series instead.  The 13 coefficients were computed from the
exact rational expansion

    K(x) = (1/pi) * sum_k (-1)^k c_k x^(2k) / (2k)!,
    c_k = 1/(2k+1) - 3/(2k+3) + 3/(2k+5) - 1/(2k+7),

and truncation at k = 12 is below 5e-29 at the switch radius.
"""

import numpy as np

# c_k / ((2k)! * pi) with alternating sign, k = 0 .. 12.
_SERIES = np.array(
    [
        0.14551309082687575,
        -0.008084060601493097,
        0.00018372865003393401,
        -2.355495513255564e-06,
        1.9629129277129703e-08,
        -1.1546546633605707e-10,
        5.064274839300749e-13,
        -1.7225424623471936e-15,
        4.680821908552157e-18,
        -1.0401826463449236e-20,
        1.9262641598980067e-23,
        -3.01922282115675e-26,
        4.058095189726815e-29,
    ]
)

_TRIG_CHUNK = 1 << 16


def _series_eval(x2):
    acc = np.full_like(x2, _SERIES[-1])
    for coef in _SERIES[-2::-1]:
        acc *= x2
        acc += coef
    return acc


def kernel_values(x):
    """Evaluate the smoothing kernel elementwise on a float64 array."""
    x = np.asarray(x, dtype=np.float64)
    x2 = x * x
    out = np.empty_like(x)
    small = x2 < 1.0
    if small.any():
        out[small] = _series_eval(x2[small])
    big = ~small
    if big.any():
        xb = x[big]
        xb2 = x2[big]
        num = xb * (xb2 - 15.0) * np.cos(xb) + 3.0 * (5.0 - 2.0 * xb2) * np.sin(xb)
        out[big] = (48.0 / np.pi) * num / (xb2 * xb2 * xb2 * xb)
    return out


def kernel_values_complex(z):
    """Analytic continuation of the kernel, elementwise on complex128."""
    z = np.asarray(z, dtype=np.complex128)
    r2 = z.real * z.real + z.imag * z.imag
    out = np.empty_like(z)
    small = r2 < 1.0
    if small.any():
        out[small] = _series_eval(z[small] * z[small])
    big = ~small
    if big.any():
        zb = z[big]
        zb2 = zb * zb
        num = zb * (zb2 - 15.0) * np.cos(zb) + 3.0 * (5.0 - 2.0 * zb2) * np.sin(zb)
        out[big] = (48.0 / np.pi) * num / (zb2 * zb2 * zb2 * zb)
    return out


def trig_weighted_sum(v, nodes, coefs, use_sin):
    """sum_q coefs[q] * cos(nodes[q] * v_i) (or sin), chunked over v."""
    v = np.ascontiguousarray(v, dtype=np.float64)
    nodes = np.ascontiguousarray(nodes, dtype=np.float64)
    coefs = np.ascontiguousarray(coefs, dtype=np.float64)
    fn = np.sin if use_sin else np.cos
    out = np.empty_like(v)
    for start in range(0, v.size, _TRIG_CHUNK):
        block = v[start : start + _TRIG_CHUNK]
        out[start : start + _TRIG_CHUNK] = fn(block[:, None] * nodes[None, :]) @ coefs
    return out


def _ce_reduce(u, k, rel_tol):
    """Moment sums, acceptance and weight aggregation shared by the plain and
    table-driven complex weight paths."""
    n = u.shape[0]
    uk = u * k
    s0 = k.mean(axis=0)
    s1 = uk.mean(axis=0)
    s2 = (u * uk).mean(axis=0)
    det = s0 * s2 - s1 * s1
    scale = np.maximum(np.abs(s0 * s2), np.abs(s1) ** 2)
    accept = np.abs(det) > rel_tol * scale
    with np.errstate(divide="ignore", invalid="ignore"):
        wmat = (k * s2[None, :] - uk * s1[None, :]) / (n * det[None, :])
    cols = wmat[:, accept]
    wsum = cols.sum(axis=1)
    imsq = (cols.imag ** 2).sum(axis=1)
    return wsum, imsq, accept


def ce_weight_sums(w, z, sigma, h, x_re, x_im, rel_tol):
    """Replicate-averaged complex local-linear weights, one target point.

    For every replicate column b the contaminated sample is perturbed to
    w + 1j * sigma * z[:, b], scaled differences u = (w_cplx - x) / h are
    formed, and the normalized local-linear weights

        (K(u_j) * s2 - u_j K(u_j) * s1) / (n * (s0 s2 - s1^2)),   s_r = mean(u^r K(u)),

    are computed (the 1/h factors cancel in the normalized form).  Columns
    whose determinant modulus falls at or below rel_tol * max(|s0 s2|, |s1|^2)
    are rejected.

    Returns (wsum, imsq, accept): the complex per-observation sum of weights
    over accepted columns, the matching sum of squared imaginary parts, and
    the boolean acceptance mask over columns.
    """
    w = np.ascontiguousarray(w, dtype=np.float64)
    z = np.ascontiguousarray(z, dtype=np.float64)
    u = ((w - x_re) / h)[:, None] + 1j * ((sigma * z - x_im) / h)
    k = kernel_values_complex(u)
    return _ce_reduce(u, k, rel_tol)


def ce_weight_sums_tabled(w, z, sigma, h, x_re, x_im, rel_tol, cos_a, sin_a, cosh_p, sinh_p):
    """Same contract as ce_weight_sums, fed by precomputed tables.

    The tables hold cos(w/h), sin(w/h) per observation and cosh(sigma z / h),
    sinh(sigma z / h) per replicate entry; angle/hyperbolic addition then
    yields the trig parts of the complex kernel argument from two scalars per
    target point, so the inner sweep is transcendental-free.  Worthwhile when
    one replicate matrix serves many target points.
    """
    w = np.ascontiguousarray(w, dtype=np.float64)
    z = np.ascontiguousarray(z, dtype=np.float64)
    vre = (w - x_re) / h
    vim = (sigma * z - x_im) / h
    r = x_re / h
    q = x_im / h
    cr, sr = np.cos(r), np.sin(r)
    chq, shq = np.cosh(q), np.sinh(q)
    cosv = cos_a * cr + sin_a * sr
    sinv = sin_a * cr - cos_a * sr
    coshv = cosh_p * chq - sinh_p * shq
    sinhv = sinh_p * chq - cosh_p * shq
    u = vre[:, None] + 1j * vim
    cos_u = cosv[:, None] * coshv - 1j * (sinv[:, None] * sinhv)
    sin_u = sinv[:, None] * coshv + 1j * (cosv[:, None] * sinhv)
    r2 = vre[:, None] ** 2 + vim * vim
    small = r2 < 1.0
    u2 = u * u
    with np.errstate(divide="ignore", invalid="ignore"):
        num = u * (u2 - 15.0) * cos_u + 3.0 * (5.0 - 2.0 * u2) * sin_u
        k = (48.0 / np.pi) * num / (u2 * u2 * u2 * u)
    if small.any():
        k[small] = _series_eval(u2[small])
    return _ce_reduce(u, k, rel_tol)
