# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twin of ``_kernels_np``.

Same entry points, same semantics, written as tight C loops.  The complex
kernel is evaluated with explicit real/imaginary arithmetic so the sigma = 0
column of a replicate matrix reproduces the real path bit for bit.  The
table-driven variant of the replicate weight sweep obtains all trigonometric
and hyperbolic factors from per-dataset tables via addition identities,
leaving the inner loop transcendental-free.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, cosh, sin, sinh

cnp.import_array()

cdef double PI = 3.14159265358979323846
cdef double FOUR8_PI = 48.0 / 3.14159265358979323846
cdef double complex IMAG_UNIT = 1j

cdef double[13] SER
SER[0] = 0.14551309082687575
SER[1] = -0.008084060601493097
SER[2] = 0.00018372865003393401
SER[3] = -2.355495513255564e-06
SER[4] = 1.9629129277129703e-08
SER[5] = -1.1546546633605707e-10
SER[6] = 5.064274839300749e-13
SER[7] = -1.7225424623471936e-15
SER[8] = 4.680821908552157e-18
SER[9] = -1.0401826463449236e-20
SER[10] = 1.9262641598980067e-23
SER[11] = -3.01922282115675e-26
SER[12] = 4.058095189726815e-29


cdef inline double kern_real(double x) noexcept nogil:
    cdef double x2 = x * x
    cdef double acc
    cdef int k
    if x2 < 1.0:
        acc = SER[12]
        for k in range(11, -1, -1):
            acc = acc * x2 + SER[k]
        return acc
    return FOUR8_PI * (x * (x2 - 15.0) * cos(x) + 3.0 * (5.0 - 2.0 * x2) * sin(x)) \
        / (x2 * x2 * x2 * x)


cdef inline void kern_cplx_series(double z2re, double z2im,
                                  double* out_re, double* out_im) noexcept nogil:
    cdef double sre = SER[12], sim = 0.0, tre, tim
    cdef int k
    for k in range(11, -1, -1):
        tre = sre * z2re - sim * z2im + SER[k]
        tim = sre * z2im + sim * z2re
        sre = tre
        sim = tim
    out_re[0] = sre
    out_im[0] = sim


cdef inline void kern_cplx_closed(double a, double b,
                                  double cre, double cim,
                                  double snre, double snim,
                                  double* out_re, double* out_im) noexcept nogil:
    # closed form at z = a + ib given cos(z) and sin(z)
    cdef double z2re = a * a - b * b
    cdef double z2im = 2.0 * a * b
    cdef double tre, tim, wre, wim, dre, dim, den
    # z * (z^2 - 15) * cos(z)
    wre = a * (z2re - 15.0) - b * z2im
    wim = a * z2im + b * (z2re - 15.0)
    tre = wre * cre - wim * cim
    tim = wre * cim + wim * cre
    # + 3 * (5 - 2 z^2) * sin(z)
    wre = 3.0 * (5.0 - 2.0 * z2re)
    wim = -6.0 * z2im
    tre += wre * snre - wim * snim
    tim += wre * snim + wim * snre
    # divide by z^7 = z * (z^2)^3
    dre = z2re * z2re - z2im * z2im
    dim = 2.0 * z2re * z2im
    wre = dre * z2re - dim * z2im
    wim = dre * z2im + dim * z2re
    dre = wre * a - wim * b
    dim = wre * b + wim * a
    den = dre * dre + dim * dim
    out_re[0] = FOUR8_PI * (tre * dre + tim * dim) / den
    out_im[0] = FOUR8_PI * (tim * dre - tre * dim) / den


cdef inline void kern_cplx(double a, double b, double* out_re, double* out_im) noexcept nogil:
    cdef double r2 = a * a + b * b
    cdef double chb, shb
    if r2 < 1.0:
        kern_cplx_series(a * a - b * b, 2.0 * a * b, out_re, out_im)
        return
    chb = cosh(b)
    shb = sinh(b)
    kern_cplx_closed(a, b,
                     cos(a) * chb, -sin(a) * shb,
                     sin(a) * chb, cos(a) * shb,
                     out_re, out_im)


def kernel_values(x):
    arr = np.ascontiguousarray(x, dtype=np.float64)
    flat = arr.ravel()
    out = np.empty_like(flat)
    cdef double[::1] xv = flat
    cdef double[::1] ov = out
    cdef Py_ssize_t i, n = xv.shape[0]
    with nogil:
        for i in range(n):
            ov[i] = kern_real(xv[i])
    return out.reshape(arr.shape)


def kernel_values_complex(z):
    arr = np.ascontiguousarray(z, dtype=np.complex128)
    flat = arr.ravel()
    out = np.empty_like(flat)
    cdef double complex[::1] zv = flat
    cdef double complex[::1] ov = out
    cdef Py_ssize_t i, n = zv.shape[0]
    cdef double vre, vim
    with nogil:
        for i in range(n):
            kern_cplx(zv[i].real, zv[i].imag, &vre, &vim)
            ov[i] = vre + IMAG_UNIT * vim
    return out.reshape(arr.shape)


def trig_weighted_sum(v, nodes, coefs, use_sin):
    cdef cnp.ndarray[double, ndim=1] vv = np.ascontiguousarray(v, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] tt = np.ascontiguousarray(nodes, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] cc = np.ascontiguousarray(coefs, dtype=np.float64)
    out = np.empty_like(vv)
    cdef double[::1] ov = out
    cdef double[::1] vm = vv, tm = tt, cm = cc
    cdef Py_ssize_t i, q, n = vm.shape[0], m = tm.shape[0]
    cdef double acc, vi
    cdef bint usin = bool(use_sin)
    with nogil:
        for i in range(n):
            vi = vm[i]
            acc = 0.0
            if usin:
                for q in range(m):
                    acc += cm[q] * sin(tm[q] * vi)
            else:
                for q in range(m):
                    acc += cm[q] * cos(tm[q] * vi)
            ov[i] = acc
    return out


cdef class _CeAccumulator:
    """Workspace and reduction logic shared by the plain and tabled sweeps."""
    cdef double[::1] vre, vim, kre, kim
    cdef double[::1] wsre, wsim, iq
    cdef Py_ssize_t n

    def __cinit__(self, Py_ssize_t n):
        self.n = n
        self.vre = np.empty(n)
        self.vim = np.empty(n)
        self.kre = np.empty(n)
        self.kim = np.empty(n)
        self.wsre = np.zeros(n)
        self.wsim = np.zeros(n)
        self.iq = np.zeros(n)

    cdef bint reduce_column(self, double rel_tol) noexcept nogil:
        """Moments, acceptance and weight accumulation for the column held in
        (vre, vim, kre, kim).  Returns 1 when the column was accepted."""
        cdef Py_ssize_t j, n = self.n
        cdef double invn = 1.0 / n
        cdef double s0re = 0.0, s0im = 0.0, s1re = 0.0, s1im = 0.0
        cdef double s2re = 0.0, s2im = 0.0
        cdef double a, bb, ore, oim, ukre, ukim
        cdef double detre, detim, scale, m02, m11, dn
        cdef double numre, numim, wre, wim
        for j in range(n):
            a = self.vre[j]
            bb = self.vim[j]
            ore = self.kre[j]
            oim = self.kim[j]
            s0re += ore
            s0im += oim
            ukre = a * ore - bb * oim
            ukim = a * oim + bb * ore
            s1re += ukre
            s1im += ukim
            s2re += a * ukre - bb * ukim
            s2im += a * ukim + bb * ukre
        s0re *= invn
        s0im *= invn
        s1re *= invn
        s1im *= invn
        s2re *= invn
        s2im *= invn
        detre = s0re * s2re - s0im * s2im - (s1re * s1re - s1im * s1im)
        detim = s0re * s2im + s0im * s2re - 2.0 * s1re * s1im
        m02 = ((s0re * s0re + s0im * s0im) * (s2re * s2re + s2im * s2im)) ** 0.5
        m11 = s1re * s1re + s1im * s1im
        scale = m02 if m02 > m11 else m11
        if detre * detre + detim * detim <= (rel_tol * scale) * (rel_tol * scale):
            return 0
        dn = n * (detre * detre + detim * detim)
        for j in range(n):
            a = self.vre[j]
            bb = self.vim[j]
            ore = self.kre[j]
            oim = self.kim[j]
            ukre = a * ore - bb * oim
            ukim = a * oim + bb * ore
            numre = ore * s2re - oim * s2im - (ukre * s1re - ukim * s1im)
            numim = ore * s2im + oim * s2re - (ukre * s1im + ukim * s1re)
            wre = (numre * detre + numim * detim) / dn
            wim = (numim * detre - numre * detim) / dn
            self.wsre[j] += wre
            self.wsim[j] += wim
            self.iq[j] += wim * wim
        return 1


def ce_weight_sums(w, z, double sigma, double h, double x_re, double x_im, double rel_tol):
    cdef cnp.ndarray[double, ndim=1] ww = np.ascontiguousarray(w, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] zz = np.ascontiguousarray(z, dtype=np.float64)
    cdef Py_ssize_t n = ww.shape[0], nb = zz.shape[1], j, b
    if zz.shape[0] != n:
        raise ValueError("replicate matrix must have one row per observation")
    accept = np.zeros(nb, dtype=np.uint8)
    cdef _CeAccumulator acc = _CeAccumulator(n)
    cdef double[::1] wm = ww
    cdef double[:, ::1] zm = zz
    cdef cnp.uint8_t[::1] am = accept
    cdef double ore, oim
    for j in range(n):
        acc.vre[j] = (ww[j] - x_re) / h
    with nogil:
        for b in range(nb):
            for j in range(n):
                acc.vim[j] = (sigma * zm[j, b] - x_im) / h
                kern_cplx(acc.vre[j], acc.vim[j], &ore, &oim)
                acc.kre[j] = ore
                acc.kim[j] = oim
            am[b] = acc.reduce_column(rel_tol)
    return (
        np.asarray(acc.wsre) + 1j * np.asarray(acc.wsim),
        np.asarray(acc.iq).copy(),
        accept.astype(bool),
    )


def ce_weight_sums_tabled(w, z, double sigma, double h, double x_re, double x_im,
                          double rel_tol, cos_a, sin_a, cosh_p, sinh_p):
    cdef cnp.ndarray[double, ndim=1] ww = np.ascontiguousarray(w, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] zz = np.ascontiguousarray(z, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] ca = np.ascontiguousarray(cos_a, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] sa = np.ascontiguousarray(sin_a, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] cp = np.ascontiguousarray(cosh_p, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] sp = np.ascontiguousarray(sinh_p, dtype=np.float64)
    cdef Py_ssize_t n = ww.shape[0], nb = zz.shape[1], j, b
    if zz.shape[0] != n or cp.shape[0] != n or sp.shape[0] != n:
        raise ValueError("replicate matrix and tables must share the data length")
    if cp.shape[1] != nb or sp.shape[1] != nb or ca.shape[0] != n or sa.shape[0] != n:
        raise ValueError("table shapes do not match the replicate matrix")
    accept = np.zeros(nb, dtype=np.uint8)
    cosv_arr = np.empty(n)
    sinv_arr = np.empty(n)
    cdef _CeAccumulator acc = _CeAccumulator(n)
    cdef double[::1] cam = ca, sam = sa, cosv = cosv_arr, sinv = sinv_arr
    cdef double[:, ::1] zm = zz, cpm = cp, spm = sp
    cdef cnp.uint8_t[::1] am = accept
    cdef double r = x_re / h, q = x_im / h
    cdef double cr = cos(r), sr = sin(r), chq = cosh(q), shq = sinh(q)
    cdef double a, bb, chv, shv, r2, ore, oim
    for j in range(n):
        acc.vre[j] = (ww[j] - x_re) / h
        cosv[j] = cam[j] * cr + sam[j] * sr
        sinv[j] = sam[j] * cr - cam[j] * sr
    with nogil:
        for b in range(nb):
            for j in range(n):
                a = acc.vre[j]
                bb = (sigma * zm[j, b] - x_im) / h
                acc.vim[j] = bb
                r2 = a * a + bb * bb
                if r2 < 1.0:
                    kern_cplx_series(a * a - bb * bb, 2.0 * a * bb, &ore, &oim)
                else:
                    chv = cpm[j, b] * chq - spm[j, b] * shq
                    shv = spm[j, b] * chq - cpm[j, b] * shq
                    kern_cplx_closed(a, bb,
                                     cosv[j] * chv, -sinv[j] * shv,
                                     sinv[j] * chv, cosv[j] * shv,
                                     &ore, &oim)
                acc.kre[j] = ore
                acc.kim[j] = oim
            am[b] = acc.reduce_column(rel_tol)
    return (
        np.asarray(acc.wsre) + 1j * np.asarray(acc.wsim),
        np.asarray(acc.iq).copy(),
        accept.astype(bool),
    )
