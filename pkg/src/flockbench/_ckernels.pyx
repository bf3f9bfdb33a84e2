# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled pairwise interaction kernels (same signatures as ``_pykernels``)."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, pow, isnan, INFINITY

from .errors import CollisionError, SingularWeightError

cnp.import_array()

BACKEND = "cython"


cdef inline double _inv_pow(double u, double beta) noexcept nogil:
    # common exponents skip the libm pow call
    if beta == 2.0:
        return 1.0 / (u * u)
    if beta == 1.0:
        return 1.0 / u
    if beta == 0.5:
        return 1.0 / sqrt(u)
    return pow(u, -beta)


ctypedef struct KernelSpec:
    int code
    double beta
    double c
    double tail
    const double* tr
    const double* tp
    Py_ssize_t m


cdef KernelSpec _spec(int code, double beta, double c, const double[::1] tr,
                      const double[::1] tp, double tail):
    # raw pointers: memoryview arguments would be refcounted on every pair
    cdef KernelSpec ks
    ks.code = code
    ks.beta = beta
    ks.c = c
    ks.tail = tail
    ks.tr = &tr[0]
    ks.tp = &tp[0]
    ks.m = tr.shape[0]
    return ks


cdef inline double _psi(double r, const KernelSpec* ks) noexcept nogil:
    cdef Py_ssize_t lo, hi, mid, m
    cdef double r_last, frac
    cdef const double* tr = ks.tr
    cdef const double* tp = ks.tp
    if ks.code == 0:
        return ks.c * _inv_pow(1.0 + r, ks.beta)
    if ks.code == 1:
        return ks.c * _inv_pow(1.0 + r * r, ks.beta)
    if ks.code == 2:
        return ks.c
    m = ks.m
    r_last = tr[m - 1]
    if r >= r_last:
        if isnan(ks.tail) or r == r_last:
            return tp[m - 1]
        return tp[m - 1] * pow((1.0 + r) / (1.0 + r_last), -ks.tail)
    lo = 0
    hi = m - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if tr[mid] <= r:
            lo = mid
        else:
            hi = mid
    frac = (r - tr[lo]) / (tr[hi] - tr[lo])
    return tp[lo] + frac * (tp[hi] - tp[lo])


def psi(r, int code, double beta, double c, const double[::1] tr, const double[::1] tp, double tail):
    cdef KernelSpec ks = _spec(code, beta, c, tr, tp, tail)
    cdef double[::1] rr = np.ascontiguousarray(r, dtype=np.float64).reshape(-1)
    out = np.empty(rr.shape[0])
    cdef double[::1] o = out
    cdef Py_ssize_t k
    for k in range(rr.shape[0]):
        o[k] = _psi(rr[k], &ks)
    return out.reshape(np.shape(r))


def psi_matrix(const double[:, ::1] x, int code, double beta, double c,
               const double[::1] tr, const double[::1] tp, double tail):
    cdef KernelSpec ks = _spec(code, beta, c, tr, tp, tail)
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1], i, j, k
    cdef double s, t, w
    out = np.empty((n, n))
    cdef double[:, ::1] W = out
    with nogil:
        for i in range(n):
            W[i, i] = _psi(0.0, &ks)
            for j in range(i + 1, n):
                s = 0.0
                for k in range(d):
                    t = x[j, k] - x[i, k]
                    s += t * t
                w = _psi(sqrt(s), &ks)
                W[i, j] = w
                W[j, i] = w
    return out


def alignment(const double[:, ::1] x, const double[:, ::1] v, const double[::1] w, double K,
              int code, double beta, double c, const double[::1] tr, const double[::1] tp,
              double tail):
    cdef KernelSpec ks = _spec(code, beta, c, tr, tp, tail)
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1], i, j, k
    cdef double s, t, p
    out = np.zeros((n, d))
    cdef double[:, ::1] dv = out
    with nogil:
        for i in range(n):
            for j in range(i + 1, n):
                s = 0.0
                for k in range(d):
                    t = x[j, k] - x[i, k]
                    s += t * t
                p = _psi(sqrt(s), &ks)
                for k in range(d):
                    t = v[j, k] - v[i, k]
                    dv[i, k] += w[j] * p * t
                    dv[j, k] -= w[i] * p * t
        for i in range(n):
            for k in range(d):
                dv[i, k] *= K
    return out


def motsch_tadmor(const double[:, ::1] x, const double[:, ::1] v, double K,
                  int code, double beta, double c, const double[::1] tr, const double[::1] tp,
                  double tail):
    cdef KernelSpec ks = _spec(code, beta, c, tr, tp, tail)
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1], i, j, k, bad = -1
    cdef double s, t, p
    out = np.zeros((n, d))
    cdef double[:, ::1] dv = out
    cdef double[::1] den = np.empty(n)
    cdef double p0 = _psi(0.0, &ks)
    with nogil:
        for i in range(n):
            den[i] = p0
        for i in range(n):
            for j in range(i + 1, n):
                s = 0.0
                for k in range(d):
                    t = x[j, k] - x[i, k]
                    s += t * t
                p = _psi(sqrt(s), &ks)
                den[i] += p
                den[j] += p
                for k in range(d):
                    t = v[j, k] - v[i, k]
                    dv[i, k] += p * t
                    dv[j, k] -= p * t
        for i in range(n):
            if den[i] <= 0.0:
                bad = i
                break
            for k in range(d):
                dv[i, k] *= K / den[i]
    if bad >= 0:
        raise SingularWeightError(f"Motsch-Tadmor normalisation vanishes for agent {bad}")
    return out


def bonding(const double[:, ::1] x, const double[:, ::1] v, double K0, double K1, double K2,
            double R, bint literal, double min_dist, int code, double beta, double c,
            const double[::1] tr, const double[::1] tp, double tail):
    cdef KernelSpec ks = _spec(code, beta, c, tr, tp, tail)
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1], i, j, k, ci = -1, cj = -1
    cdef double s, t, r, p, proj, stretch, f, cdist = 0.0
    cdef bint check = K1 != 0.0 or K2 != 0.0
    out = np.zeros((n, d))
    cdef double[:, ::1] dv = out
    with nogil:
        for i in range(n):
            for j in range(i + 1, n):
                s = 0.0
                proj = 0.0
                for k in range(d):
                    t = x[j, k] - x[i, k]
                    s += t * t
                    proj += t * (v[j, k] - v[i, k])
                r = sqrt(s)
                if check and r < min_dist:
                    ci = i
                    cj = j
                    cdist = r
                    break
                p = _psi(r, &ks) * K0
                f = 0.0
                if K1 != 0.0:
                    f += K1 * proj / r
                if K2 != 0.0:
                    stretch = r - 2.0 * R
                    if literal:
                        f += K2 * stretch
                    else:
                        f += K2 * stretch / r
                for k in range(d):
                    t = p * (v[j, k] - v[i, k]) + f * (x[j, k] - x[i, k])
                    dv[i, k] += t
                    dv[j, k] -= t
            if ci >= 0:
                break
        for i in range(n):
            for k in range(d):
                dv[i, k] /= n
    if ci >= 0:
        raise CollisionError(ci, cj, cdist)
    return out
