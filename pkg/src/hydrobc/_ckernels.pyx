# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled numerical kernels.

Same algorithms and signatures as ``_pykernels``; the array loops release
the GIL so callers may run them from worker threads.
"""

import numpy as np

from libc.math cimport exp, log, lgamma, sqrt, fabs, floor, tan, pow, isnan, isinf, isfinite, INFINITY, NAN, M_PI

cdef double _EPS = 2.220446049250313e-16
cdef double _FPMIN = 1e-300
cdef int _MAXIT = 10000


cdef inline double _log_prefactor(double a, double x) nogil:
    return -x + a * log(x) - lgamma(a)


cdef double _gser(double a, double x) nogil:
    cdef double ap = a
    cdef double term = 1.0 / a
    cdef double total = term
    cdef int i
    for i in range(_MAXIT):
        ap += 1.0
        term *= x / ap
        total += term
        if fabs(term) < fabs(total) * _EPS:
            break
    return total * exp(_log_prefactor(a, x))


cdef double _gcf(double a, double x) nogil:
    cdef double b = x + 1.0 - a
    cdef double c = 1.0 / _FPMIN
    cdef double d = 1.0 / b
    cdef double h = d
    cdef double an, delta
    cdef int i
    for i in range(1, _MAXIT):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if fabs(d) < _FPMIN:
            d = _FPMIN
        c = b + an / c
        if fabs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if fabs(delta - 1.0) < _EPS:
            break
    return exp(_log_prefactor(a, x)) * h


cdef double _gammainc_p(double a, double x) nogil:
    if x <= 0.0:
        return 0.0
    if isinf(x):
        return 1.0
    if x < a + 1.0:
        return _gser(a, x)
    return 1.0 - _gcf(a, x)


cdef double _gammainc_p_inv(double a, double p) nogil:
    cdef double gln, a1, lna1 = 0.0, afac = 0.0, pp, t, x, err, dens, u, step, xn
    cdef double lo = 0.0, hi = INFINITY
    cdef int j
    if p <= 0.0:
        return 0.0
    if p >= 1.0:
        return INFINITY
    gln = lgamma(a)
    a1 = a - 1.0
    if a > 1.0:
        lna1 = log(a1)
        afac = exp(a1 * (lna1 - 1.0) - gln)
        pp = p if p < 0.5 else 1.0 - p
        t = sqrt(-2.0 * log(pp))
        x = (2.30753 + t * 0.27061) / (1.0 + t * (0.99229 + t * 0.04481)) - t
        if p < 0.5:
            x = -x
        x = a * pow(1.0 - 1.0 / (9.0 * a) - x / (3.0 * sqrt(a)), 3)
        if x < 1e-3:
            x = 1e-3
    else:
        t = 1.0 - a * (0.253 + a * 0.12)
        if p < t:
            x = pow(p / t, 1.0 / a)
        else:
            x = 1.0 - log(1.0 - (p - t) / (1.0 - t))
    for j in range(100):
        if x <= 0.0:
            return 0.0
        err = _gammainc_p(a, x) - p
        if err < 0.0:
            if x > lo:
                lo = x
        else:
            if x < hi:
                hi = x
        if a > 1.0:
            dens = afac * exp(-(x - a1) + a1 * (log(x) - lna1))
        else:
            dens = exp(-x + a1 * log(x) - gln)
        if dens == 0.0 or not isfinite(dens):
            step = NAN
        else:
            u = err / dens
            step = u / (1.0 - 0.5 * min(1.0, u * ((a - 1.0) / x - 1.0)))
        xn = x - step
        if not (lo < xn and xn < hi) or not isfinite(xn):
            if isfinite(hi):
                xn = 0.5 * (lo + hi)
            else:
                xn = 2.0 * x
        if fabs(xn - x) <= 1e-15 * max(x, _FPMIN) or (isfinite(hi) and hi - lo <= 1e-15 * hi):
            return xn
        x = xn
    return x


def gammainc_p(double a, double x):
    """Regularized lower incomplete gamma function P(a, x)."""
    return _gammainc_p(a, x)


def gammainc_p_inv(double a, double p):
    """Inverse of P(a, .) for p in (0, 1)."""
    return _gammainc_p_inv(a, p)


cdef double _digamma(double x) nogil:
    cdef double result = 0.0, f, series
    if x <= 0.0 and x == floor(x):
        return NAN
    if x < 0.0:
        return _digamma(1.0 - x) - M_PI / tan(M_PI * x)
    while x < 10.0:
        result -= 1.0 / x
        x += 1.0
    f = 1.0 / (x * x)
    series = f * (1.0 / 12 - f * (1.0 / 120 - f * (1.0 / 252 - f * (1.0 / 240 - f * (1.0 / 132)))))
    return result + log(x) - 0.5 / x - series


def digamma(double x):
    return _digamma(x)


def trigamma(double x):
    cdef double result = 0.0, f
    if x <= 0.0:
        return NAN
    while x < 10.0:
        result += 1.0 / (x * x)
        x += 1.0
    f = 1.0 / (x * x)
    return result + 1.0 / x + f / 2.0 + (f / x) * (
        1.0 / 6 - f * (1.0 / 30 - f * (1.0 / 42 - f * (1.0 / 30 - f * 5.0 / 66)))
    )


def gamma_cdf_array(x, double shape, double scale):
    cdef const double[::1] xin = np.ascontiguousarray(x, dtype=np.float64).ravel()
    out = np.empty(xin.shape[0])
    cdef double[::1] o = out
    cdef Py_ssize_t i, n = xin.shape[0]
    cdef double v
    with nogil:
        for i in range(n):
            v = xin[i]
            if isnan(v):
                o[i] = NAN
            else:
                o[i] = _gammainc_p(shape, v / scale)
    return out.reshape(np.shape(x))


def gamma_ppf_array(u, double shape, double scale):
    cdef const double[::1] uin = np.ascontiguousarray(u, dtype=np.float64).ravel()
    out = np.empty(uin.shape[0])
    cdef double[::1] o = out
    cdef Py_ssize_t i, n = uin.shape[0]
    cdef double v
    with nogil:
        for i in range(n):
            v = uin[i]
            if isnan(v):
                o[i] = NAN
            else:
                o[i] = scale * _gammainc_p_inv(shape, v)
    return out.reshape(np.shape(u))


def bucket_run(precip, pet, double smax, double beta, double alpha, double kq,
               double ks, double s0, double vq0, double vs0):
    """Run the soil bucket and two linear reservoirs over a forcing record.

    Returns:
        (q, aet, state) where q and aet are daily arrays in mm/day and state
        is the final ``(s, vq, vs)`` tuple.
    """
    cdef const double[::1] p_arr = np.ascontiguousarray(precip, dtype=np.float64)
    cdef const double[::1] e_arr = np.ascontiguousarray(pet, dtype=np.float64)
    cdef Py_ssize_t t, n = p_arr.shape[0]
    if e_arr.shape[0] != n:
        raise ValueError("precip and pet lengths differ")
    q_out = np.empty(n)
    aet_out = np.empty(n)
    cdef double[::1] q = q_out
    cdef double[::1] aet = aet_out
    cdef double s = s0, vq = vq0, vs = vs0
    cdef double p, e, pe, ratio, ea, oq, os_
    with nogil:
        for t in range(n):
            p = p_arr[t]
            e = e_arr[t]
            pe = p * pow(s / smax, beta)
            s += p - pe
            ratio = s / smax
            if ratio > 1.0:
                ratio = 1.0
            ea = e * ratio
            if ea > s:
                ea = s
            s -= ea
            if s > smax:
                pe += s - smax
                s = smax
            vq += alpha * pe
            vs += (1.0 - alpha) * pe
            oq = vq / kq
            os_ = vs / ks
            vq -= oq
            vs -= os_
            q[t] = oq + os_
            aet[t] = ea
    return q_out, aet_out, (s, vq, vs)
