"""Pure-Python implementations of the numerical kernels.

This module mirrors ``_ckernels.pyx`` function for function. It is used when
the compiled extension is unavailable or when ``HYDROBC_PURE_PYTHON=1``.
"""

from __future__ import annotations

import math

import numpy as np

_EPS = 2.220446049250313e-16
_FPMIN = 1e-300
_MAXIT = 10000


def _log_prefactor(a: float, x: float) -> float:
    return -x + a * math.log(x) - math.lgamma(a)


def _gser(a: float, x: float) -> float:
    ap = a
    term = 1.0 / a
    total = term
    for _ in range(_MAXIT):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(_log_prefactor(a, x))


def _gcf(a: float, x: float) -> float:
    # modified Lentz evaluation of the continued fraction for Q(a, x)
    b = x + 1.0 - a
    c = 1.0 / _FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, _MAXIT):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = b + an / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.exp(_log_prefactor(a, x)) * h


def gammainc_p(a: float, x: float) -> float:
    """Regularized lower incomplete gamma function P(a, x)."""
    if x <= 0.0:
        return 0.0
    if math.isinf(x):
        return 1.0
    if x < a + 1.0:
        return _gser(a, x)
    return 1.0 - _gcf(a, x)


def gammainc_p_inv(a: float, p: float) -> float:
    """Inverse of P(a, .) for p in (0, 1)."""
    if p <= 0.0:
        return 0.0
    if p >= 1.0:
        return math.inf
    gln = math.lgamma(a)
    a1 = a - 1.0
    lna1 = afac = 0.0
    if a > 1.0:
        lna1 = math.log(a1)
        afac = math.exp(a1 * (lna1 - 1.0) - gln)
        pp = p if p < 0.5 else 1.0 - p
        t = math.sqrt(-2.0 * math.log(pp))
        x = (2.30753 + t * 0.27061) / (1.0 + t * (0.99229 + t * 0.04481)) - t
        if p < 0.5:
            x = -x
        x = max(1e-3, a * (1.0 - 1.0 / (9.0 * a) - x / (3.0 * math.sqrt(a))) ** 3)
    else:
        t = 1.0 - a * (0.253 + a * 0.12)
        if p < t:
            x = (p / t) ** (1.0 / a)
        else:
            x = 1.0 - math.log(1.0 - (p - t) / (1.0 - t))
    # Halley iterations on P(a, x) - p, bracketed for safety
    lo, hi = 0.0, math.inf
    for _ in range(100):
        if x <= 0.0:
            return 0.0
        err = gammainc_p(a, x) - p
        if err < 0.0:
            lo = max(lo, x)
        else:
            hi = min(hi, x)
        if a > 1.0:
            dens = afac * math.exp(-(x - a1) + a1 * (math.log(x) - lna1))
        else:
            log_dens = -x + a1 * math.log(x) - gln
            dens = math.exp(log_dens) if log_dens < 700.0 else math.inf  # C gives inf here
        if dens == 0.0 or not math.isfinite(dens):
            step = math.nan
        else:
            u = err / dens
            step = u / (1.0 - 0.5 * min(1.0, u * ((a - 1.0) / x - 1.0)))
        xn = x - step
        if not (lo < xn < hi) or not math.isfinite(xn):
            xn = 0.5 * (lo + hi) if math.isfinite(hi) else 2.0 * x
        if abs(xn - x) <= 1e-15 * max(x, _FPMIN) or (math.isfinite(hi) and hi - lo <= 1e-15 * hi):
            return xn
        x = xn
    return x


def digamma(x: float) -> float:
    if x <= 0.0 and x == math.floor(x):
        return math.nan
    if x < 0.0:
        return digamma(1.0 - x) - math.pi / math.tan(math.pi * x)
    result = 0.0
    while x < 10.0:
        result -= 1.0 / x
        x += 1.0
    f = 1.0 / (x * x)
    series = f * (1.0 / 12 - f * (1.0 / 120 - f * (1.0 / 252 - f * (1.0 / 240 - f * (1.0 / 132)))))
    return result + math.log(x) - 0.5 / x - series


def trigamma(x: float) -> float:
    if x <= 0.0:
        return math.nan
    result = 0.0
    while x < 10.0:
        result += 1.0 / (x * x)
        x += 1.0
    f = 1.0 / (x * x)
    tail = 1.0 / x + f / 2.0 + (f / x) * (
        1.0 / 6 - f * (1.0 / 30 - f * (1.0 / 42 - f * (1.0 / 30 - f * 5.0 / 66)))
    )
    return result + tail


def gamma_cdf_array(x, shape: float, scale: float) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    flat_in = x.ravel()
    flat_out = out.ravel()
    for i in range(flat_in.size):
        v = flat_in[i]
        flat_out[i] = math.nan if v != v else gammainc_p(shape, v / scale)
    return out


def gamma_ppf_array(u, shape: float, scale: float) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    out = np.empty_like(u)
    flat_in = u.ravel()
    flat_out = out.ravel()
    for i in range(flat_in.size):
        v = flat_in[i]
        flat_out[i] = math.nan if v != v else scale * gammainc_p_inv(shape, v)
    return out


def bucket_run(precip, pet, smax: float, beta: float, alpha: float, kq: float,
               ks: float, s0: float, vq0: float, vs0: float):
    """Run the soil bucket and two linear reservoirs over a forcing record.

    Returns:
        (q, aet, state) where q and aet are daily arrays in mm/day and state
        is the final ``(s, vq, vs)`` tuple.
    """
    p_arr = np.ascontiguousarray(precip, dtype=np.float64)
    e_arr = np.ascontiguousarray(pet, dtype=np.float64)
    n = p_arr.shape[0]
    if e_arr.shape[0] != n:
        raise ValueError("precip and pet lengths differ")
    q = np.empty(n)
    aet = np.empty(n)
    s, vq, vs = float(s0), float(vq0), float(vs0)
    for t in range(n):
        p = float(p_arr[t])
        e = float(e_arr[t])
        pe = p * (s / smax) ** beta
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
    return q, aet, (s, vq, vs)
