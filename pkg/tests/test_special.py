"""Special functions against mpmath at 40 digits and across both kernel backends."""

import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hydrobc import _pykernels, kernels
from hydrobc.distfit import (
    digamma,
    ln_gamma,
    normal_cdf,
    normal_inv_cdf,
    regularized_gamma_p,
    regularized_gamma_p_inv,
    trigamma,
)

mp.mp.dps = 40

try:
    from hydrobc import _ckernels
    BACKENDS = [_pykernels, _ckernels]
except ImportError:  # extension not built
    BACKENDS = [_pykernels]

A_GRID = np.logspace(-2, 2.5, 25)
X_GRID = np.logspace(-3, math.log10(600.0), 40)


def ref_p(a, x):
    return float(mp.gammainc(mp.mpf(a), 0, mp.mpf(x), regularized=True))


@pytest.mark.parametrize("backend", BACKENDS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
def test_gammainc_grid_against_mpmath(backend):
    worst_abs = worst_rel = 0.0
    for a in A_GRID:
        for x in X_GRID:
            ref = ref_p(a, x)
            v = backend.gammainc_p(float(a), float(x))
            worst_abs = max(worst_abs, abs(v - ref))
            if ref > 1e-290:
                worst_rel = max(worst_rel, abs(v - ref) / ref)
    assert worst_abs <= 1e-10
    assert worst_rel <= 1e-11


def test_gammainc_special_cases():
    assert regularized_gamma_p(1.0, math.log(2.0)) == pytest.approx(0.5, abs=1e-15)
    for x in (0.1, 1.0, 7.5):
        assert regularized_gamma_p(1.0, x) == pytest.approx(1 - math.exp(-x), rel=1e-14)
    assert regularized_gamma_p(3.0, 0.0) == 0.0
    assert regularized_gamma_p(2.0, math.inf) == 1.0
    # P(0.5, x) = erf(sqrt(x))
    for x in (0.01, 0.7, 4.0):
        assert regularized_gamma_p(0.5, x) == pytest.approx(math.erf(math.sqrt(x)), rel=1e-13)
    with pytest.raises(ValueError):
        regularized_gamma_p(0.0, 1.0)
    with pytest.raises(ValueError):
        regularized_gamma_p(1.0, -1.0)


@given(st.floats(0.01, 300.0), st.floats(0.0, 500.0), st.floats(0.0, 50.0))
def test_gammainc_monotone_in_x(a, x, dx):
    assert regularized_gamma_p(a, x + dx) >= regularized_gamma_p(a, x)


@pytest.mark.parametrize("backend", BACKENDS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
def test_inverse_roundtrip_grid(backend):
    worst = 0.0
    for a in np.logspace(-2, 2, 30):
        for p in np.r_[1e-8, 1e-6, np.linspace(0.001, 0.999, 40), 1 - 1e-6, 1 - 1e-8]:
            x = backend.gammainc_p_inv(float(a), float(p))
            if x < 1e-300:  # true quantile underflows double precision
                continue
            worst = max(worst, abs(backend.gammainc_p(float(a), x) - p) / p)
    assert worst <= 1e-8


@given(st.floats(0.02, 200.0), st.floats(1e-6, 1 - 1e-6))
def test_inverse_roundtrip_property(a, p):
    x = regularized_gamma_p_inv(a, p)
    if math.log(max(x, 1e-320)) < -690:
        return
    assert abs(regularized_gamma_p(a, x) - p) <= 1e-8 * max(p, 1e-3)


@given(st.floats(0.05, 50.0), st.floats(0.01, 0.99))
def test_inverse_against_mpmath(a, p):
    x = regularized_gamma_p_inv(a, p)
    assert float(mp.gammainc(mp.mpf(a), 0, mp.mpf(x), regularized=True)) == pytest.approx(p, rel=1e-9)


def test_inverse_rejects_endpoints():
    for p in (0.0, 1.0, -0.1):
        with pytest.raises(ValueError):
            regularized_gamma_p_inv(2.0, p)


def test_digamma_values():
    assert digamma(1.0) == pytest.approx(-0.5772156649015329, abs=1e-13)
    assert digamma(0.5) == pytest.approx(-0.5772156649015329 - 2 * math.log(2), abs=1e-13)
    assert trigamma(1.0) == pytest.approx(math.pi ** 2 / 6, rel=1e-13)


@pytest.mark.parametrize("backend", BACKENDS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
def test_digamma_trigamma_against_mpmath(backend):
    for x in np.logspace(-3, 3, 120):
        assert backend.digamma(float(x)) == pytest.approx(float(mp.digamma(x)), rel=1e-12, abs=1e-12)
        assert backend.trigamma(float(x)) == pytest.approx(float(mp.psi(1, x)), rel=1e-12)


def test_ln_gamma_and_normal():
    assert ln_gamma(5.0) == pytest.approx(math.log(24.0))
    assert normal_cdf(0.0) == 0.5
    assert normal_inv_cdf(0.5) == 0.0
    for z in (-3.0, -0.4, 1.7):
        assert normal_inv_cdf(normal_cdf(z)) == pytest.approx(z, abs=1e-12)
        assert normal_cdf(z) == pytest.approx(float(mp.ncdf(z)), rel=1e-14)


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled extension not built")
def test_backends_agree_on_arrays(rng):
    x = rng.gamma(0.8, 5.0, 2000)
    x[::97] = np.nan
    u = rng.uniform(1e-9, 1 - 1e-9, 2000)
    for shape, scale in ((0.3, 2.0), (1.0, 1.0), (7.5, 0.4)):
        a = _pykernels.gamma_cdf_array(x, shape, scale)
        b = _ckernels.gamma_cdf_array(x, shape, scale)
        assert np.allclose(a, b, rtol=1e-13, atol=0, equal_nan=True)
        a = _pykernels.gamma_ppf_array(u, shape, scale)
        b = _ckernels.gamma_ppf_array(u, shape, scale)
        assert np.allclose(a, b, rtol=1e-11, atol=1e-300)


def test_backend_selection_reported():
    assert kernels.BACKEND in ("cython", "python")
