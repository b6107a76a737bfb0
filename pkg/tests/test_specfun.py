import math

import numpy as np
import pytest
from scipy import integrate, special

from slcalib import specfun


@pytest.mark.parametrize("k", [0.0, 0.3, 0.7, 0.95, 0.999, 1.0])
def test_jacobi_matches_scipy(k):
    t = np.linspace(-6, 6, 101)
    sn, cn, dn = specfun.jacobi(t, k)
    ref = special.ellipj(t, k * k)
    assert np.allclose(sn, ref[0], atol=1e-12)
    assert np.allclose(cn, ref[1], atol=1e-12)
    assert np.allclose(dn, ref[2], atol=1e-12)


def test_jacobi_identities():
    t = np.linspace(0, 10, 57)
    sn, cn, dn = specfun.jacobi(t, 0.6)
    assert np.allclose(sn ** 2 + cn ** 2, 1, atol=1e-14)
    assert np.allclose(dn ** 2 + 0.36 * sn ** 2, 1, atol=1e-14)


def test_jacobi_rejects_bad_modulus():
    with pytest.raises(ValueError):
        specfun.jacobi(0.5, 1.5)


@pytest.mark.parametrize("k", [0.0, 0.5, 0.9])
def test_quarter_period_matches_scipy(k):
    assert specfun.quarter_period(k) == pytest.approx(special.ellipk(k * k), rel=1e-14)


def test_quarter_period_is_a_zero_of_cn():
    K = specfun.quarter_period(0.8)
    sn, cn, _ = specfun.jacobi(K, 0.8)
    assert abs(cn) < 1e-12 and sn == pytest.approx(1.0, abs=1e-12)


def test_adaptive_simpson_polynomial_and_sine():
    assert specfun.adaptive_simpson(lambda x: x ** 3, 0.0, 2.0) == pytest.approx(4.0, abs=1e-13)
    assert specfun.adaptive_simpson(math.sin, 0.0, math.pi) == pytest.approx(2.0, abs=1e-11)


def test_f_cosh_against_quad():
    for t in (0.5, 2.0, 7.0):
        ref, _ = integrate.quad(lambda s: math.sqrt(math.cosh(s)), 0, t, epsabs=1e-13)
        assert specfun.f_cosh(t) == pytest.approx(ref, rel=1e-11)


def test_f_cosh_small_t_taylor_and_oddness():
    for t in (1e-3, 1e-2, 5e-2):
        assert abs(specfun.f_cosh(t) - (t + t ** 3 / 12)) < 1e-3 * t ** 4 + 1e-15
    assert specfun.f_cosh(-1.3) == pytest.approx(-specfun.f_cosh(1.3))


def test_f_cosh_array_matches_scalar():
    t = np.array([0.3, -1.2, 2.5, 0.0])
    out = specfun.f_cosh(t)
    assert np.allclose(out, [specfun.f_cosh(float(x)) for x in t], atol=1e-12)


def test_cubic_roots_bracket_zero_and_solve():
    al = (1 / 3, 2 / 3, 2 / 3)
    for A2 in (1e-4, 0.02, 0.1):
        A = math.sqrt(A2)
        g = specfun.cubic_roots_sorted(*al, A)
        assert g[0] <= 0 <= g[1] <= g[2]
        for r in g:
            assert abs(specfun.q_poly(al, r) - A2) < 1e-13


def test_cubic_roots_small_A_limit():
    al = (0.5, 0.75, 1.5)
    g = specfun.cubic_roots_sorted(*al, 1e-7)
    assert np.allclose(g, (-0.5, 0.75, 1.5), atol=1e-12)


def test_cubic_roots_reject_bad_inputs():
    al = (1 / 3, 2 / 3, 2 / 3)
    with pytest.raises(specfun.SingularParameters):
        specfun.cubic_roots_sorted(*al, math.sqrt(al[0] * al[1] * al[2]))
    with pytest.raises(ValueError):
        specfun.cubic_roots_sorted(*al, 1.0)
    with pytest.raises(ValueError):
        specfun.cubic_roots_sorted(1.0, 1.0, 1.0, 0.1)


def test_theta_integrals_initial_slopes():
    al = (1 / 3, 2 / 3, 2 / 3)
    A = 0.2
    g = specfun.cubic_roots_sorted(*al, A)
    h = 1e-4
    th_p = np.array(specfun.theta_integrals(al, A, g, h, math.pi / 2))
    th_m = np.array(specfun.theta_integrals(al, A, g, -h, math.pi / 2))
    slope = (th_p - th_m) / (2 * h)
    assert slope[0] == pytest.approx(-A / (al[0] + g[0]), rel=1e-7)
    assert slope[1] == pytest.approx(A / (al[1] - g[0]), rel=1e-7)
    assert slope[2] == pytest.approx(A / (al[2] - g[0]), rel=1e-7)


def test_theta_integrals_zero_A_is_constant():
    al = (1 / 3, 2 / 3, 2 / 3)
    th = specfun.theta_integrals(al, 0.0, (0.0, 0.0, 0.0), np.array([0.0, 1.0]), 0.4)
    assert np.allclose(th[0], 0.4) and np.allclose(th[1:], 0.0)
