#!/usr/bin/env python3
"""
Special functions and Mellin-Barnes quadrature
----------------------------------------------
Checks the scipy.special wrappers for the gamma, Bessel, error and
incomplete-gamma functions against mpmath, and the Meijer-G / Fox-H /
bivariate Fox-H contour quadrature against closed forms and direct quadrature.
"""

import math
import sys

import mpmath
import numpy as np
import pytest
from scipy.integrate import dblquad

from utils.errors import ContourSeparationError, DomainError, PoleError
from utils.specfun import (
    BivariateFoxHSpec,
    ContourConfig,
    FoxHSpec,
    GammaFactor,
    JointGammaFactor,
    bessel_i0,
    bessel_k,
    complex_log_gamma,
    erf,
    erfc,
    fox_h,
    fox_h_bivariate,
    fox_h_bivariate_series,
    gamma_fn,
    log_bessel_i0,
    log_bessel_k,
    log_gamma,
    meijer_g,
    separate_parameters,
    upper_incomplete_gamma,
)
from utils.suite_utils import run_suite

mpmath.mp.dps = 30


# ---------------------------------------------------------------------------
# Gamma
# ---------------------------------------------------------------------------

def test_log_gamma_matches_mpmath():
    for x in (0.1, 0.5, 1.0, 2.5, 10.0, 50.3, 171.9):
        expected = float(mpmath.loggamma(x))
        assert abs(log_gamma(x) - expected) <= 1e-10 * max(1.0, abs(expected))


def test_complex_log_gamma_matches_mpmath_modulo_branch():
    for z in (0.5 + 3j, -2.5 + 0.1j, 10 - 20j, 0.01 + 0.01j, -7.3 - 4j):
        diff = complex_log_gamma(z) - complex(mpmath.loggamma(z))
        assert abs(diff.real) < 1e-9
        wrapped = (diff.imag + math.pi) % (2 * math.pi) - math.pi
        assert abs(wrapped) < 1e-9


def test_complex_log_gamma_vectorized():
    z = np.array([1.0 + 0j, 2.0 + 0j, 5.0 + 0j])
    out = complex_log_gamma(z)
    assert out.shape == (3,)
    np.testing.assert_allclose(out.real, [0.0, 0.0, math.log(24.0)], atol=1e-12)


def test_gamma_poles_raise():
    for z in (0.0, -1.0, -2.0, -10.0):
        with pytest.raises(PoleError):
            complex_log_gamma(z)


def test_gamma_sign_on_negative_axis():
    assert gamma_fn(-0.5) == pytest.approx(-2.0 * math.sqrt(math.pi), rel=1e-10)
    assert gamma_fn(-1.5) == pytest.approx(4.0 * math.sqrt(math.pi) / 3.0, rel=1e-10)
    assert gamma_fn(5.0) == pytest.approx(24.0, rel=1e-12)


def test_log_gamma_rejects_non_positive():
    with pytest.raises(DomainError):
        log_gamma(-1.5)


# ---------------------------------------------------------------------------
# Bessel, error and incomplete gamma functions
# ---------------------------------------------------------------------------

def test_log_bessel_k_matches_mpmath():
    for order in (0.0, 0.7, 2.3, 10.5):
        for x in (0.01, 1.0, 5.0, 40.0):
            expected = float(mpmath.log(mpmath.besselk(order, x)))
            assert abs(float(log_bessel_k(order, x)) - expected) <= 1e-8 * max(1.0, abs(expected))


def test_bessel_k_half_order_closed_form():
    x = np.array([0.2, 1.3, 7.0])
    np.testing.assert_allclose(bessel_k(0.5, x), np.sqrt(np.pi / (2 * x)) * np.exp(-x), rtol=1e-9)


def test_bessel_i0_matches_mpmath():
    for x in (0.0, 0.5, 3.0, 30.0, 700.0):
        expected = float(mpmath.log(mpmath.besseli(0, x)))
        assert abs(float(log_bessel_i0(x)) - expected) <= 1e-9 * max(1.0, abs(expected))
    assert float(bessel_i0(0.0)) == pytest.approx(1.0, abs=1e-15)


def test_erf_and_erfc_match_mpmath():
    for x in (-2.0, 0.0, 0.3, 2.9, 3.1, 6.0, 26.0):
        assert float(erf(x)) == pytest.approx(float(mpmath.erf(x)), rel=1e-9, abs=1e-15)
        assert float(erfc(x)) == pytest.approx(float(mpmath.erfc(x)), rel=1e-9)


def test_erf_plus_erfc_is_one():
    x = np.linspace(-5, 5, 41)
    np.testing.assert_allclose(erf(x) + erfc(x), 1.0, atol=1e-14)


def test_upper_incomplete_gamma_matches_mpmath():
    for p in (0.5, 1.0, 3.2):
        for x in (0.0, 0.1, 2.0, 15.0):
            expected = float(mpmath.gammainc(p, x))
            assert float(upper_incomplete_gamma(p, x)) == pytest.approx(expected, rel=1e-9)


def test_upper_incomplete_gamma_small_order_keeps_precision():
    # Gamma(p) - gamma(p, x) cancels for small p; the regularized form does not
    for p, x in ((0.01, 0.5), (0.01, 1e-3), (0.001, 2.0)):
        expected = float(mpmath.gammainc(p, x))
        assert float(upper_incomplete_gamma(p, x)) == pytest.approx(expected, rel=1e-10)


def test_upper_incomplete_gamma_vectorized():
    x = np.array([0.0, 1.0, 4.0])
    np.testing.assert_allclose(upper_incomplete_gamma(1.0, x), np.exp(-x), rtol=1e-13)


def test_upper_incomplete_gamma_domain():
    with pytest.raises(DomainError):
        upper_incomplete_gamma(0.0, 1.0)
    with pytest.raises(DomainError):
        upper_incomplete_gamma(1.0, -0.5)


# ---------------------------------------------------------------------------
# Univariate Mellin-Barnes integrals
# ---------------------------------------------------------------------------

def test_meijer_exponential():
    spec = FoxHSpec.meijer(1, 0, [], [0.0])
    for z in (0.05, 0.7, 4.0):
        assert meijer_g(spec, z) == pytest.approx(math.exp(-z), rel=1e-8)


def test_meijer_rational():
    # G^{1,1}_{1,1}(z | 0; 0) = 1 / (1 + z)
    spec = FoxHSpec.meijer(1, 1, [0.0], [0.0])
    for z in (0.01, 0.5, 3.0, 100.0):
        assert meijer_g(spec, z) == pytest.approx(1.0 / (1.0 + z), rel=1e-8)


def test_meijer_bessel_form():
    # G^{2,0}_{0,2}(z | a, b) = 2 z^((a+b)/2) K_{a-b}(2 sqrt(z))
    a, b, z = 1.7, 0.4, 2.3
    expected = 2 * z ** ((a + b) / 2) * float(bessel_k(a - b, 2 * math.sqrt(z)))
    assert meijer_g(FoxHSpec.meijer(2, 0, [], [a, b]), z) == pytest.approx(expected, rel=1e-8)


def test_meijer_against_mpmath_cdf_kernel():
    eta2, alpha, beta, z = 1.3, 4.2, 2.1, 2.0
    spec = FoxHSpec.meijer(4, 0, [1.0 + eta2, 1.0], [0.0, eta2, alpha, beta])
    expected = float(mpmath.meijerg([[], [1.0 + eta2, 1.0]], [[0.0, eta2, alpha, beta], []], z))
    assert meijer_g(spec, z) == pytest.approx(expected, rel=1e-7)


def test_meijer_log_scale_applied():
    spec = FoxHSpec.meijer(1, 0, [], [0.0])
    assert meijer_g(spec, 1.0, log_scale=math.log(3.0)) == pytest.approx(3.0 * math.exp(-1.0), rel=1e-8)


def test_fox_h_scaled_factor():
    # H^{1,0}_{0,1}[z | (0, 2)] = exp(-sqrt(z)) / 2
    spec = FoxHSpec.build(1, 0, [], [(0.0, 2.0)])
    for z in (0.3, 2.0, 9.0):
        assert fox_h(spec, z) == pytest.approx(0.5 * math.exp(-math.sqrt(z)), rel=1e-8)


def test_meijer_rejects_non_unit_scales():
    with pytest.raises(DomainError):
        meijer_g(FoxHSpec.build(1, 0, [], [(0.0, 2.0)]), 1.0)


def test_inseparable_pole_families():
    # Gamma(u) poles start at 0, Gamma(-1 - u) poles at -1
    spec = FoxHSpec.meijer(1, 1, [2.0], [0.0])
    with pytest.raises(ContourSeparationError):
        meijer_g(spec, 1.0)


def test_explicit_contour_on_pole_rejected():
    spec = FoxHSpec.meijer(1, 0, [], [0.0])
    with pytest.raises(ContourSeparationError):
        meijer_g(spec, 1.0, ContourConfig().explicit(-1.0))


def test_explicit_contour_picks_up_residue():
    # moving the line left of u = 0 drops the residue of Gamma(u) z^-u, which is 1
    spec = FoxHSpec.meijer(1, 0, [], [0.0])
    z = 0.8
    shifted = meijer_g(spec, z, ContourConfig().explicit(-0.5))
    assert shifted == pytest.approx(math.exp(-z) - 1.0, rel=1e-8)


def test_non_positive_argument():
    with pytest.raises(DomainError):
        meijer_g(FoxHSpec.meijer(1, 0, [], [0.0]), 0.0)


def test_kernel_validation():
    with pytest.raises(DomainError):
        GammaFactor(0.5, 0.0)
    with pytest.raises(DomainError):
        ContourConfig(nodes=8)
    with pytest.raises(DomainError):
        ContourConfig(offset_mode="explicit")


# ---------------------------------------------------------------------------
# Bivariate Mellin-Barnes integrals
# ---------------------------------------------------------------------------

# Gamma(1 - u - v) joint factor
_JOINT = (JointGammaFactor(shift=0.0, scale1=1.0, scale2=1.0),)


def test_bivariate_closed_form():
    # (1/(2 pi i)^2) int int Gamma(u) Gamma(v) Gamma(1 - u - v) x^-u y^-v = (1 + y) / (1 + x + y)
    kernel = FoxHSpec.meijer(1, 0, [], [0.0])
    for x, y in ((0.5, 2.0), (3.0, 0.2)):
        value = fox_h_bivariate_series(_JOINT, kernel, [kernel], x, y)[0]
        assert value == pytest.approx((1.0 + y) / (1.0 + x + y), rel=1e-5)


def test_bivariate_series_shares_grid():
    kernel = FoxHSpec.meijer(1, 0, [], [0.0])
    shifted = FoxHSpec.meijer(1, 0, [], [0.5])
    x, y = 0.7, 1.5
    values = fox_h_bivariate_series(_JOINT, kernel, [kernel, shifted], x, y)
    assert values.shape == (2,)
    assert values[0] == pytest.approx((1.0 + y) / (1.0 + x + y), rel=1e-5)
    expected = math.gamma(1.5) * math.sqrt(y) * (1.0 + x + y) ** -1.5
    assert values[1] == pytest.approx(expected, rel=1e-5)


def test_bivariate_without_joint_factor_separates():
    k1 = FoxHSpec.meijer(1, 0, [], [0.0])
    k2 = FoxHSpec.meijer(1, 1, [0.0], [0.0])
    value = fox_h_bivariate_series((), k1, [k2], 0.4, 1.5)[0]
    assert value == pytest.approx(math.exp(-0.4) / 2.5, rel=1e-5)


def test_bivariate_against_double_quadrature():
    # Gamma(1 - u - v) = int t^(-u-v) e^-t dt and
    # Gamma(0.5 + u) Gamma(1.2 + u) z^-u -> z^0.5 int s^-0.3 exp(-s - z/s) ds
    spec = BivariateFoxHSpec(_JOINT, FoxHSpec.meijer(2, 0, [], [0.5, 1.2]), FoxHSpec.meijer(1, 0, [], [0.5]))

    def integrand(s, t, x, y):
        return (math.exp(-t * (1.0 + y) - s - x * t / s) * s ** -0.3
                * math.sqrt(x * t) * math.sqrt(y * t))

    for x, y in ((0.6, 1.3), (2.0, 0.4)):
        expected, _ = dblquad(integrand, 0.0, np.inf, lambda t: 0.0, lambda t: np.inf, args=(x, y),
                              epsabs=1e-13, epsrel=1e-10)
        assert fox_h_bivariate(spec, x, y) == pytest.approx(expected, rel=1e-5)


def test_bivariate_requires_positive_arguments():
    kernel = FoxHSpec.meijer(1, 0, [], [0.0])
    with pytest.raises(DomainError):
        fox_h_bivariate_series(_JOINT, kernel, [kernel], -1.0, 1.0)


# ---------------------------------------------------------------------------
# Degenerate parameter separation
# ---------------------------------------------------------------------------

def test_separate_equal_parameters():
    a, b, note = separate_parameters(2.0, 2.0)
    assert note is not None
    assert a != b
    assert abs(a - b) == pytest.approx(1e-4)


def test_separate_integer_gap():
    a, b, note = separate_parameters(2.0, 3.0, mode="integer")
    assert note is not None
    assert abs((b - a) - round(b - a)) > 1e-6


def test_separate_leaves_distinct_values():
    assert separate_parameters(2.0, 2.5) == (2.0, 2.5, None)
    assert separate_parameters(2.0, 2.5, mode="integer") == (2.0, 2.5, None)


def run_test_suite():
    return run_suite("Special functions", globals())


if __name__ == "__main__":
    sys.exit(0 if run_test_suite() else 1)
