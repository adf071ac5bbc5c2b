import math
from math import comb

import numpy as np
import pytest
from scipy import special

from phasecrystal.errors import NonConvergence
from phasecrystal.specfun import (
    QuadratureSpec, bessel_i0, bessel_i0e, bessel_j, bessel_j_table, hermite, hermite_table,
    integrate, laguerre_gen, laguerre_table, log_factorial, log_gamma_ratio,
)


class TestHermite:
    @pytest.mark.parametrize("n,x,expected", [(0, 3.7, 1.0), (2, 1.0, 2.0), (3, 0.5, -5.0)])
    def test_listed_values(self, n, x, expected):
        assert hermite(n, x) == pytest.approx(expected, abs=1e-14)

    def test_matches_power_form(self):
        xs = np.linspace(-3, 3, 61)
        for n in range(11):
            coeffs = special.hermite(n).coeffs
            direct = np.polyval(coeffs, xs)
            got = hermite(n, xs)
            scale = np.maximum(np.abs(direct), 1.0)
            assert np.max(np.abs(got - direct) / scale) < 1e-10

    def test_table_rows_agree_with_single(self):
        x = np.array([-1.3, 0.0, 2.2])
        tab = hermite_table(8, x)
        assert tab.shape == (9, 3)
        for n in range(9):
            np.testing.assert_allclose(tab[n], hermite(n, x), rtol=1e-14)


class TestLaguerre:
    def test_value_at_zero_is_one(self):
        for n in range(30):
            assert laguerre_gen(n, 0, 0.0) == 1.0

    @pytest.mark.parametrize("n,k,x,expected", [(1, 1, 0.5, 1.5), (2, 0, 1.0, -0.5)])
    def test_listed_values(self, n, k, x, expected):
        assert laguerre_gen(n, k, x) == pytest.approx(expected, abs=1e-14)

    def test_binomial_at_origin(self):
        for n in range(11):
            for k in range(11):
                assert laguerre_gen(n, k, 0.0) == comb(n + k, n)

    def test_against_scipy(self):
        xs = np.linspace(0, 30, 41)
        for n in (0, 1, 5, 17):
            for k in (0, 1, 4):
                np.testing.assert_allclose(laguerre_gen(n, k, xs), special.eval_genlaguerre(n, k, xs),
                                           rtol=1e-9, atol=1e-9)

    def test_table_shape(self):
        assert laguerre_table(6, 2, np.zeros(4)).shape == (7, 4)


class TestBesselI0:
    def test_zero(self):
        assert bessel_i0(0.0) == 1.0

    def test_series_value_at_one(self):
        series = sum((0.5) ** (2 * m) / math.factorial(m) ** 2 for m in range(20))
        assert bessel_i0(1.0) == pytest.approx(series, rel=1e-14)
        assert bessel_i0(1.0) == pytest.approx(1.2660658777520082, rel=1e-14)

    def test_scaled_asymptote(self):
        assert bessel_i0e(100.0) == pytest.approx(1.0 / math.sqrt(2 * math.pi * 100.0), rel=1e-2)

    def test_scaled_against_scipy_across_switch(self):
        xs = np.concatenate([np.linspace(0, 29.9, 50), np.linspace(30.1, 500, 50)])
        np.testing.assert_allclose(bessel_i0e(xs), special.i0e(xs), rtol=1e-13)


class TestBesselJ:
    def test_origin(self):
        assert bessel_j(0, 0.0) == 1.0
        for j in (1, 2, 7, -3):
            assert bessel_j(j, 0.0) == 0.0

    def test_series_value(self):
        series = sum((-1) ** m * 0.5 ** (2 * m + 1) / (math.factorial(m) * math.factorial(m + 1))
                     for m in range(20))
        assert bessel_j(1, 1.0) == pytest.approx(series, rel=1e-13)

    def test_negative_order_parity(self):
        for j in range(1, 8):
            assert bessel_j(-j, 2.3) == pytest.approx((-1) ** j * bessel_j(j, 2.3), rel=1e-14)

    @pytest.mark.parametrize("x", [0.5, 2.0, 10.0])
    def test_sum_of_squares(self, x):
        j_max = int(x + 40)
        tab = bessel_j_table(j_max, np.array(x))
        total = tab[0] ** 2 + 2.0 * np.sum(tab[1:] ** 2)
        assert total == pytest.approx(1.0, abs=1e-10)

    def test_against_scipy(self):
        x = np.linspace(-20, 20, 81)
        tab = bessel_j_table(30, x)
        for j in range(31):
            np.testing.assert_allclose(tab[j], special.jv(j, x), atol=1e-13)


class TestLogGamma:
    def test_log_factorial(self):
        assert log_factorial(0) == 0.0
        assert log_factorial(20) == pytest.approx(math.log(math.factorial(20)), rel=1e-14)

    def test_gamma_ratio_large_arguments(self):
        # exp of the ratio for N = 400 overflows no intermediate
        val = log_gamma_ratio(200.5, 200.0)
        assert val == pytest.approx(special.gammaln(200.5) - special.gammaln(200.0), rel=1e-12)


class TestIntegrate:
    def test_gaussian(self):
        val, err = integrate(lambda x: np.exp(-x * x), QuadratureSpec(8.0, tol=1e-12))
        assert val == pytest.approx(math.sqrt(math.pi), abs=1e-11)
        assert err <= 1e-11

    def test_zero(self):
        val, _ = integrate(lambda x: np.zeros_like(x), QuadratureSpec(3.0))
        assert val == 0.0

    def test_laguerre_moment(self):
        # int e^{-x^2/2} L2(x^2) = int e^{-x^2/2}(1 - 2x^2 + x^4/2): moments 1, 1, 3 times sqrt(2 pi)
        expected = math.sqrt(2 * math.pi) * (1 - 2 * 1 + 0.5 * 3)
        val, _ = integrate(lambda x: np.exp(-x * x / 2) * laguerre_gen(2, 0, x * x),
                           QuadratureSpec(8.0, tol=1e-12))
        assert val == pytest.approx(expected, abs=1e-11)

    def test_shifted_window(self):
        val, _ = integrate(lambda x: np.ones_like(x), QuadratureSpec(1.0, center=5.0))
        assert val == pytest.approx(2.0, abs=1e-14)

    def test_nonconvergence(self):
        with pytest.raises(NonConvergence):
            integrate(lambda x: np.sign(x - 0.1234567) * np.abs(x - 0.1234567) ** -0.9,
                      QuadratureSpec(1.0, tol=1e-14, max_depth=3))

    def test_quadrature_spec_validation(self):
        with pytest.raises(ValueError):
            QuadratureSpec(0.0)
        with pytest.raises(ValueError):
            QuadratureSpec(1.0, tol=0.0)
