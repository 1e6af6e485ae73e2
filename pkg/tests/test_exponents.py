"""
Tests for the exponent algebra and the 1D profile
"""
import numpy as np
import pytest
from scipy.integrate import quad

from shared.models import DomainError, HodographDirection
from shared.utils import (
    comparison_psi_u,
    comparison_psi_w,
    dead_threshold,
    derive_params,
    euler_lagrange_rhs,
    hodograph,
    layer_potential,
    multiple_residual,
    potential,
    profile,
    profile_inverse,
    regularization_floor,
    rescale_factor,
)


class TestDeriveParams:
    """Closed forms derived from gamma"""

    def test_gamma_one(self):
        """gamma = 1 gives alpha = 2/3, s = -1/2, c_gamma = 1/16"""
        p = derive_params(1.0)
        assert p.alpha == pytest.approx(2.0 / 3.0, abs=1e-15)
        assert p.s == pytest.approx(-0.5, abs=1e-15)
        assert p.c_gamma == pytest.approx(1.0 / 16.0, abs=1e-15)
        assert p.c_alpha == pytest.approx(1.5 ** (2.0 / 3.0), rel=1e-14)

    @pytest.mark.parametrize("gamma", np.linspace(0.01, 1.99, 25))
    def test_identities(self, gamma):
        """alpha (2 + gamma) = 2 and s = -2 gamma / (2 + gamma)"""
        p = derive_params(gamma)
        assert p.alpha * (2.0 + gamma) == pytest.approx(2.0, abs=1e-14)
        assert p.s == pytest.approx(-2.0 * gamma / (2.0 + gamma), abs=1e-14)
        assert -1.0 < p.s < 0.0

    @pytest.mark.parametrize("gamma", [0.0, 2.0, -0.5, 3.0])
    def test_out_of_range(self, gamma):
        """Endpoints and beyond are rejected"""
        with pytest.raises(DomainError):
            derive_params(gamma)


class TestProfile:
    """u_0 = c_alpha (t+)^alpha"""

    def test_equipartition(self, gamma_params):
        """u0'^2 = u0^(-gamma) for t > 0"""
        t = np.linspace(0.01, 2.0, 50)
        slope = profile(gamma_params, t, 1)
        value = profile(gamma_params, t, 0)
        np.testing.assert_allclose(slope ** 2, value ** (-gamma_params.gamma), rtol=1e-12)

    def test_equation(self, gamma_params):
        """u0'' = -(gamma/2) u0^(-gamma-1)"""
        t = np.linspace(0.05, 1.0, 20)
        second = profile(gamma_params, t, 2)
        rhs = euler_lagrange_rhs(gamma_params, profile(gamma_params, t))
        np.testing.assert_allclose(second, rhs, rtol=1e-12)

    def test_zero_set(self, gamma_one):
        """Vanishes for t <= 0; derivatives blow up at 0"""
        assert profile(gamma_one, -0.3) == 0.0
        assert profile(gamma_one, 0.0) == 0.0
        assert profile(gamma_one, 0.0, 1) == np.inf
        assert profile(gamma_one, 0.0, 2) == -np.inf

    def test_bad_order(self, gamma_one):
        with pytest.raises(DomainError):
            profile(gamma_one, 0.5, 3)

    def test_inverse(self, gamma_params):
        """profile_inverse undoes profile on t >= 0"""
        t = np.linspace(0.0, 3.0, 31)
        np.testing.assert_allclose(profile_inverse(gamma_params, profile(gamma_params, t)), t,
                                   rtol=1e-12, atol=1e-14)

    def test_inverse_negative(self, gamma_one):
        with pytest.raises(DomainError):
            profile_inverse(gamma_one, -1.0)


class TestHodograph:
    """w = c_alpha^(-1/alpha) u^(1/alpha)"""

    def test_profile_is_linear(self, gamma_params):
        """The hodograph of the profile is the distance itself"""
        t = np.linspace(0.0, 2.0, 21)
        w = hodograph(gamma_params, profile(gamma_params, t))
        np.testing.assert_allclose(w, t, rtol=1e-12, atol=1e-14)

    def test_round_trip(self, gamma_one):
        u = np.array([0.0, 0.1, 1.0, 4.0])
        w = hodograph(gamma_one, u, HodographDirection.FORWARD)
        back = hodograph(gamma_one, w, HodographDirection.BACKWARD)
        np.testing.assert_allclose(back, u, rtol=1e-12)

    def test_negative(self, gamma_one):
        with pytest.raises(DomainError):
            hodograph(gamma_one, -0.1)


class TestComparisons:
    """Comparison functions and multiples of the profile"""

    def test_psi_u_reduces_to_profile(self, gamma_one):
        d = np.linspace(0.0, 1.0, 11)
        np.testing.assert_allclose(comparison_psi_u(gamma_one, d, 0.0), profile(gamma_one, d), rtol=1e-14)

    def test_psi_w(self, gamma_one):
        """d + mu d^(1-s) with 1 - s = 3/2 at gamma = 1"""
        assert comparison_psi_w(gamma_one, 0.25, 2.0) == pytest.approx(0.25 + 2.0 * 0.125, rel=1e-14)

    def test_negative_distance(self, gamma_one):
        with pytest.raises(DomainError):
            comparison_psi_u(gamma_one, -0.1, 1.0)

    def test_multiple_signs(self, gamma_params):
        """a >= 1 gives supersolutions, a <= 1 subsolutions, a = 1 solves"""
        t = np.linspace(0.05, 1.0, 10)
        assert np.all(multiple_residual(gamma_params, 1.3, t) <= 0.0)
        assert np.all(multiple_residual(gamma_params, 0.7, t) >= 0.0)
        np.testing.assert_allclose(multiple_residual(gamma_params, 1.0, t), 0.0, atol=1e-12)

    def test_multiple_domain(self, gamma_one):
        with pytest.raises(DomainError):
            multiple_residual(gamma_one, 0.0, 0.5)
        with pytest.raises(DomainError):
            multiple_residual(gamma_one, 1.0, 0.0)


class TestScales:
    """Rescaling, thresholds and the layer integral"""

    def test_rescale_factor(self, gamma_one):
        """lambda = c_gamma^(alpha/2) = (1/16)^(1/3)"""
        assert rescale_factor(gamma_one, False) == 1.0
        assert rescale_factor(gamma_one, True) == pytest.approx(16.0 ** (-1.0 / 3.0), rel=1e-14)

    def test_thresholds(self, gamma_one):
        """tau is the profile at h/2, delta_min the profile at h"""
        h = 1.0 / 128
        assert dead_threshold(gamma_one, h) == pytest.approx(profile(gamma_one, h / 2), rel=1e-14)
        assert regularization_floor(gamma_one, h) == pytest.approx(profile(gamma_one, h), rel=1e-14)
        lam = rescale_factor(gamma_one, True)
        assert dead_threshold(gamma_one, h, True) == pytest.approx(lam * profile(gamma_one, h / 2), rel=1e-14)

    def test_layer_potential(self, gamma_one):
        """Closed form agrees with a quadrature of u0^(-gamma)"""
        d = 0.3
        numeric, _ = quad(lambda t: potential(gamma_one, profile(gamma_one, t)), 0.0, d)
        assert layer_potential(gamma_one, d) == pytest.approx(numeric, rel=1e-6)

    def test_potential_zero_set(self, gamma_one):
        np.testing.assert_array_equal(potential(gamma_one, np.array([0.0, 1.0])), [0.0, 1.0])

    def test_rhs_domain(self, gamma_one):
        with pytest.raises(DomainError):
            euler_lagrange_rhs(gamma_one, 0.0)
