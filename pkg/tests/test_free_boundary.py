"""
Tests for interface extraction, flatness certificates and the viscosity touch test
"""
import numpy as np
import pytest

from shared.models import (
    APObjective,
    BoundarySpec,
    CertificateMode,
    Dirichlet,
    DomainError,
    Grid,
    ScalarField,
    TouchSide,
)
from shared.utils import (
    direction_epsilon,
    distance_to_interface,
    dyadic_flatness_trace,
    extract_interface,
    extract_level_set,
    flatness_certificate,
    hodograph_field,
    interface_length,
    minimize,
    profile,
    verify_certificate,
    viscosity_touch_test,
)


def _tilted_profile(params, degrees, h=1.0 / 64):
    grid = Grid.from_spacing([(-0.5, 0.5), (-0.5, 0.5)], h)
    nu = np.array([np.sin(np.deg2rad(degrees)), np.cos(np.deg2rad(degrees))])
    x, y = grid.mesh()
    return ScalarField(grid, profile(params, x * nu[0] + y * nu[1]), nonneg_flag=True), nu


class TestExtraction:
    """Sign-change scan and marching squares"""

    def test_1d_point(self, gamma_one, unit_interval):
        x = unit_interval.axes()[0]
        fb = extract_interface(ScalarField(unit_interval, profile(gamma_one, x - 0.3)), 0.0)
        assert len(fb.vertices) == 1
        assert abs(fb.vertices[0, 0] - 0.3) <= unit_interval.h

    def test_straight_line(self, gamma_one):
        field, _ = _tilted_profile(gamma_one, 0.0)
        fb = extract_interface(field, 0.0)
        assert len(fb.polylines) == 1
        np.testing.assert_allclose(fb.vertices[:, 1], 0.0, atol=1e-12)
        assert interface_length(fb) == pytest.approx(1.0, rel=1e-12)
        assert interface_length(fb, center=[0.0, 0.0], radius=0.25) == pytest.approx(0.5, rel=1e-9)

    def test_closed_circle(self, unit_square):
        x, y = unit_square.mesh()
        fb = extract_level_set(unit_square, 0.3 - np.sqrt(x ** 2 + y ** 2))
        assert len(fb.polylines) == 1
        line = fb.polylines[0]
        np.testing.assert_allclose(line[0], line[-1])
        assert interface_length(fb) == pytest.approx(2 * np.pi * 0.3, rel=1e-2)

    def test_saddle_cell(self):
        """Checkerboard corner values give two disjoint pieces in the saddle cell"""
        grid = Grid.from_spacing([(0.0, 1.0), (0.0, 1.0)], 1.0 / 8)
        phi = -np.ones(grid.shape)
        phi[3, 3] = phi[4, 4] = 1.0
        fb = extract_level_set(grid, phi)
        assert len(fb.segments) == 8
        assert len(fb.polylines) == 2

    def test_empty(self, unit_square):
        fb = extract_interface(ScalarField(unit_square, np.ones(unit_square.shape)), 0.0)
        assert fb.is_empty
        assert interface_length(fb) == 0.0
        assert np.isinf(distance_to_interface(fb, [0.0, 0.0])).all()

    def test_negative_field(self, unit_interval):
        with pytest.raises(DomainError):
            extract_interface(ScalarField(unit_interval, -np.ones(unit_interval.shape)), 0.0)

    def test_distance(self, gamma_one):
        field, _ = _tilted_profile(gamma_one, 0.0)
        fb = extract_interface(field, 0.0)
        d = distance_to_interface(fb, np.array([[0.1, 0.3], [0.0, -0.2]]))
        np.testing.assert_allclose(d, [0.3, 0.2], atol=1e-12)


class TestFlatness:
    """Direction search and certificate checks"""

    def test_tilted_profile(self, gamma_one):
        """Direction recovered within half a degree, epsilon at rounding level"""
        field, nu0 = _tilted_profile(gamma_one, 10.0)
        cert = flatness_certificate(field, [0.0, 0.0], 0.4, gamma_one)
        angle = np.degrees(np.arccos(np.clip(cert.nu @ nu0, -1.0, 1.0)))
        assert angle <= 0.5
        assert cert.epsilon < 2.0 * field.grid.h / 0.4
        assert cert.n_directions >= 72
        assert verify_certificate(field, cert, gamma_one)

    def test_opposite_direction(self, gamma_one):
        field, nu0 = _tilted_profile(gamma_one, 0.0)
        assert direction_epsilon(field, [0.0, 0.0], 0.25, gamma_one, CertificateMode.U_PROFILE,
                                 -nu0) == pytest.approx(2.0, rel=1e-9)

    def test_hodograph_mode(self, gamma_one):
        """The w-linear certificate of the hodograph field matches the u-profile one"""
        field, _ = _tilted_profile(gamma_one, 20.0)
        w = hodograph_field(field, gamma_one)
        cert_u = flatness_certificate(field, [0.0, 0.0], 0.3, gamma_one, CertificateMode.U_PROFILE)
        cert_w = flatness_certificate(w, [0.0, 0.0], 0.3, gamma_one, CertificateMode.W_LINEAR)
        assert cert_w.epsilon == pytest.approx(cert_u.epsilon, abs=1e-9)

    def test_one_dimension(self, gamma_one, unit_interval):
        x = unit_interval.axes()[0]
        field = ScalarField(unit_interval, profile(gamma_one, 0.5 - x))
        cert = flatness_certificate(field, [0.5], 0.25, gamma_one)
        np.testing.assert_array_equal(cert.nu, [-1.0])
        assert cert.epsilon < 1e-9

    def test_corner_is_not_flat(self, gamma_one):
        """A right-angle corner in the interface admits no flat sandwich"""
        grid = Grid.from_spacing([(-0.5, 0.5), (-0.5, 0.5)], 1.0 / 64)
        x, y = grid.mesh()
        field = ScalarField(grid, profile(gamma_one, y - np.abs(x)), nonneg_flag=True)
        cert = flatness_certificate(field, [0.0, 0.0], 0.3, gamma_one)
        assert cert.epsilon > 0.1

    def test_center_off_interface(self, gamma_one):
        field, _ = _tilted_profile(gamma_one, 0.0)
        with pytest.raises(DomainError):
            flatness_certificate(field, [0.0, 0.2], 0.1, gamma_one)

    def test_ball_exits_grid(self, gamma_one):
        field, _ = _tilted_profile(gamma_one, 0.0)
        with pytest.raises(DomainError):
            flatness_certificate(field, [0.0, 0.0], 0.6, gamma_one)

    def test_dyadic_trace(self, gamma_one):
        field, _ = _tilted_profile(gamma_one, 0.0)
        certs = dyadic_flatness_trace(field, [0.0, 0.0], [0.4, 0.2, 0.1], gamma_one)
        assert [c.radius for c in certs] == [0.4, 0.2, 0.1]
        assert all(c.epsilon < 1e-9 for c in certs)
        with pytest.raises(DomainError):
            dyadic_flatness_trace(field, [0.0, 0.0], [0.1, 0.2], gamma_one)


class TestTouch:
    """Comparison scans at a free-boundary point"""

    @pytest.fixture
    def half_line(self, gamma_one):
        grid = Grid.from_spacing([(-0.5, 1.0)], 1.0 / 64)
        return grid, grid.axes()[0]

    def test_profile_is_not_touched(self, gamma_one, half_line):
        grid, x = half_line
        field = ScalarField(grid, profile(gamma_one, x), nonneg_flag=True)
        above = viscosity_touch_test(field, gamma_one, [0.0], 0.5, 0.5, TouchSide.ABOVE)
        below = viscosity_touch_test(field, gamma_one, [0.0], -0.5, 0.5, TouchSide.BELOW)
        assert above.passed and below.passed

    def test_comparison_touches_itself(self, gamma_one, half_line):
        """A field equal to the comparison function is touched from above"""
        grid, x = half_line
        t = np.clip(x, 0.0, None)
        values = profile(gamma_one, t) + 0.5 * t ** (2.0 - gamma_one.alpha)
        field = ScalarField(grid, values, nonneg_flag=True)
        result = viscosity_touch_test(field, gamma_one, [0.0], 0.5, 0.5, TouchSide.ABOVE)
        assert not result.passed
        assert result.witness["radius"] == 0.5

    def test_sign_of_mu(self, gamma_one, half_line):
        grid, x = half_line
        field = ScalarField(grid, profile(gamma_one, x), nonneg_flag=True)
        with pytest.raises(DomainError):
            viscosity_touch_test(field, gamma_one, [0.0], -0.5, 0.5, TouchSide.ABOVE)
        with pytest.raises(DomainError):
            viscosity_touch_test(field, gamma_one, [0.0], 0.5, 0.5, TouchSide.BELOW)

    @pytest.mark.slow
    def test_minimizer_is_not_touched(self, gamma_one):
        grid = Grid.from_spacing([(0.0, 1.0)], 1.0 / 512)
        boundary = BoundarySpec(dim=1, conditions={
            "left": Dirichlet(lambda x: np.ones_like(x)),
            "right": Dirichlet(lambda x: np.zeros_like(x)),
        })
        u = minimize(grid, boundary, APObjective(gamma_one))
        point = extract_interface(u, 0.0).vertices[0]
        for mu, side in ((0.25, TouchSide.ABOVE), (-0.25, TouchSide.BELOW)):
            assert viscosity_touch_test(u, gamma_one, point, mu, 0.5, side).passed

    @pytest.mark.slow
    def test_planar_minimizer_is_not_touched(self, gamma_one):
        """Eight points on the free boundary of a 2D minimizer, both comparison sides"""
        grid = Grid.from_spacing([(-0.5, 0.5), (-0.25, 1.25)], 1.0 / 64)
        boundary = BoundarySpec.dirichlet_everywhere(2, lambda x, y: profile(gamma_one, y))
        u = minimize(grid, boundary, APObjective(gamma_one))
        vertices = extract_interface(u, 0.0).vertices
        central = vertices[np.abs(vertices[:, 0]) <= 0.3]
        points = central[np.linspace(0, len(central) - 1, 8).astype(int)]
        for point in points:
            for mu, side in ((0.25, TouchSide.ABOVE), (-0.25, TouchSide.BELOW)):
                assert viscosity_touch_test(u, gamma_one, point, mu, 1.0, side).passed
