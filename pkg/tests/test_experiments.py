"""
Tests for the monotonicity trace, compactness sweeps and the flatness-improvement checks
"""
import numpy as np
import pytest

from shared.models import (
    ConsistencyError,
    DomainError,
    Grid,
    IntervalGeometry,
    RadialGeometry,
    ScalarField,
)
from shared.utils import (
    derive_params,
    flatness_decay_run,
    gamma_to_0_sweep,
    gamma_to_2_sweep,
    harnack_dichotomy_check,
    interval_grid,
    monotonicity_trace,
    multiple_improvement_check,
    one_phase_reference,
    perimeter_reference,
    radial_perimeter_reference,
    profile,
    profile_trap_check,
    radial_exterior,
    radial_field,
    truncation_diagnostic,
)
from shared.utils.experiments import _hausdorff, _parallel_map


def _profile_in_y(params, grid, scale=1.0):
    _, y = grid.mesh()
    return ScalarField(grid, scale * profile(params, y), nonneg_flag=True)



class TestMonotonicity:
    """Phi(r) for pairs with u = 0 on E"""

    def test_half_plane(self, unit_square):
        """u = 0 with E below a horizontal line: Phi is the chord length over r"""
        _, y = unit_square.mesh()
        offset = unit_square.h / 2.0
        radii = [0.1, 0.2, 0.3]
        field = ScalarField(unit_square, np.zeros(unit_square.shape))
        trace = monotonicity_trace(field, y - offset, [0.0, 0.0], radii, "half plane")
        expected = [2.0 * np.sqrt(r ** 2 - offset ** 2) / r for r in radii]
        np.testing.assert_allclose(trace.phi, expected, rtol=1e-6)
        assert np.all(np.diff(trace.phi) >= 0)
        assert trace.description == "half plane"

    def test_constant_field(self):
        """u = c with E empty: only the sphere term survives, Phi = -pi c^2 / r"""
        grid = Grid.from_spacing([(-1.0, 1.0), (-1.0, 1.0)], 1.0 / 32)
        field = ScalarField(grid, np.full(grid.shape, 0.5))
        radii = [0.2, 0.4, 0.6]
        trace = monotonicity_trace(field, np.ones(grid.shape), [0.0, 0.0], radii)
        np.testing.assert_allclose(trace.phi, [-np.pi * 0.25 / r for r in radii], rtol=1e-9)

    @pytest.mark.slow
    def test_rescaled_radial_pair(self):
        """The J_gamma minimizer with its zero set, centred on the free boundary"""
        params = derive_params(1.8)
        sol = radial_exterior(params, 2, rescaled=True)
        fb_radius = sol.free_boundary_radius
        grid = Grid.from_spacing([(fb_radius - 0.625, fb_radius + 0.625), (-0.625, 0.625)], 1.0 / 128)
        field = radial_field(sol, grid)
        scale = min(sol.mu, 0.5)
        radii = [0.5 * scale, 0.75 * scale, scale]
        trace = monotonicity_trace(field, field.values <= 0.0, [fb_radius, 0.0], radii)
        assert np.all(np.diff(trace.phi) >= -0.05 * np.abs(trace.phi[:-1]))

    def test_positive_on_zero_set(self, unit_square):
        _, y = unit_square.mesh()
        field = ScalarField(unit_square, np.ones(unit_square.shape))
        with pytest.raises(ConsistencyError):
            monotonicity_trace(field, y, [0.0, 0.0], [0.1, 0.2])

    def test_radii(self, unit_square):
        _, y = unit_square.mesh()
        field = ScalarField(unit_square, np.zeros(unit_square.shape))
        with pytest.raises(DomainError):
            monotonicity_trace(field, y, [0.0, 0.0], [0.2, 0.1])
        with pytest.raises(DomainError):
            monotonicity_trace(field, y, [0.0, 0.0], [0.1, 0.6])


class TestReferences:
    """Closed-form limits on the interval"""

    def test_perimeter_reference(self):
        geometry = IntervalGeometry(2.0, 1.0)
        value, ramp = perimeter_reference(geometry, interval_grid(geometry, 1.0 / 64))
        assert value == pytest.approx(1.0)
        assert ramp.values[0] == 2.0 and ramp.values[-1] == pytest.approx(1.0)

    def test_perimeter_reference_zero_end(self):
        """Data 1 and 0: the ramp costs 1 and the layer at the zero end one perimeter point"""
        geometry = IntervalGeometry(1.0, 0.0)
        value, ramp = perimeter_reference(geometry, interval_grid(geometry, 1.0 / 64))
        assert value == pytest.approx(2.0)
        assert ramp.values[-1] == 0.0

    def test_perimeter_reference_zero_data(self):
        geometry = IntervalGeometry(0.0, 0.0)
        value, _ = perimeter_reference(geometry, interval_grid(geometry, 1.0 / 64))
        assert value == 0.0

    def test_radial_reference_line(self):
        value, outer = radial_perimeter_reference(1)
        assert value == 2.0
        assert np.isinf(outer)

    def test_radial_reference_plane(self):
        """Annulus capacity 2 pi / log R plus 2 pi R, minimal where R log^2 R = 1"""
        value, outer = radial_perimeter_reference(2)
        assert outer * np.log(outer) ** 2 == pytest.approx(1.0, rel=1e-9)
        assert outer == pytest.approx(2.0207, abs=1e-3)
        assert value == pytest.approx(2.0 * np.pi * (1.0 / np.log(outer) + outer), rel=1e-12)
        assert value == pytest.approx(2.0 * np.pi * 3.4424, rel=1e-3)

    def test_radial_reference_space(self):
        """n = 3: 2 R^3 (1 - 1/R)^2 = 1 at the optimal outer radius"""
        value, outer = radial_perimeter_reference(3)
        assert 2.0 * outer ** 3 * (1.0 - 1.0 / outer) ** 2 == pytest.approx(1.0, rel=1e-9)
        assert value == pytest.approx(4.0 * np.pi * (outer / (outer - 1.0) + outer ** 2), rel=1e-12)
        with pytest.raises(DomainError):
            radial_perimeter_reference(0)

    def test_one_phase_ramp(self):
        """Height 1/2 reaches zero at 1/2: Dirichlet 1/2 plus measure 1/2"""
        geometry = IntervalGeometry(0.5, 0.0)
        value, ramp, provenance = one_phase_reference(geometry, interval_grid(geometry, 1.0 / 256))
        assert value == pytest.approx(1.0)
        assert provenance.startswith("analytic")
        assert ramp.values[0] == 0.5
        assert (ramp.values[ramp.grid.axes()[0] >= 0.5] == 0.0).all()

    def test_one_phase_mirrored(self):
        geometry = IntervalGeometry(0.0, 2.0)
        value, ramp, _ = one_phase_reference(geometry, interval_grid(geometry, 1.0 / 64))
        assert value == pytest.approx(5.0)
        assert ramp.values[0] == 0.0 and ramp.values[-1] == pytest.approx(2.0)

    def test_zero_data(self):
        geometry = IntervalGeometry(0.0, 0.0)
        value, ramp, _ = one_phase_reference(geometry, interval_grid(geometry, 1.0 / 64))
        assert value == 0.0
        assert not ramp.values.any()

    def test_truncation_rows(self):
        geometry = IntervalGeometry(0.5, 0.0)
        _, ramp, _ = one_phase_reference(geometry, interval_grid(geometry, 1.0 / 256))
        rows = truncation_diagnostic(ramp, derive_params(0.1))
        assert [row["t"] for row in rows] == [0.1, 0.05, 0.02, 0.01]
        assert all(row["energy_one_phase"] == pytest.approx(1.0, rel=1e-5) for row in rows)
        assert all(row["relative_gap"] >= 0 for row in rows)


class TestHelpers:
    def test_hausdorff(self):
        a = np.array([[0.0, 0.0], [1.0, 0.0]])
        b = np.array([[0.0, 0.5]])
        assert _hausdorff(a, b) == pytest.approx(np.sqrt(1.25))
        assert _hausdorff(np.empty((0, 2)), np.empty((0, 2))) == 0.0
        assert np.isnan(_hausdorff(a, np.empty((0, 2))))

    def test_parallel_map_keeps_order(self):
        assert _parallel_map(abs, [-3, 1, -2], jobs=2) == [3, 1, 2]
        assert _parallel_map(abs, [-3], jobs=4) == [3]

    def test_radial_field(self, gamma_one):
        sol = radial_exterior(gamma_one, 2)
        grid = Grid.from_spacing([(-2.0, 2.0), (-2.0, 2.0)], 1.0 / 16)
        field = radial_field(sol, grid)
        assert field.values[32, 32] == 1.0
        assert field.values[0, 0] == 0.0


class TestSweepValidation:
    def test_gamma_to_2_ladder(self):
        with pytest.raises(DomainError):
            gamma_to_2_sweep(IntervalGeometry(1.0, 0.0), [1.9, 1.5])
        with pytest.raises(DomainError):
            gamma_to_2_sweep(IntervalGeometry(1.0, 0.0), [0.5, 1.5])

    def test_gamma_to_0_ladder(self):
        with pytest.raises(DomainError):
            gamma_to_0_sweep(IntervalGeometry(0.5, 0.0), [0.1, 0.2])
        with pytest.raises(DomainError):
            gamma_to_0_sweep(RadialGeometry(2), [0.2, 0.1])


@pytest.mark.slow
class TestSweeps:
    """Full sweeps; each member is a minimization or a shooting solve"""

    def test_radial_line_is_at_the_limit(self):
        """On the line every J_gamma layer from 1 to 0 costs exactly 1"""
        report = gamma_to_2_sweep(RadialGeometry(1), [1.5, 1.9], jobs=1)
        assert report.complete
        assert report.reference_value == pytest.approx(2.0)
        for energy, gap in zip(report.energies, report.energy_gaps):
            assert energy.total == pytest.approx(2.0, rel=1e-4)
            assert abs(gap) < 1e-3

    def test_interval_gaps_shrink(self):
        """Data 1 and 0 on [0, 1]: J_gamma minima rise towards ramp plus one perimeter point"""
        report = gamma_to_2_sweep(IntervalGeometry(1.0, 0.0), [1.5, 1.8, 1.95], h=1.0 / 256, jobs=1)
        assert report.complete
        assert report.reference_value == pytest.approx(2.0)
        totals = [energy.total for energy in report.energies]
        assert all(1.0 < total < 2.0 for total in totals)
        assert all(b > a for a, b in zip(totals, totals[1:]))
        gaps = [abs(gap) for gap in report.energy_gaps]
        assert all(b < a for a, b in zip(gaps, gaps[1:]))

    def test_constant_data_vanishes(self):
        """Data 1 at both ends: the minima follow c_gamma down to 0"""
        report = gamma_to_2_sweep(IntervalGeometry(1.0, 1.0), [1.5, 1.8, 1.95], h=1.0 / 128, jobs=1)
        assert report.complete
        assert report.reference_value == 0.0
        gaps = report.energy_gaps
        assert all(b < a for a, b in zip(gaps, gaps[1:]))
        for gamma, gap in zip(report.gammas, gaps):
            assert 0.0 < gap <= 1.01 * (2.0 - gamma) ** 2 / 16.0
        assert all(distance < 0.01 for distance in report.l2_distances)

    def test_radial_plane_reference(self):
        report = gamma_to_2_sweep(RadialGeometry(2), [1.5, 1.8], jobs=1)
        assert report.complete
        assert report.reference_value == pytest.approx(radial_perimeter_reference(2)[0])
        assert report.reference_provenance.startswith("annulus")
        assert len(report.free_boundary_radii) == 2

    def test_gamma_to_0_interval(self):
        report = gamma_to_0_sweep(IntervalGeometry(0.5, 0.0), [0.4, 0.2], h=1.0 / 128, jobs=1)
        assert report.complete
        assert report.gammas == [0.4, 0.2]
        assert report.reference_value == pytest.approx(1.0)
        assert len(report.l2_distances) == 2
        assert len(report.truncation) == 8


class TestFlatnessDecay:
    def test_flat_profile_is_floor_dominated(self, gamma_one, unit_square):
        field = _profile_in_y(gamma_one, unit_square)
        report = flatness_decay_run(field, gamma_one, [0.0, 0.0], 0.4, rho_ladder=[0.5])
        assert report.in_regime
        assert len(report.certificates) == 2
        row = report.rows[0]
        assert row.radius == pytest.approx(0.2)
        assert row.floor_dominated and not row.flagged

    def test_radial_interface_contracts(self, gamma_one):
        """Zooming in on the circle of the plane radial minimizer: no ratio above 1/2 + slack"""
        sol = radial_exterior(gamma_one, 2)
        fb_radius = sol.free_boundary_radius
        grid = Grid.from_spacing([(fb_radius - 0.125, fb_radius + 0.125), (-0.125, 0.125)], 1.0 / 512)
        field = radial_field(sol, grid)
        report = flatness_decay_run(field, gamma_one, [fb_radius, 0.0], 0.05, rho_ladder=[0.25, 0.25])
        assert report.in_regime
        assert len(report.rows) == 2
        assert not any(row.flagged for row in report.rows)

    def test_curved_interface_out_of_regime(self, gamma_one, unit_square):
        x, y = unit_square.mesh()
        field = ScalarField(unit_square, profile(gamma_one, 0.15 - np.sqrt(x ** 2 + y ** 2)))
        report = flatness_decay_run(field, gamma_one, [0.15, 0.0], 0.12)
        assert not report.in_regime
        assert report.rows == []

    def test_contraction_factors(self, gamma_one, unit_square):
        field = _profile_in_y(gamma_one, unit_square)
        with pytest.raises(DomainError):
            flatness_decay_run(field, gamma_one, [0.0, 0.0], 0.4, rho_ladder=[1.5])


class TestHarnack:
    """Strip trapping of the hodograph field"""

    def test_half_shift(self, unit_square):
        """w = (x_n + a/2)+ improves by one half from both sides"""
        _, y = unit_square.mesh()
        a = 0.2
        w = ScalarField(unit_square, np.clip(y + 0.5 * a, 0.0, None))
        report = harnack_dichotomy_check(w, [0.0, 0.0], 0.4, a)
        assert report.trapped
        assert report.c_plus == pytest.approx(0.5)
        assert report.c_minus == pytest.approx(0.5)
        assert report.best == pytest.approx(0.5)

    def test_not_trapped(self, unit_square):
        _, y = unit_square.mesh()
        w = ScalarField(unit_square, np.clip(y + 0.4, 0.0, None))
        assert not harnack_dichotomy_check(w, [0.0, 0.0], 0.4, 0.2).trapped

    def test_arguments(self, unit_square):
        w = ScalarField(unit_square, np.zeros(unit_square.shape))
        with pytest.raises(DomainError):
            harnack_dichotomy_check(w, [0.0, 0.0], 0.4, 0.0)
        with pytest.raises(DomainError):
            harnack_dichotomy_check(w, [0.0, 0.0], 0.6, 0.2)


class TestTrapping:
    """Profile sandwiches away from the interface"""

    def test_scaled_profile(self, gamma_one, unit_square):
        field = _profile_in_y(gamma_one, unit_square, 1.1)
        report = profile_trap_check(field, gamma_one, eps_flat=0.05)
        assert report.C_lower == 0.0
        assert report.C_upper == pytest.approx(0.1, rel=1e-9)
        assert report.C == pytest.approx(2.0, rel=1e-9)

    def test_needs_interface(self, gamma_one, unit_square):
        field = ScalarField(unit_square, np.ones(unit_square.shape))
        with pytest.raises(DomainError):
            profile_trap_check(field, gamma_one, eps_flat=0.05)
        with pytest.raises(DomainError):
            profile_trap_check(_profile_in_y(gamma_one, unit_square), gamma_one, eps_flat=0.0)

    def test_exact_profile_needs_no_improvement(self, gamma_one, unit_square):
        report = multiple_improvement_check(_profile_in_y(gamma_one, unit_square), gamma_one, 0.2)
        assert report.trapped
        assert report.a_minus == pytest.approx(1.0) and report.a_plus == pytest.approx(1.0)
        assert report.c is None

    def test_constant_multiple_does_not_improve(self, gamma_one, unit_square):
        report = multiple_improvement_check(_profile_in_y(gamma_one, unit_square, 1.2), gamma_one, 0.2)
        assert report.a_plus == pytest.approx(1.2)
        assert report.a_plus_inner == pytest.approx(1.2)
        assert report.c_minus is None
        assert report.c == pytest.approx(0.0, abs=1e-9)

    def test_small_gamma_rejected(self, unit_square):
        params = derive_params(0.5)
        with pytest.raises(DomainError):
            multiple_improvement_check(_profile_in_y(params, unit_square), params, 0.2)
