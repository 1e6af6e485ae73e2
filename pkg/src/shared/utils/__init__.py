"""
Numerical core of fblab
"""

from .exponents import (
    derive_params,
    profile,
    profile_inverse,
    comparison_psi_u,
    comparison_psi_w,
    hodograph,
    rescale_factor,
    dead_threshold,
    regularization_floor,
    layer_potential,
    potential,
    euler_lagrange_rhs,
    multiple_residual,
)
from .field import (
    laplacian,
    gradient,
    sample,
    sample_many,
    max_norm,
    inner_product,
    stiffness_matrix,
    dirichlet_energy,
    node_weights,
    boundary_values,
    hodograph_field,
    write_field_csv,
    read_field_csv,
    restrict_to_ball,
    ball_inside,
)
from .free_boundary import (
    extract_interface,
    extract_level_set,
    distance_to_interface,
    interface_length,
    direction_epsilon,
    flatness_certificate,
    verify_certificate,
    dyadic_flatness_trace,
    viscosity_touch_test,
)
from .solver import (
    energy_AP,
    energy_AC,
    energy_F,
    perimeter,
    euler_lagrange_residual,
    w_equation_residual,
    default_solver_config,
    EnergyMinimizer,
    minimize,
    minimize_with_report,
    radial_exterior,
    radial_evaluate,
    sphere_area,
)
from .degenerate_linear import (
    half_grid,
    solve_weighted,
    solve_limit,
    solve,
    weighted_energy,
    barrier_residual,
    limit_pair_difference,
    limit_pair_sup,
    c1alpha_fit,
)
from .experiments import (
    radial_field,
    monotonicity_trace,
    interval_grid,
    interval_boundary,
    perimeter_reference,
    radial_perimeter_reference,
    one_phase_reference,
    gamma_to_2_sweep,
    gamma_to_0_sweep,
    truncation_diagnostic,
    flatness_decay_run,
    harnack_dichotomy_check,
    profile_trap_check,
    multiple_improvement_check,
)
from .artifacts import (
    to_jsonable,
    write_json,
    write_csv,
    write_dat,
    write_plot_stub,
    failure_report,
)

__all__ = [
    'derive_params', 'profile', 'profile_inverse', 'comparison_psi_u', 'comparison_psi_w',
    'hodograph', 'rescale_factor', 'dead_threshold', 'regularization_floor', 'layer_potential',
    'potential', 'euler_lagrange_rhs', 'multiple_residual',
    'laplacian', 'gradient', 'sample', 'sample_many', 'max_norm', 'inner_product',
    'stiffness_matrix', 'dirichlet_energy', 'node_weights', 'boundary_values', 'hodograph_field',
    'write_field_csv', 'read_field_csv', 'restrict_to_ball', 'ball_inside',
    'extract_interface', 'extract_level_set', 'distance_to_interface', 'interface_length',
    'direction_epsilon', 'flatness_certificate', 'verify_certificate', 'dyadic_flatness_trace',
    'viscosity_touch_test',
    'energy_AP', 'energy_AC', 'energy_F', 'perimeter', 'euler_lagrange_residual',
    'w_equation_residual', 'default_solver_config', 'EnergyMinimizer', 'minimize',
    'minimize_with_report', 'radial_exterior', 'radial_evaluate', 'sphere_area',
    'half_grid', 'solve_weighted', 'solve_limit', 'solve', 'weighted_energy', 'barrier_residual',
    'limit_pair_difference', 'limit_pair_sup', 'c1alpha_fit',
    'radial_field', 'monotonicity_trace', 'interval_grid', 'interval_boundary',
    'perimeter_reference', 'radial_perimeter_reference', 'one_phase_reference',
    'gamma_to_2_sweep', 'gamma_to_0_sweep',
    'truncation_diagnostic', 'flatness_decay_run', 'harnack_dichotomy_check',
    'profile_trap_check', 'multiple_improvement_check',
    'to_jsonable', 'write_json', 'write_csv', 'write_dat', 'write_plot_stub', 'failure_report',
]
