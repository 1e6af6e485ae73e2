"""
Closed-form oracle suite behind the `validate` subcommand
"""
import logging
from dataclasses import dataclass
from typing import Callable, List

import numpy as np

from shared.models import (
    BarrierId,
    CertificateMode,
    Grid,
    ScalarField,
    WeightedProblem,
)
from shared.utils import (
    barrier_residual,
    derive_params,
    energy_AP,
    euler_lagrange_residual,
    flatness_certificate,
    half_grid,
    limit_pair_sup,
    monotonicity_trace,
    multiple_residual,
    profile,
    radial_exterior,
    solve_weighted,
)

logger = logging.getLogger(__name__)


@dataclass
class OracleCheck:
    name: str
    passed: bool
    value: float
    bound: float


def check_exponent_identities() -> OracleCheck:
    """c_alpha closed forms and the equipartition u0'^2 = u0^(-gamma) over 50 gammas"""
    worst = 0.0
    for gamma in np.linspace(0.01, 1.99, 50):
        params = derive_params(gamma)
        t = 0.3
        slope_sq = profile(params, t, 1) ** 2
        potential = profile(params, t, 0) ** (-gamma)
        worst = max(worst, abs(slope_sq - potential) / potential)
        worst = max(worst, abs(params.alpha * (2.0 + gamma) - 2.0))
    return OracleCheck("exponent identities", worst <= 1e-12, worst, 1e-12)


def check_profile_energy() -> OracleCheck:
    """energy_AP of the exact profile on [0, 1] at gamma = 1 against (8/3)(3/2)^(4/3)"""
    params = derive_params(1.0)
    grid = Grid.from_spacing([(0.0, 1.0)], 1.0 / 4096)
    field = ScalarField(grid, profile(params, grid.axes()[0]), nonneg_flag=True)
    exact = 8.0 / 3.0 * 1.5 ** (4.0 / 3.0)
    err = abs(energy_AP(field, params).total - exact) / exact
    return OracleCheck("profile energy", err <= 0.02, err, 0.02)


def check_radial_line() -> OracleCheck:
    """Radial offset in one dimension equals alpha"""
    worst = 0.0
    for gamma in (0.25, 0.5, 1.0, 1.5, 1.9):
        params = derive_params(gamma)
        worst = max(worst, abs(radial_exterior(params, 1).mu - params.alpha))
    return OracleCheck("radial offset n=1", worst <= 1e-5, worst, 1e-5)


def check_profile_multiples() -> OracleCheck:
    """Stencil residual of a u0 against its closed form for a = 0.8 (sub) and 1.25 (super)"""
    params = derive_params(1.5)
    grid = Grid.from_spacing([(0.0, 1.0)], 1.0 / 256)
    x = grid.axes()[0]
    far = x > 0.25
    worst = 0.0
    for a in (0.8, 1.25):
        field = ScalarField(grid, a * profile(params, x), nonneg_flag=True)
        measured = euler_lagrange_residual(field, params).values[far]
        exact = multiple_residual(params, a, x[far])
        inner = ~np.isnan(measured)
        if np.any(np.sign(measured[inner]) != np.sign(exact[inner])):
            return OracleCheck("profile multiples", False, float("inf"), 1e-3)
        worst = max(worst, float(np.max(np.abs(measured[inner] - exact[inner]) / np.abs(exact[inner]))))
    return OracleCheck("profile multiples", worst <= 1e-3, worst, 1e-3)


def check_weighted_exact() -> OracleCheck:
    """x_1^2 - x_n^2/(1+s) at s = -1/2 is reproduced by the weighted solver"""
    s = -0.5
    grid = half_grid(1, 0.5, 0.5, 1.0 / 32)
    exact = lambda x, y: x ** 2 - y ** 2 / (1.0 + s)
    v = solve_weighted(WeightedProblem(grid, exact, s), solve_tol=1e-12)
    err = float(np.max(np.abs(v.values - exact(*grid.mesh()))))
    bound = 5.0 * grid.h ** 2 / (1.0 + s)
    return OracleCheck("weighted exact solution", err <= bound, err, bound)


def check_barrier_signs() -> OracleCheck:
    """q1 and q2 residuals are nonnegative at 1000 samples for three values of s"""
    rng = np.random.default_rng(0)
    points = np.column_stack([rng.uniform(-0.5, 0.5, 1000), rng.uniform(1e-4, 0.1, 1000)])
    negatives = 0
    for s in (-0.5, -0.9, -0.99):
        for barrier in (BarrierId.Q1, BarrierId.Q2):
            table = barrier_residual(s, barrier, points)
            negatives += int((table["sign"] < 0).sum())
    return OracleCheck("barrier residual signs", negatives == 0, float(negatives), 0.0)


def check_limit_pair() -> OracleCheck:
    """(x^2 - x^(1-s))/(1+s) approaches x^2 log x as s decreases to -1"""
    sups = [limit_pair_sup(s) for s in (-0.9, -0.99, -0.999)]
    ok = sups[0] > sups[1] > sups[2] and sups[1] < 0.02
    return OracleCheck("limit pair", ok, sups[-1], 0.02)


def check_cone_monotonicity() -> OracleCheck:
    """Phi is 2 on the half-plane cone u = 0, E = {x_2 <= 0}"""
    grid = Grid.from_spacing([(-1.0, 1.0), (-1.0, 1.0)], 1.0 / 64)
    field = ScalarField(grid, np.zeros(grid.shape), nonneg_flag=True)
    level = grid.mesh()[1]
    trace = monotonicity_trace(field, level, [0.0, 0.0], [0.2, 0.4, 0.6, 0.8])
    err = float(np.max(np.abs(trace.phi - 2.0)) / 2.0)
    return OracleCheck("cone monotonicity", err <= 0.02, err, 0.02)


def check_tilted_flatness() -> OracleCheck:
    """Tilted exact profile: direction recovered within half a degree"""
    params = derive_params(1.0)
    grid = Grid.from_spacing([(-0.5, 0.5), (-0.5, 0.5)], 1.0 / 64)
    nu0 = np.array([np.sin(np.deg2rad(10.0)), np.cos(np.deg2rad(10.0))])
    x, y = grid.mesh()
    field = ScalarField(grid, profile(params, x * nu0[0] + y * nu0[1]), nonneg_flag=True)
    cert = flatness_certificate(field, [0.0, 0.0], 0.4, params, CertificateMode.U_PROFILE)
    angle = float(np.degrees(np.arccos(np.clip(cert.nu @ nu0, -1.0, 1.0))))
    ok = angle <= 0.5 and cert.epsilon < 2.0 * grid.h / 0.4
    return OracleCheck("tilted profile flatness", ok, angle, 0.5)


ORACLES: List[Callable[[], OracleCheck]] = [
    check_exponent_identities,
    check_profile_energy,
    check_radial_line,
    check_profile_multiples,
    check_weighted_exact,
    check_barrier_signs,
    check_limit_pair,
    check_cone_monotonicity,
    check_tilted_flatness,
]


def run_oracles() -> List[OracleCheck]:
    results = []
    for oracle in ORACLES:
        result = oracle()
        logger.info("%-28s %s (value %.3g, bound %.3g)", result.name,
                    "ok" if result.passed else "FAILED", result.value, result.bound)
        results.append(result)
    return results
