"""
Measured counterparts of the regularity and compactness statements: monotonicity traces,
gamma sweeps, flatness decay, Harnack dichotomy and profile trapping
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from ..config.settings import config
from ..models import (
    ACObjective,
    APObjective,
    BoundarySpec,
    CertificateMode,
    ConsistencyError,
    Dirichlet,
    DomainError,
    EnergyReport,
    FlatnessDecayReport,
    FlatnessRatioRow,
    FreeBoundaryLabError,
    GammaParams,
    Geometry,
    Grid,
    HarnackReport,
    ImprovementReport,
    IntervalGeometry,
    MonotonicityTrace,
    RadialGeometry,
    RadialSolution,
    ScalarField,
    SweepReport,
    TrapReport,
)
from .exponents import derive_params, profile, rescale_factor
from .field import ball_inside, edge_weights, node_weights, restrict_to_ball, sample_many
from .free_boundary import (
    distance_to_interface,
    extract_interface,
    flatness_certificate,
)
from .solver import (
    energy_AC,
    energy_AP,
    minimize_with_report,
    perimeter,
    radial_evaluate,
    radial_exterior,
    sphere_area,
    zero_set_level,
)

logger = logging.getLogger(__name__)

FLATNESS_REGIME = 0.1
TRUNCATION_LADDER = (0.1, 0.05, 0.02, 0.01)


def _parallel_map(fn: Callable, items: Sequence, jobs: Optional[int] = None) -> List:
    """Ordered map, fanned out over processes when jobs > 1"""
    jobs = config.JOBS if jobs is None else jobs
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _l2_distance(a: ScalarField, b: ScalarField) -> float:
    weights = node_weights(a.grid)
    return float(np.sqrt(np.sum(weights * (a.values - b.values) ** 2)))


def _hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    """Hausdorff distance of two point clouds; 0 when both are empty, nan when one is"""
    if len(a) == 0 and len(b) == 0:
        return 0.0
    if len(a) == 0 or len(b) == 0:
        return float("nan")
    pairwise = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2))
    return float(max(pairwise.min(axis=1).max(), pairwise.min(axis=0).max()))


# ---------------------------------------------------------------------------
# Embedding of radial solutions
# ---------------------------------------------------------------------------

def radial_field(solution: RadialSolution, grid: Grid, center=None, scale: float = 1.0) -> ScalarField:
    """Radial exterior minimizer on a grid: data inside B_1, profile on the annulus, 0 beyond"""
    params = derive_params(solution.gamma)
    center = np.zeros(grid.dim) if center is None else np.atleast_1d(np.asarray(center, dtype=float))
    r = np.sqrt(sum((m - c) ** 2 for m, c in zip(grid.mesh(), center)))
    values = scale * radial_evaluate(solution, params, r)
    return ScalarField(grid, values, nonneg_flag=True)


# ---------------------------------------------------------------------------
# Monotonicity
# ---------------------------------------------------------------------------

def _dirichlet_in_ball(field: ScalarField, center: np.ndarray, radius: float) -> float:
    """Edge quadrature of |grad u|^2 over edges whose midpoint lies in the ball"""
    grid = field.grid
    mesh = grid.mesh()
    total = 0.0
    for axis, w in enumerate(edge_weights(grid)):
        mids = []
        for k, m in enumerate(mesh):
            coord = np.diff(m, axis=axis) * 0.5 + np.take(m, range(m.shape[axis] - 1), axis=axis)
            mids.append(coord - center[k])
        inside = sum(c ** 2 for c in mids) <= radius ** 2
        diff = np.diff(field.values, axis=axis)
        total += float(np.sum((w * diff ** 2)[inside]))
    return total * grid.h ** (grid.dim - 2)


def _sphere_integral_of_square(field: ScalarField, center: np.ndarray, radius: float) -> float:
    """Integral of u^2 over the sphere of the given radius by arc sampling"""
    grid = field.grid
    if grid.dim == 1:
        points = np.array([[center[0] - radius], [center[0] + radius]])
        return float(np.sum(sample_many(field, points) ** 2))
    n_arc = max(256, int(np.ceil(16.0 * np.pi * radius / grid.h)))
    theta = 2.0 * np.pi * np.arange(n_arc) / n_arc
    points = center + radius * np.stack([np.cos(theta), np.sin(theta)], axis=1)
    values = sample_many(field, points)
    return float(np.sum(values ** 2) * 2.0 * np.pi * radius / n_arc)


def monotonicity_trace(field: ScalarField, zero_set, center, radii: Sequence[float],
                       description: str = "") -> MonotonicityTrace:
    """Phi(r) = r^(1-n) (Dirichlet + perimeter in B_r) - r^(-n)/2 * integral of u^2 on the sphere"""
    grid = field.grid
    center = np.atleast_1d(np.asarray(center, dtype=float))
    radii = np.asarray(radii, dtype=float)
    if np.any(np.diff(radii) <= 0):
        raise DomainError("monotonicity radii must be strictly increasing")
    for r in radii:
        if not ball_inside(grid, center, r):
            raise DomainError(f"ball of radius {r:.4g} exits the domain")

    _, _, members = zero_set_level(grid, zero_set)
    tol = 2.0 * grid.h
    if (field.values[members] > tol).any():
        raise ConsistencyError("field is positive on the zero set")

    n = grid.dim
    phi = []
    for r in radii:
        bulk = _dirichlet_in_ball(field, center, r) + perimeter(grid, zero_set, center, r)
        boundary = _sphere_integral_of_square(field, center, r)
        phi.append(r ** (1 - n) * bulk - 0.5 * r ** (-n) * boundary)
    return MonotonicityTrace(radii=radii, phi=np.array(phi), description=description)


# ---------------------------------------------------------------------------
# Compactness sweeps
# ---------------------------------------------------------------------------

def interval_grid(geometry: IntervalGeometry, h: float) -> Grid:
    return Grid.from_spacing([(0.0, geometry.length)], h)


def interval_boundary(geometry: IntervalGeometry) -> BoundarySpec:
    return BoundarySpec(dim=1, conditions={
        "left": Dirichlet(lambda x: np.full_like(x, geometry.left)),
        "right": Dirichlet(lambda x: np.full_like(x, geometry.right)),
    })


def perimeter_reference(geometry: IntervalGeometry, grid: Grid) -> Tuple[float, ScalarField]:
    """Limit of the J_gamma minimum on an interval: linear ramp plus one point per zero end

    Zero data next to positive values is reached through a profile layer, and every such
    layer costs one unit of perimeter in the limit, wherever it sits. With data a > 0 and
    b = 0 the cheapest pair is therefore the ramp with its zero set at x = L, a^2 / L + 1.
    With both ends positive no zero set beats the ramp, (a - b)^2 / L.
    """
    a, b, length = geometry.left, geometry.right, geometry.length
    x = grid.axes()[0]
    ramp = a + (b - a) * x / length
    layers = 1 if (a == 0.0) != (b == 0.0) else 0
    return (a - b) ** 2 / length + layers, ScalarField(grid, ramp, nonneg_flag=True)


def one_phase_reference(geometry: IntervalGeometry, grid: Grid, jobs: int = 1) -> Tuple[float, ScalarField, str]:
    """Minimizer of Dirichlet energy plus |{u > 0}| on an interval

    With zero data on one end the minimizer is a ramp of length min(L, a); otherwise it is
    computed with the one-phase objective.
    """
    a, b, length = geometry.left, geometry.right, geometry.length
    x = grid.axes()[0]
    if b == 0.0 or a == 0.0:
        top = max(a, b)
        reach = min(length, top)
        if top == 0.0:
            return 0.0, ScalarField(grid, np.zeros_like(x), nonneg_flag=True), "analytic: zero data"
        value = top ** 2 / reach + reach
        from_data = x if b == 0.0 else length - x
        ramp = top * np.clip(1.0 - from_data / reach, 0.0, None)
        return value, ScalarField(grid, ramp, nonneg_flag=True), "analytic ramp family"
    result = minimize_with_report(grid, interval_boundary(geometry), ACObjective())
    return result.energy.total, result.field, "numerical one-phase minimizer"


def radial_perimeter_reference(n: int) -> Tuple[float, float]:
    """Limit of the exterior J_gamma minimum with data 1 on the unit sphere

    The limit pair is the capacity potential of an annulus 1 < r < R plus the perimeter of
    the outer sphere, minimized over R: (n - 1) R^(2n - 3) I(R)^2 = 1 with
    I(R) = int_1^R r^(1 - n) dr. On the line the infimum 2 is only approached as R grows.
    Returns (value, optimal R).
    """
    if n < 1:
        raise DomainError(f"dimension must be positive, got {n}")
    if n == 1:
        return 2.0, float("inf")

    def flux_integral(radius: float) -> float:
        if n == 2:
            return float(np.log(radius))
        return (1.0 - radius ** (2 - n)) / (n - 2)

    radius = float(brentq(lambda r: (n - 1) * r ** (2 * n - 3) * flux_integral(r) ** 2 - 1.0, 1.0, 10.0))
    value = sphere_area(n) * (1.0 / flux_integral(radius) + radius ** (n - 1))
    return value, radius


def _interval_member(task: Tuple[IntervalGeometry, float, float, bool]):
    geometry, gamma, h, rescaled = task
    grid = interval_grid(geometry, h)
    params = derive_params(gamma)
    result = minimize_with_report(grid, interval_boundary(geometry), APObjective(params, rescaled))
    return result.energy, result.field


def _radial_member(task: Tuple[int, float]) -> RadialSolution:
    n, gamma = task
    return radial_exterior(derive_params(gamma), n, rescaled=True)


def gamma_to_2_sweep(geometry: Geometry, gammas: Sequence[float], h: float = 1.0 / 256,
                     jobs: Optional[int] = None) -> SweepReport:
    """Minimize the rescaled energies J_gamma as gamma increases to 2 and compare with the perimeter limit"""
    gammas = [float(g) for g in gammas]
    if any(not 1.0 < g < 2.0 for g in gammas) or any(b <= a for a, b in zip(gammas, gammas[1:])):
        raise DomainError(f"gamma_to_2_sweep needs increasing gammas in (1, 2), got {gammas}")

    if isinstance(geometry, RadialGeometry):
        reference, outer = radial_perimeter_reference(geometry.n)
        report = SweepReport(gammas=[], energies=[], reference_value=reference,
                             reference_provenance=f"annulus capacity plus outer perimeter, R = {outer:.6g}")
        try:
            solutions = _parallel_map(_radial_member, [(geometry.n, g) for g in gammas], jobs)
        except FreeBoundaryLabError as exc:
            report.complete, report.failure = False, str(exc)
            return report
        for gamma, sol in zip(gammas, solutions):
            energy = EnergyReport(dirichlet=sol.dirichlet, potential=sol.potential)
            report.gammas.append(gamma)
            report.energies.append(energy)
            report.energy_gaps.append(energy.total - reference)
            report.free_boundary_radii.append(sol.free_boundary_radius)
        return report

    grid = interval_grid(geometry, h)
    reference, ref_field = perimeter_reference(geometry, grid)
    ref_points = extract_interface(ref_field, 0.0).vertices
    report = SweepReport(gammas=[], energies=[], reference_value=reference,
                         reference_provenance="analytic: linear ramp, one perimeter point per zero end")
    tasks = [(geometry, g, h, True) for g in gammas]
    try:
        results = _parallel_map(_interval_member, tasks, jobs)
    except FreeBoundaryLabError as exc:
        report.complete, report.failure = False, str(exc)
        return report
    for gamma, (energy, u) in zip(gammas, results):
        report.gammas.append(gamma)
        report.energies.append(energy)
        report.energy_gaps.append(energy.total - reference)
        report.l2_distances.append(_l2_distance(u, ref_field))
        report.hausdorff_distances.append(
            _hausdorff(extract_interface(u, 0.0).vertices, ref_points))
        logger.info("gamma=%.4g J=%.10g gap=%.3g", gamma, energy.total, report.energy_gaps[-1])
    return report


def truncation_diagnostic(reference: ScalarField, params: GammaParams,
                          ts: Iterable[float] = TRUNCATION_LADDER) -> List[Dict[str, float]]:
    """E_gamma((u - t)+) for each t next to the one-phase energy of u"""
    target = energy_AC(reference).total
    rows = []
    for t in ts:
        truncated = reference.with_values(np.clip(reference.values - t, 0.0, None), nonneg_flag=True)
        value = energy_AP(truncated, params).total
        rows.append({
            "gamma": params.gamma,
            "t": float(t),
            "energy_truncated": value,
            "energy_one_phase": target,
            "relative_gap": abs(value - target) / max(abs(target), 1e-300),
        })
    return rows


def gamma_to_0_sweep(geometry: IntervalGeometry, gammas: Sequence[float], h: float = 1.0 / 256,
                     jobs: Optional[int] = None, ts: Iterable[float] = TRUNCATION_LADDER) -> SweepReport:
    """Minimize E_gamma as gamma decreases to 0 and compare with the one-phase minimizer"""
    gammas = [float(g) for g in gammas]
    if any(not 0.0 < g < 0.5 for g in gammas) or any(b >= a for a, b in zip(gammas, gammas[1:])):
        raise DomainError(f"gamma_to_0_sweep needs decreasing gammas in (0, 0.5), got {gammas}")
    if not isinstance(geometry, IntervalGeometry):
        raise DomainError("gamma_to_0_sweep runs on interval geometries")

    grid = interval_grid(geometry, h)
    reference, ref_field, provenance = one_phase_reference(geometry, grid)
    report = SweepReport(gammas=[], energies=[], reference_value=reference,
                         reference_provenance=provenance)
    try:
        results = _parallel_map(_interval_member, [(geometry, g, h, False) for g in gammas], jobs)
    except FreeBoundaryLabError as exc:
        report.complete, report.failure = False, str(exc)
        return report
    for gamma, (energy, u) in zip(gammas, results):
        report.gammas.append(gamma)
        report.energies.append(energy)
        report.energy_gaps.append(energy.total - reference)
        report.l2_distances.append(_l2_distance(u, ref_field))
        report.truncation.extend(truncation_diagnostic(ref_field, derive_params(gamma), ts))
        logger.info("gamma=%.4g E=%.10g L2=%.3g", gamma, energy.total, report.l2_distances[-1])
    return report


# ---------------------------------------------------------------------------
# Flatness decay, Harnack dichotomy, trapping
# ---------------------------------------------------------------------------

def flatness_decay_run(field: ScalarField, params: GammaParams, center, base_radius: float,
                       rho_ladder: Sequence[float] = (0.25, 0.25),
                       mode: CertificateMode = CertificateMode.U_PROFILE,
                       rescaled: bool = False) -> FlatnessDecayReport:
    """Certificates at base_radius * prod(rho) and the ratios of successive flatness values"""
    if any(not 0.0 < rho < 1.0 for rho in rho_ladder):
        raise DomainError(f"contraction factors must lie in (0, 1), got {list(rho_ladder)}")
    h = field.grid.h
    fb = extract_interface(field, 0.0)
    first = flatness_certificate(field, center, base_radius, params, mode, rescaled, fb)
    if first.epsilon > FLATNESS_REGIME:
        logger.info("flatness %.3g at radius %.3g is outside the regime", first.epsilon, base_radius)
        return FlatnessDecayReport(in_regime=False, certificates=[first])

    report = FlatnessDecayReport(in_regime=True, certificates=[first])
    radius = base_radius
    previous = first
    for rho in rho_ladder:
        radius *= rho
        cert = flatness_certificate(field, center, radius, params, mode, rescaled, fb)
        floor = cert.epsilon * radius <= 2.0 * h or previous.epsilon * previous.radius <= 2.0 * h
        if previous.epsilon > 0.0:
            ratio = cert.epsilon / previous.epsilon
            slack = 4.0 * h / (previous.epsilon * radius)
        else:
            ratio, slack = float("nan"), float("inf")
        flagged = (not floor) and ratio > 0.5 + slack
        if flagged:
            logger.warning("flatness ratio %.3g at radius %.3g exceeds 1/2 + %.3g", ratio, radius, slack)
        report.rows.append(FlatnessRatioRow(radius, cert.epsilon, ratio, slack, flagged, floor))
        report.certificates.append(cert)
        previous = cert
    return report


def harnack_dichotomy_check(w_field: ScalarField, x0, r: float, a: float) -> HarnackReport:
    """Largest c+ with (x_n + c+ a)+ <= w and c- with w <= (x_n + (1 - c-) a)+ on B_{r/2}(x0)"""
    if a <= 0 or r <= 0:
        raise DomainError("strip width and radius must be positive")
    grid = w_field.grid
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if not ball_inside(grid, x0, r):
        raise DomainError(f"ball of radius {r:.4g} exits the grid")

    w = w_field.values
    xn = grid.mesh()[-1]
    tol = 1e-9 * max(1.0, a)
    ball = restrict_to_ball(grid, x0, r)
    lower_ok = np.all(np.maximum(xn[ball], 0.0) <= w[ball] + tol)
    upper_ok = np.all(w[ball] <= np.maximum(xn[ball] + a, 0.0) + tol)
    if not (lower_ok and upper_ok):
        return HarnackReport(trapped=False)

    half = restrict_to_ball(grid, x0, 0.5 * r)
    excess = (w[half] - xn[half]) / a
    c_plus = float(np.clip(excess.min(), 0.0, 1.0))
    positive = w[half] > 0
    c_minus = float(np.clip((1.0 - excess[positive]).min(), 0.0, 1.0)) if positive.any() else 1.0
    return HarnackReport(trapped=True, c_plus=c_plus, c_minus=c_minus)


def profile_trap_check(u_field: ScalarField, params: GammaParams, eps_flat: float,
                       tau: float = 0.0, rescaled: bool = False) -> TrapReport:
    """Smallest C_lower, C_upper with (1 - C_lower) u0(d) <= u <= (1 + C_upper) u0(d) away from the interface"""
    if eps_flat <= 0:
        raise DomainError(f"eps_flat must be positive, got {eps_flat}")
    grid = u_field.grid
    fb = extract_interface(u_field, tau)
    if fb.is_empty:
        raise DomainError("profile_trap_check needs a nonempty interface")

    u = u_field.values.ravel()
    d = distance_to_interface(fb, grid.points())
    mask = (u > tau) & (d > 2.0 * grid.h)
    if not mask.any():
        raise DomainError("no nodes farther than 2h from the interface")
    reference = rescale_factor(params, rescaled) * profile(params, d[mask])
    ratio = u[mask] / reference
    return TrapReport(
        C_lower=float(max(0.0, np.max(1.0 - ratio))),
        C_upper=float(max(0.0, np.max(ratio - 1.0))),
        eps_flat=eps_flat,
    )


def multiple_improvement_check(u_field: ScalarField, params: GammaParams, scale: float,
                               rescaled: bool = False) -> ImprovementReport:
    """Trap a_- u0(x_n) <= u <= a_+ u0(x_n) on B_{r/2}(r e_n) and its improvement on B_{r/4}(r e_n)"""
    if params.gamma < 1.0:
        raise DomainError("the multiples comparison holds for gamma in [1, 2)")
    grid = u_field.grid
    center = np.zeros(grid.dim)
    center[-1] = scale
    for radius in (0.5 * scale, 0.25 * scale):
        if not ball_inside(grid, center, radius):
            raise DomainError(f"ball of radius {radius:.4g} around {center.tolist()} exits the grid")

    lam = rescale_factor(params, rescaled)
    xn = grid.mesh()[-1]

    def bounds(radius: float) -> Tuple[float, float]:
        mask = restrict_to_ball(grid, center, radius)
        ratio = u_field.values[mask] / (lam * profile(params, xn[mask]))
        return min(1.0, float(ratio.min())), max(1.0, float(ratio.max()))

    a_minus, a_plus = bounds(0.5 * scale)
    a_minus_in, a_plus_in = bounds(0.25 * scale)
    c_minus = (a_minus_in - a_minus) / (1.0 - a_minus) if a_minus < 1.0 else None
    c_plus = (a_plus - a_plus_in) / (a_plus - 1.0) if a_plus > 1.0 else None
    return ImprovementReport(
        trapped=a_minus > 0.0,
        a_minus=a_minus,
        a_plus=a_plus,
        a_minus_inner=a_minus_in,
        a_plus_inner=a_plus_in,
        c_minus=c_minus,
        c_plus=c_plus,
    )
