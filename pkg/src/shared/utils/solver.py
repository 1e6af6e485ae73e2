"""
Discrete energies, their projected-descent minimization and the radial exterior shooting solver
"""
import logging
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.integrate import solve_ivp
from scipy.optimize import brentq
from scipy.special import gamma as gamma_function
from scipy.sparse.linalg import factorized

from ..config.settings import config
from ..models import (
    ACObjective,
    APObjective,
    BoundarySpec,
    BracketError,
    ConsistencyError,
    ConvergenceError,
    DomainError,
    EnergyReport,
    EnergyTraceRow,
    GammaParams,
    Grid,
    Objective,
    RadialSolution,
    ScalarField,
    SolveResult,
    SolverConfig,
    StepRule,
)
from .exponents import (
    dead_threshold,
    layer_potential,
    profile,
    profile_inverse,
    regularization_floor,
    rescale_factor,
)
from .field import (
    boundary_values,
    dirichlet_energy,
    laplacian,
    gradient,
    node_weights,
    stiffness_matrix,
)
from .free_boundary import extract_level_set, interface_length

logger = logging.getLogger(__name__)

LADDER_FACTORS = (8.0, 4.0, 2.0, 1.0)
ARMIJO = 1e-4
MIN_STEP = 1e-14


# ---------------------------------------------------------------------------
# Energies
# ---------------------------------------------------------------------------

def _check_field(field: ScalarField) -> np.ndarray:
    u = field.values
    if np.isnan(u).any():
        raise DomainError("energies need a field without NaN markers")
    if (u < 0).any():
        raise DomainError("energies are defined for nonnegative fields")
    return u


def _cell_layer_integral(wa: np.ndarray, wb: np.ndarray, h: float, p: float) -> np.ndarray:
    """Integral over a cell of width h of w^(p-1), w linear from wa to wb

    A zero end is a dead node: the positive part is modelled as a profile layer
    of sub-cell width d = min(h, w_alive).
    """
    lo = np.minimum(wa, wb)
    hi = np.maximum(wa, wb)
    out = np.zeros_like(hi)

    layer = (lo <= 0) & (hi > 0)
    d = np.minimum(h, hi[layer])
    out[layer] = (d / hi[layer]) * np.exp(p * np.log(hi[layer])) / p

    both = lo > 0
    lo_b, hi_b = lo[both], hi[both]
    flat = (hi_b - lo_b) <= 1e-9 * hi_b
    vals = np.empty_like(lo_b)
    mid = 0.5 * (lo_b[flat] + hi_b[flat])
    vals[flat] = h * np.exp((p - 1.0) * np.log(mid))
    steep = ~flat
    vals[steep] = h * (np.exp(p * np.log(hi_b[steep])) - np.exp(p * np.log(lo_b[steep]))) / (
        p * (hi_b[steep] - lo_b[steep]))
    out[both] = vals
    return out


def _cell_potential(grid: Grid, w: np.ndarray, p: float) -> float:
    """Cellwise potential along the axis where w varies most"""
    if grid.dim == 1:
        return float(np.sum(_cell_layer_integral(w[:-1], w[1:], grid.h, p)))
    if grid.dim != 2:
        raise DomainError("energies are implemented on 1D and 2D grids")
    w00, w10 = w[:-1, :-1], w[1:, :-1]
    w01, w11 = w[:-1, 1:], w[1:, 1:]
    left, right = 0.5 * (w00 + w01), 0.5 * (w10 + w11)
    bottom, top = 0.5 * (w00 + w10), 0.5 * (w01 + w11)
    along_x = np.abs(right - left) >= np.abs(top - bottom)
    lo = np.where(along_x, left, bottom)
    hi = np.where(along_x, right, top)
    return float(np.sum(_cell_layer_integral(lo.ravel(), hi.ravel(), grid.h, p)) * grid.h)


def energy_AP(field: ScalarField, params: GammaParams, rescaled: bool = False) -> EnergyReport:
    """Dirichlet energy plus u^(-gamma) on {u > tau}, times c_gamma when rescaled"""
    u = _check_field(field)
    grid = field.grid
    lam = rescale_factor(params, rescaled)
    tau = dead_threshold(params, grid.h, rescaled)

    alive = u > tau
    w = np.zeros_like(u)
    w[alive] = profile_inverse(params, u[alive] / lam)
    prefactor = lam ** 2 * float(np.exp(-params.gamma * np.log(params.c_alpha)))
    pot = prefactor * _cell_potential(grid, w, 2.0 * params.alpha - 1.0)
    return EnergyReport(dirichlet=dirichlet_energy(field), potential=pot)


def energy_AC(field: ScalarField, tau: Optional[float] = None) -> EnergyReport:
    """Dirichlet energy plus the measure of {u > tau}"""
    u = _check_field(field)
    grid = field.grid
    tau = 0.5 * grid.h if tau is None else tau
    w = np.where(u > tau, u, 0.0)
    # p = 1 turns the layer rule into a length: full cells, or min(h, u) next to a dead node
    pot = _cell_potential(grid, w, 1.0)
    return EnergyReport(dirichlet=dirichlet_energy(field), potential=pot)


def zero_set_level(grid: Grid, zero_set) -> Tuple[np.ndarray, float, np.ndarray]:
    """Level function, contour level and node membership of a zero set

    A boolean indicator contours at 1/2; a real level function phi encodes E = {phi <= 0}.
    """
    values = zero_set.values if isinstance(zero_set, ScalarField) else np.asarray(zero_set)
    values = values.reshape(grid.shape)
    if values.dtype == bool:
        return values.astype(float), 0.5, values
    phi = values.astype(float)
    # the contour routine treats "alive" as level - phi > 0
    return -phi, 0.0, phi <= 0


def perimeter(grid: Grid, zero_set, center=None, radius: Optional[float] = None) -> float:
    """Length of the boundary of E inside the domain (1D: number of boundary points)"""
    level_values, level, _ = zero_set_level(grid, zero_set)
    fb = extract_level_set(grid, level_values - level, tau=level)
    return interface_length(fb, center=center, radius=radius)


def energy_F(field: ScalarField, zero_set, tau: float = 1e-12) -> EnergyReport:
    """Dirichlet energy plus the perimeter of E, for pairs with u = 0 on E"""
    u = _check_field(field)
    _, _, members = zero_set_level(field.grid, zero_set)
    if (u[members] > tau).any():
        worst = float(u[members].max())
        raise ConsistencyError(f"field is positive on the zero set (max {worst:.3g} > tau {tau:.3g})")
    return EnergyReport(
        dirichlet=dirichlet_energy(field),
        potential=0.0,
        perimeter=perimeter(field.grid, zero_set),
    )


def objective_energy(field: ScalarField, objective: Objective) -> EnergyReport:
    if isinstance(objective, APObjective):
        return energy_AP(field, objective.params, objective.rescaled)
    return energy_AC(field)


# ---------------------------------------------------------------------------
# Residuals of the Euler-Lagrange equations
# ---------------------------------------------------------------------------

def _stencil_mask(mask: np.ndarray) -> np.ndarray:
    """Interior nodes whose whole 3/5-point stencil lies in mask"""
    inner = np.zeros_like(mask)
    core = tuple(slice(1, -1) for _ in range(mask.ndim))
    ok = mask[core].copy()
    for axis in range(mask.ndim):
        for offset in (-1, 1):
            index = [slice(1, -1)] * mask.ndim
            index[axis] = slice(1 + offset, mask.shape[axis] - 1 + offset)
            ok &= mask[tuple(index)]
    inner[core] = ok
    return inner


def euler_lagrange_residual(field: ScalarField, params: GammaParams,
                            rescaled: bool = False) -> ScalarField:
    """Delta u + (gamma/2) c u^(-gamma-1) on nodes whose stencil lies in {u > tau}"""
    u = field.values
    tau = dead_threshold(params, field.grid.h, rescaled)
    mask = _stencil_mask(u > tau)
    weight = params.c_gamma if rescaled else 1.0
    out = np.full(u.shape, np.nan)
    lap = laplacian(field).values
    out[mask] = lap[mask] + 0.5 * params.gamma * weight * np.exp((-params.gamma - 1.0) * np.log(u[mask]))
    return ScalarField(field.grid, out)


def w_equation_residual(w_field: ScalarField, params: GammaParams) -> ScalarField:
    """Delta w - s h(grad w)/w with h(p) = (1 - |p|^2)/2, on nodes whose stencil lies in {w > 2h}"""
    w = w_field.values
    mask = _stencil_mask(w > 2.0 * w_field.grid.h)
    grad_sq = sum(g.values ** 2 for g in gradient(w_field))
    lap = laplacian(w_field).values
    out = np.full(w.shape, np.nan)
    out[mask] = lap[mask] - params.s * 0.5 * (1.0 - grad_sq[mask]) / w[mask]
    return ScalarField(w_field.grid, out)


# ---------------------------------------------------------------------------
# Minimization
# ---------------------------------------------------------------------------

def default_solver_config(grid: Grid, objective: Objective,
                          max_iters: Optional[int] = None,
                          energy_tol: Optional[float] = None) -> SolverConfig:
    """Continuation ladder {8,4,2,1} * delta_min and the dead-core threshold for a grid"""
    if isinstance(objective, APObjective):
        delta_min = regularization_floor(objective.params, grid.h, objective.rescaled)
        tau = dead_threshold(objective.params, grid.h, objective.rescaled)
    else:
        delta_min = grid.h
        tau = 0.5 * grid.h
    return SolverConfig(
        delta=delta_min,
        tau=tau,
        max_iters=config.MAX_ITERS if max_iters is None else max_iters,
        energy_tol=config.ENERGY_TOL if energy_tol is None else energy_tol,
        ladder=[f * delta_min for f in LADDER_FACTORS],
    )


def _ramp(r: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Quintic smoothstep and its derivative: 0 at 0, 1 beyond 1"""
    r = np.clip(r, 0.0, 1.0)
    value = r ** 3 * (10.0 - 15.0 * r + 6.0 * r ** 2)
    slope = 30.0 * r ** 2 * (1.0 - r) ** 2
    return value, slope


class EnergyMinimizer:
    """Projected Sobolev-gradient descent on the delta-regularized energy"""

    def __init__(self, grid: Grid, boundary: BoundarySpec, objective: Objective,
                 solver_config: Optional[SolverConfig] = None):
        self.grid = grid
        self.objective = objective
        self.config = solver_config or default_solver_config(grid, objective)
        self.stiffness = stiffness_matrix(grid)
        self.weights = node_weights(grid).ravel()
        pinned, data = boundary_values(grid, boundary)
        self.pinned = pinned.ravel()
        self.data = data.ravel()
        self.metric = (2.0 * self.stiffness + sparse.diags(self.weights)).tocsc()
        self.metric_diagonal = self.metric.diagonal()
        self._solvers = {}

        if isinstance(objective, APObjective):
            self.potential_weight = objective.params.c_gamma if objective.rescaled else 1.0
        else:
            self.potential_weight = 1.0

    def _potential(self, u: np.ndarray, delta: float) -> Tuple[np.ndarray, np.ndarray]:
        ramp, ramp_slope = _ramp(u / delta)
        if isinstance(self.objective, ACObjective):
            return ramp, ramp_slope / delta
        g = self.objective.params.gamma
        base_arg = u ** 2 + delta ** 2
        base = np.exp(-0.5 * g * np.log(base_arg))
        base_slope = -g * u * base / base_arg
        value = self.potential_weight * base * ramp
        slope = self.potential_weight * (base_slope * ramp + base * ramp_slope / delta)
        return value, slope

    def _energy(self, u: np.ndarray, delta: float) -> Tuple[float, float]:
        dirichlet = float(u @ (self.stiffness @ u))
        value, _ = self._potential(u, delta)
        return dirichlet, float(self.weights @ value)

    def _gradient(self, u: np.ndarray, delta: float) -> np.ndarray:
        _, slope = self._potential(u, delta)
        g = 2.0 * (self.stiffness @ u) + self.weights * slope
        g[self.pinned] = 0.0
        return g

    def _solver_for(self, free: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
        key = np.packbits(free).tobytes()
        if key not in self._solvers:
            if len(self._solvers) > 64:
                self._solvers.clear()
            idx = np.flatnonzero(free)
            self._solvers[key] = factorized(self.metric[idx][:, idx].tocsc())
        return self._solvers[key]

    def initial_guess(self) -> np.ndarray:
        """Harmonic extension of the Dirichlet data, clipped at zero"""
        u = np.where(self.pinned, self.data, 0.0)
        free = ~self.pinned
        if not self.pinned.any() or not free.any():
            return np.clip(u, 0.0, None)
        idx_free = np.flatnonzero(free)
        idx_pin = np.flatnonzero(self.pinned)
        k = self.stiffness.tocsr()
        rhs = -(k[idx_free][:, idx_pin] @ u[idx_pin])
        u[idx_free] = factorized(k[idx_free][:, idx_free].tocsc())(rhs)
        return np.clip(u, 0.0, None)

    def _split(self, u: np.ndarray, g: np.ndarray, delta: float) -> Tuple[np.ndarray, np.ndarray]:
        """Free nodes for the Sobolev solve and held nodes at (or within delta of) the obstacle

        Held nodes are dead nodes that do not want to grow, and nodes below delta that
        the gradient pushes down; they take a diagonally scaled projected step.
        """
        held = ~self.pinned & (((u <= 0.0) & (g >= 0.0)) | ((u <= delta) & (g > 0.0)))
        free = ~self.pinned & ~held
        return free, held

    def _direction(self, u: np.ndarray, g: np.ndarray, delta: float) -> Optional[np.ndarray]:
        """Two-metric descent direction, or None at a projected stationary point"""
        free, held = self._split(u, g, delta)
        moving = held & (u > 0.0) & (g > 1e-14)
        if not moving.any() and (not free.any() or np.max(np.abs(g[free])) <= 1e-14):
            return None
        direction = np.zeros_like(u)
        if free.any():
            direction[free] = -self._solver_for(free)(g[free])
        direction[moving] = -g[moving] / self.metric_diagonal[moving]
        return direction

    def _stage(self, u: np.ndarray, stage: int, delta: float,
               trace: List[EnergyTraceRow], counter: int) -> Tuple[np.ndarray, int, bool]:
        cfg = self.config
        dirichlet, pot = self._energy(u, delta)
        energy = dirichlet + pot
        for _ in range(cfg.max_iters):
            g = self._gradient(u, delta)
            direction = self._direction(u, g, delta)
            if direction is None:
                return u, counter, True

            step = cfg.fixed_step if cfg.step_rule is StepRule.FIXED else 1.0
            while True:
                trial = np.maximum(u + step * direction, 0.0)
                trial[self.pinned] = u[self.pinned]
                t_dir, t_pot = self._energy(trial, delta)
                t_energy = t_dir + t_pot
                if cfg.step_rule is StepRule.FIXED:
                    break
                slope = float(g @ (trial - u))
                if slope < 0.0 and t_energy <= energy + ARMIJO * slope:
                    break
                step *= 0.5
                if step < MIN_STEP:
                    logger.debug("stage %d stalled at energy %.12g", stage, energy)
                    return u, counter, True

            counter += 1
            decrease = energy - t_energy
            u, energy = trial, t_energy
            trace.append(EnergyTraceRow(counter, stage, delta, t_dir, t_pot))
            if abs(decrease) <= cfg.energy_tol * max(1.0, abs(energy)):
                return u, counter, True
        return u, counter, False

    def run(self) -> SolveResult:
        cfg = self.config
        u = self.initial_guess()
        trace: List[EnergyTraceRow] = []
        counter = 0
        d0, p0 = self._energy(u, cfg.ladder[0])
        trace.append(EnergyTraceRow(0, 0, cfg.ladder[0], d0, p0))

        last = len(cfg.ladder) - 1
        for stage, delta in enumerate(cfg.ladder):
            u, counter, converged = self._stage(u, stage, delta, trace, counter)
            if not converged and stage < last:
                # an intermediate delta only seeds the next one
                logger.warning("stage %d (delta=%.3g) used all %d iterations; continuing at delta=%.3g",
                               stage, delta, cfg.max_iters, cfg.ladder[stage + 1])
                continue
            if not converged:
                raise ConvergenceError(
                    f"minimization stage {stage} (delta={delta:.3g}) did not converge "
                    f"within {cfg.max_iters} iterations",
                    last_iterate=ScalarField(self.grid, u.copy()),
                    history=trace,
                )
            logger.info("stage %d delta=%.4g converged after %d total iterations, energy %.10g",
                        stage, delta, counter, trace[-1].total)

        u = np.where(~self.pinned & (u < cfg.tau), 0.0, u)
        result = ScalarField(self.grid, u, nonneg_flag=True)
        return SolveResult(
            field=result,
            energy=objective_energy(result, self.objective),
            trace=trace,
            iterations=counter,
            converged=True,
        )


def minimize_with_report(grid: Grid, boundary: BoundarySpec, objective: Objective,
                         solver_config: Optional[SolverConfig] = None) -> SolveResult:
    """Minimize and keep the energy trace and final energies"""
    return EnergyMinimizer(grid, boundary, objective, solver_config).run()


def minimize(grid: Grid, boundary: BoundarySpec, objective: Objective,
             solver_config: Optional[SolverConfig] = None) -> ScalarField:
    """Thresholded stationary point of the regularized energy after continuation"""
    return minimize_with_report(grid, boundary, objective, solver_config).field


# ---------------------------------------------------------------------------
# Radial exterior problem
# ---------------------------------------------------------------------------

SEED_OFFSETS = (1e-3, 5e-4, 2.5e-4)


def _layer_energy(params: GammaParams, t0: float) -> float:
    """Energy of the exact profile on [0, t0], split equally between its two parts"""
    return 2.0 * float(layer_potential(params, t0))


def _shoot(params: GammaParams, n: int, mu: float, t0: float, dense: bool = False):
    """Integrate inward from the free boundary r = 1 + mu, t = distance to it"""
    g = params.gamma
    r_fb = 1.0 + mu

    def rhs(t, y):
        u, ut = max(y[0], 1e-300), y[1]
        r = r_fb - t
        utt = (n - 1) * ut / r - 0.5 * g * np.exp((-g - 1.0) * np.log(u))
        weight = r ** (n - 1)
        return [ut, utt, ut * ut * weight, np.exp(-g * np.log(u)) * weight]

    y0 = [
        float(profile(params, t0, 0)),
        float(profile(params, t0, 1)),
        0.5 * _layer_energy(params, t0) * r_fb ** (n - 1),
        0.5 * _layer_energy(params, t0) * r_fb ** (n - 1),
    ]
    return solve_ivp(rhs, (t0, mu), y0, method="DOP853", rtol=1e-11, atol=1e-13,
                     dense_output=dense)


def _shoot_mu(params: GammaParams, n: int, t0: float, shoot_tol: float, data: float = 1.0) -> float:
    def mismatch(mu: float) -> float:
        sol = _shoot(params, n, mu, t0)
        if not sol.success:
            raise ConvergenceError(f"radial integration failed at mu={mu:.6g}: {sol.message}")
        return float(sol.y[0, -1]) - data

    lo = 2.0 * t0
    hi = 1.5 * params.alpha
    if mismatch(lo) >= 0.0:
        raise BracketError("data already reached next to the free boundary", (lo, lo))
    for _ in range(40):
        if mismatch(hi) > 0.0:
            break
        hi *= 2.0
    else:
        raise BracketError("no free-boundary offset reaches the data", (lo, hi))
    return float(brentq(mismatch, lo, hi, xtol=shoot_tol))


def _richardson(values: List[float], tol: float) -> float:
    """Extrapolate a sequence computed at halving offsets, estimating the order"""
    m1, m2, m3 = values
    d1, d2 = m1 - m2, m2 - m3
    if abs(d2) <= tol or d1 * d2 <= 0.0:
        return m3
    order = np.log2(d1 / d2)
    if not np.isfinite(order) or order <= 0.0:
        return m3
    return m3 - d2 / (2.0 ** order - 1.0)


def radial_exterior(params: GammaParams, n: int, shoot_tol: Optional[float] = None,
                    n_samples: int = 513, rescaled: bool = False) -> RadialSolution:
    """Radial minimizer outside B_1 with data 1 on the unit sphere

    With rescaled=True this is the J_gamma minimizer: lambda times the E_gamma minimizer
    with data 1/lambda, whose energies scale by lambda^2.
    """
    if n < 1:
        raise DomainError(f"dimension must be at least 1, got {n}")
    shoot_tol = config.SHOOT_TOL if shoot_tol is None else shoot_tol
    lam = rescale_factor(params, rescaled)

    mus = [_shoot_mu(params, n, t0, shoot_tol, 1.0 / lam) for t0 in SEED_OFFSETS]
    mu = _richardson(mus, shoot_tol)
    logger.info("radial gamma=%.4g n=%d rescaled=%s: mu per seed %s -> %.10g", params.gamma, n,
                rescaled, ", ".join(f"{m:.10g}" for m in mus), mu)

    t0 = SEED_OFFSETS[-1]
    sol = _shoot(params, n, mu, t0, dense=True)
    t = np.unique(np.concatenate([np.linspace(0.0, mu, n_samples), np.geomspace(t0, mu, 64)]))
    values = np.empty_like(t)
    seeded = t < t0
    values[seeded] = profile(params, t[seeded], 0)
    values[~seeded] = sol.sol(t[~seeded])[0]

    radii = (1.0 + mu) - t
    order = np.argsort(radii)
    area = lam ** 2 * sphere_area(n)
    return RadialSolution(
        gamma=params.gamma,
        n=n,
        mu=mu,
        radii=radii[order],
        values=lam * values[order],
        dirichlet=float(sol.y[2, -1]) * area,
        potential=float(sol.y[3, -1]) * area,
        scale=lam,
    )


def sphere_area(n: int) -> float:
    """Area of the unit sphere in R^n (2 points when n = 1)"""
    return float(2.0 * np.pi ** (n / 2.0) / gamma_function(n / 2.0))


def radial_evaluate(solution: RadialSolution, params: GammaParams, r) -> np.ndarray:
    """u(r) from the samples, interpolating the hodograph variable linearly in r

    r < 1 returns the data value 1; r beyond the free boundary returns 0.
    """
    r = np.asarray(r, dtype=float)
    scale = solution.scale
    w = profile_inverse(params, np.clip(solution.values / scale, 0.0, None))
    w_r = np.interp(r, solution.radii, w, left=np.nan, right=0.0)
    out = scale * params.c_alpha * np.exp(params.alpha * np.log(np.maximum(w_r, 1e-300)))
    out = np.where(w_r <= 0.0, 0.0, out)
    out = np.where(r < solution.radii[0], 1.0, out)
    return out
