"""
Weighted half-space problem div(x_n^s grad v) = 0, its s = -1 limit and the barrier checks
"""
import logging
from typing import List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from scipy import sparse
from scipy.sparse.linalg import cg, spsolve

from ..config.settings import config
from ..models import (
    BarrierId,
    C1AlphaFit,
    ConvergenceError,
    DomainError,
    GammaParams,
    Grid,
    ScalarField,
    WeightedProblem,
)
from .field import edge_pairs, graph_matrix

logger = logging.getLogger(__name__)

LIMIT_S = -1.0


def half_grid(tangential_dims: int, half_width: float, height: float, h: float) -> Grid:
    """Staggered half-space grid: tangential axes centered at 0, rows at x_n = (j + 1/2) h"""
    if tangential_dims not in (1, 2):
        raise DomainError(f"half grids carry 1 or 2 tangential axes, got {tangential_dims}")
    rows = int(round(height / h))
    extents = [(-half_width, half_width)] * tangential_dims + [(0.5 * h, 0.5 * h + rows * h)]
    return Grid.from_spacing(extents, h)


def _row_average(s: float, h: float, rows: np.ndarray) -> np.ndarray:
    """Mean of x_n^s over [j h, (j+1) h] for each row j"""
    lower = rows * h
    upper = (rows + 1) * h
    e = 1.0 + s
    out = np.empty_like(upper)
    if e <= 0.0:
        # not integrable on the first cell: midpoint value there, exact log elsewhere
        out[0] = (0.5 * h) ** s
        out[1:] = np.log(upper[1:] / lower[1:]) / h
        return out
    log_u = np.log(upper)
    out[0] = np.exp(e * log_u[0]) / (e * h)
    out[1:] = -np.exp(e * log_u[1:]) * np.expm1(e * np.log(lower[1:] / upper[1:])) / (e * h)
    return out


def _face_weights(grid: Grid, s: float) -> List[np.ndarray]:
    """Conductances per axis: x_n^s at horizontal faces, row averages on tangential edges"""
    h = grid.h
    n_rows = grid.shape[-1]
    rows = np.arange(n_rows, dtype=float)
    averages = _row_average(s, h, rows)
    faces = np.exp(s * np.log((rows[:-1] + 1.0) * h))
    weights = []
    for axis in range(grid.dim):
        shape = list(grid.shape)
        shape[axis] -= 1
        along_rows = faces if axis == grid.dim - 1 else averages
        weights.append(np.broadcast_to(along_rows, shape).copy())
    return weights


def _operator(grid: Grid, s: float) -> sparse.csr_matrix:
    scale = grid.h ** (grid.dim - 2)
    weights = [scale * w for w in _face_weights(grid, s)]
    return graph_matrix(int(np.prod(grid.shape)), edge_pairs(grid), weights)


def _outer_mask(grid: Grid, include_bottom: bool = False) -> np.ndarray:
    """Lateral facets and the top row; the x_n = h/2 row only when asked"""
    mask = np.zeros(grid.shape, dtype=bool)
    for axis in range(grid.dim - 1):
        first = [slice(None)] * grid.dim
        last = [slice(None)] * grid.dim
        first[axis] = 0
        last[axis] = -1
        mask[tuple(first)] = True
        mask[tuple(last)] = True
    mask[..., -1] = True
    if include_bottom:
        mask[..., 0] = True
    return mask


def _solve_spd(matrix: sparse.csr_matrix, rhs: np.ndarray, solve_tol: float) -> Tuple[np.ndarray, List[float]]:
    """Jacobi-preconditioned conjugate gradients with a residual history"""
    diagonal = matrix.diagonal()
    preconditioner = sparse.diags(1.0 / diagonal)
    history: List[float] = []

    def record(xk):
        history.append(float(np.linalg.norm(rhs - matrix @ xk)))

    solution, info = cg(matrix, rhs, rtol=solve_tol, atol=0.0, maxiter=config.CG_MAX_ITERS,
                        M=preconditioner, callback=record)
    if info != 0:
        raise ConvergenceError(
            f"conjugate gradients stopped after {len(history)} iterations (info={info})",
            last_iterate=solution,
            history=history,
        )
    logger.debug("cg converged in %d iterations, residual %.3g", len(history),
                 history[-1] if history else 0.0)
    return solution, history


def _solve_with_known(grid: Grid, matrix: sparse.csr_matrix, known: np.ndarray, values: np.ndarray,
                      solve_tol: float, extra_diag: Optional[np.ndarray] = None,
                      extra_rhs: Optional[np.ndarray] = None) -> np.ndarray:
    known = known.ravel()
    values = values.ravel().copy()
    free = np.flatnonzero(~known)
    fixed = np.flatnonzero(known)
    block = matrix[free][:, free]
    rhs = -(matrix[free][:, fixed] @ values[fixed])
    if extra_diag is not None:
        block = block + sparse.diags(extra_diag.ravel()[free])
        rhs = rhs + extra_rhs.ravel()[free]
    solution, _ = _solve_spd(block.tocsr(), rhs, solve_tol)
    values[free] = solution
    return values.reshape(grid.shape)


def solve_weighted(problem: WeightedProblem, solve_tol: Optional[float] = None) -> ScalarField:
    """Finite-volume solve with zero weighted flux through {x_n = 0}"""
    if problem.is_limit:
        raise DomainError("the s = -1 problem goes through solve_limit")
    solve_tol = config.SOLVE_TOL if solve_tol is None else solve_tol
    grid = problem.grid
    data = np.broadcast_to(np.asarray(problem.data(*grid.mesh()), dtype=float), grid.shape)
    if not np.isfinite(data).all():
        raise DomainError("boundary data must be bounded")

    known = _outer_mask(grid)
    values = np.where(known, data, 0.0)
    matrix = _operator(grid, problem.s)
    v = _solve_with_known(grid, matrix, known, values, solve_tol)
    logger.info("weighted solve s=%.4g on %s nodes", problem.s, grid.shape)
    return ScalarField(grid, v)


def _trace(problem: WeightedProblem) -> np.ndarray:
    """Harmonic extension in x' of the data along {x_n = 0}"""
    grid = problem.grid
    tangential = grid.axes()[:-1]
    mesh = np.meshgrid(*tangential, indexing="ij")
    data = np.broadcast_to(
        np.asarray(problem.data(*mesh, np.zeros_like(mesh[0])), dtype=float), mesh[0].shape)

    if len(tangential) == 1:
        x = tangential[0]
        return data[0] + (data[-1] - data[0]) * (x - x[0]) / (x[-1] - x[0])

    shape = data.shape
    n_nodes = int(np.prod(shape))
    index = np.arange(n_nodes).reshape(shape)
    pairs = [(index[:-1, :], index[1:, :]), (index[:, :-1], index[:, 1:])]
    laplace = graph_matrix(n_nodes, pairs, [1.0, 1.0]).tocsr()
    boundary = np.zeros(shape, dtype=bool)
    boundary[0, :] = boundary[-1, :] = boundary[:, 0] = boundary[:, -1] = True
    free = np.flatnonzero(~boundary.ravel())
    fixed = np.flatnonzero(boundary.ravel())
    trace = data.ravel().copy()
    rhs = -(laplace[free][:, fixed] @ trace[fixed])
    trace[free] = spsolve(laplace[free][:, free].tocsc(), rhs)
    return trace.reshape(shape)


def solve_limit(problem: WeightedProblem, solve_tol: Optional[float] = None) -> ScalarField:
    """Harmonic trace on {x_n = 0}, then the s = -1 interior equation with that trace"""
    if not problem.is_limit:
        raise DomainError("solve_limit needs the s = -1 problem")
    solve_tol = config.SOLVE_TOL if solve_tol is None else solve_tol
    grid = problem.grid
    h = grid.h
    data = np.broadcast_to(np.asarray(problem.data(*grid.mesh()), dtype=float), grid.shape)
    trace = _trace(problem)

    known = _outer_mask(grid)
    values = np.where(known, data, 0.0)
    matrix = _operator(grid, LIMIT_S)

    # conductance of x_n^{-1} between the trace at x_n = 0 and the first row at h/2
    bottom = h * (1.0 - LIMIT_S) / (0.5 * h) ** (1.0 - LIMIT_S) * h ** (grid.dim - 2)
    extra_diag = np.zeros(grid.shape)
    extra_rhs = np.zeros(grid.shape)
    extra_diag[..., 0] = bottom
    extra_rhs[..., 0] = bottom * trace

    v = _solve_with_known(grid, matrix, known, values, solve_tol, extra_diag, extra_rhs)
    logger.info("limit solve on %s nodes", grid.shape)
    return ScalarField(grid, v)


def solve(problem: WeightedProblem, solve_tol: Optional[float] = None) -> ScalarField:
    return solve_limit(problem, solve_tol) if problem.is_limit else solve_weighted(problem, solve_tol)


def weighted_energy(field: ScalarField, s: float) -> float:
    """Discrete form sum of face weight * (jump)^2, the quadratic form solve_weighted minimizes"""
    if not -1.0 < s <= 0.0:
        raise DomainError(f"s must lie in (-1, 0], got {s}")
    grid = field.grid
    total = 0.0
    for axis, w in enumerate(_face_weights(grid, s)):
        total += float(np.sum(w * np.diff(field.values, axis=axis) ** 2))
    return total * grid.h ** (grid.dim - 2)


# ---------------------------------------------------------------------------
# Barriers
# ---------------------------------------------------------------------------

def _barrier_terms(barrier: BarrierId, s: float, xt: np.ndarray, xn: np.ndarray,
                   c0: float, C0: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Value, Laplacian, drift s q_n / x_n and weighted flux x_n^s q_n of q1 or q2

    x_n^2 carries the factor k = n - 1 against the Laplacian -2k of -|x'|^2, so both
    barriers solve Delta q + s q_n / x_n = 0 for any number of tangential directions.
    """
    k = xt.shape[1]
    e = 1.0 + s
    r2 = (xt ** 2).sum(axis=1)
    power = np.exp((1.0 - s) * np.log(xn))
    d_power = (1.0 - s) * np.exp(-s * np.log(xn))
    dd_power = (1.0 - s) * (-s) * np.exp((-1.0 - s) * np.log(xn))
    if barrier is BarrierId.Q1:
        value = 0.5 * c0 + C0 * (-r2 + k * xn ** 2 / e + power)
        q_n = C0 * (2.0 * k * xn / e + d_power)
        q_nn = C0 * (2.0 * k / e + dd_power)
    else:
        value = c0 + C0 * (-r2 + (k * xn ** 2 - power) / e)
        q_n = C0 * (2.0 * k * xn - d_power) / e
        q_nn = C0 * (2.0 * k - dd_power) / e
    lap = -2.0 * k * C0 + q_nn
    drift = s * q_n / xn
    flux = np.exp(s * np.log(xn)) * q_n
    return value, lap, drift, flux


def limit_pair_difference(s: float, xn) -> np.ndarray:
    """(x^2 - x^(1-s))/(1+s) - x^2 log x on [0, 1]"""
    xn = np.asarray(xn, dtype=float)
    e = 1.0 + s
    out = np.zeros_like(xn)
    pos = xn > 0
    log_x = np.log(xn[pos])
    out[pos] = -xn[pos] ** 2 * np.expm1(-e * log_x) / e - xn[pos] ** 2 * log_x
    return out


def barrier_residual(s: Union[float, GammaParams], barrier_id: BarrierId, sample_points=None,
                     c0: float = 0.1, C0: float = 10.0, rel_tol: float = 1e-10) -> pd.DataFrame:
    """Signed residual table of Delta q + s q_n / x_n for the closed-form barriers

    limit_pair tabulates the difference to x_n^2 log x_n; its sup is the max of |difference|.
    """
    if isinstance(s, GammaParams):
        s = s.s
    s = float(s)
    if not -1.0 < s < 0.0:
        raise DomainError(f"barriers are evaluated for s in (-1, 0), got {s}")
    barrier_id = BarrierId(barrier_id)

    if barrier_id is BarrierId.LIMIT_PAIR:
        xn = np.linspace(0.0, 1.0, 10_001) if sample_points is None else np.asarray(
            sample_points, dtype=float).reshape(-1)
        diff = limit_pair_difference(s, xn)
        return pd.DataFrame({"x_n": xn, "difference": diff, "abs_difference": np.abs(diff)})

    points = np.atleast_2d(np.asarray(sample_points, dtype=float))
    if points.shape[1] < 2:
        raise DomainError("barrier samples need tangential coordinates and x_n")
    xt, xn = points[:, :-1], points[:, -1]
    if (xn <= 0).any():
        raise DomainError("barrier samples need x_n > 0")
    value, lap, drift, flux = _barrier_terms(barrier_id, s, xt, xn, c0, C0)
    residual = lap + drift
    scale = np.maximum(np.abs(lap), np.abs(drift))
    sign = np.where(np.abs(residual) <= rel_tol * scale, 0, np.sign(residual)).astype(int)

    table = pd.DataFrame({f"x{k + 1}": xt[:, k] for k in range(xt.shape[1])})
    table["x_n"] = xn
    table["value"] = value
    table["residual"] = residual
    table["sign"] = sign
    table["weighted_flux"] = flux
    return table


def limit_pair_sup(s: float, n_points: int = 10_001) -> float:
    table = barrier_residual(s, BarrierId.LIMIT_PAIR, np.linspace(0.0, 1.0, n_points))
    return float(table["abs_difference"].max())


# ---------------------------------------------------------------------------
# Regularity fit
# ---------------------------------------------------------------------------

def c1alpha_fit(field: ScalarField, radius: Optional[float] = None) -> C1AlphaFit:
    """Tangential slope from the bottom row, then alpha and C in |v - v0 - a'.x'| <= C |x|^(1+alpha)"""
    grid = field.grid
    if grid.dim < 2:
        raise DomainError("c1alpha_fit needs a half-space field")
    if radius is None:
        radius = 0.5 * min(hi for _, hi in grid.extents[:-1])

    points = grid.points()
    values = field.values.ravel()
    xt = points[:, :-1]
    dist = np.sqrt((points ** 2).sum(axis=1))
    bottom = np.indices(grid.shape)[-1].ravel() == 0
    fit_nodes = bottom & (np.sqrt((xt ** 2).sum(axis=1)) <= radius)
    if fit_nodes.sum() < xt.shape[1] + 2:
        raise DomainError(f"only {int(fit_nodes.sum())} bottom-row nodes within radius {radius:.3g}")

    design = np.hstack([np.ones((fit_nodes.sum(), 1)), xt[fit_nodes]])
    coeffs, *_ = np.linalg.lstsq(design, values[fit_nodes], rcond=None)
    v0, a_prime = float(coeffs[0]), coeffs[1:]

    ball = dist <= radius
    deviation = np.abs(values[ball] - v0 - xt[ball] @ a_prime)
    r = dist[ball]
    floor = 1e-12 * max(1.0, float(np.max(np.abs(values[ball]))))
    measurable = (deviation > floor) & (r > 0)

    if measurable.sum() >= 3:
        slope, _ = np.polyfit(np.log(r[measurable]), np.log(deviation[measurable]), 1)
        alpha = float(np.clip(slope - 1.0, 1e-3, 1.0))
    else:
        alpha = 1.0
    C = float(np.max(deviation / np.exp((1.0 + alpha) * np.log(r)))) if len(r) else 0.0
    fit_residual = float(np.sqrt(np.mean((design @ coeffs - values[fit_nodes]) ** 2)))
    return C1AlphaFit(a_prime=a_prime, alpha_fit=alpha, C_fit=C, v0=v0, residual=fit_residual)
