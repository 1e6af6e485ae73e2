"""
Grid stencils, interpolation, boundary bookkeeping and the field dump format
"""
import logging
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from scipy import sparse
from scipy.interpolate import RegularGridInterpolator

from ..models import (
    BoundarySpec,
    Dirichlet,
    DomainError,
    FACET_NAMES,
    GammaParams,
    Grid,
    ScalarField,
)
from .exponents import profile_inverse, rescale_factor

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def _interior(grid: Grid) -> Tuple[slice, ...]:
    return tuple(slice(1, -1) for _ in range(grid.dim))


def _shifted(values: np.ndarray, axis: int, offset: int) -> np.ndarray:
    """Interior block shifted by offset along axis"""
    index = []
    for k in range(values.ndim):
        if k == axis:
            index.append(slice(1 + offset, values.shape[k] - 1 + offset))
        else:
            index.append(slice(1, -1))
    return values[tuple(index)]


def laplacian(field: ScalarField) -> ScalarField:
    """Centered second differences; boundary nodes are NaN"""
    grid = field.grid
    if min(grid.shape) < 3:
        raise DomainError("laplacian needs at least 3 nodes per axis")
    u = field.values
    out = np.full(grid.shape, np.nan)
    acc = np.zeros(tuple(n - 2 for n in grid.shape))
    for axis in range(grid.dim):
        acc += _shifted(u, axis, 1) - 2.0 * _shifted(u, axis, 0) + _shifted(u, axis, -1)
    out[_interior(grid)] = acc / grid.h ** 2
    return ScalarField(grid, out)


def gradient(field: ScalarField) -> List[ScalarField]:
    """Centered first differences per axis; boundary nodes are NaN"""
    grid = field.grid
    if min(grid.shape) < 3:
        raise DomainError("gradient needs at least 3 nodes per axis")
    u = field.values
    components = []
    for axis in range(grid.dim):
        out = np.full(grid.shape, np.nan)
        out[_interior(grid)] = (_shifted(u, axis, 1) - _shifted(u, axis, -1)) / (2.0 * grid.h)
        components.append(ScalarField(grid, out))
    return components


def sample(field: ScalarField, point) -> float:
    """Multilinear interpolation at a point inside the grid extents"""
    point = np.atleast_1d(np.asarray(point, dtype=float))
    if point.shape != (field.grid.dim,) or not field.grid.contains(point):
        raise DomainError(f"point {point.tolist()} lies outside the grid extents")
    clipped = np.array([np.clip(p, lo, hi) for p, (lo, hi) in zip(point, field.grid.extents)])
    interpolator = RegularGridInterpolator(field.grid.axes(), field.values, method="linear")
    return float(interpolator(clipped[None, :])[0])


def sample_many(field: ScalarField, points: np.ndarray) -> np.ndarray:
    """Vectorized sample; every point must lie inside the extents"""
    points = np.asarray(points, dtype=float).reshape(-1, field.grid.dim)
    lows = np.array([lo for lo, _ in field.grid.extents])
    highs = np.array([hi for _, hi in field.grid.extents])
    if ((points < lows - 1e-12) | (points > highs + 1e-12)).any():
        raise DomainError("sample points leave the grid extents")
    interpolator = RegularGridInterpolator(field.grid.axes(), field.values, method="linear")
    return interpolator(np.clip(points, lows, highs))


def max_norm(field: ScalarField) -> float:
    """Max norm over the non-marker nodes"""
    return float(np.nanmax(np.abs(field.values)))


def inner_product(f: ScalarField, g: ScalarField) -> float:
    """Node quadrature of f * g, markers excluded"""
    return float(np.nansum(f.values * g.values) * f.grid.h ** f.grid.dim)


def edge_pairs(grid: Grid) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Flat indices of nearest-neighbour node pairs, one entry per axis"""
    index = np.arange(int(np.prod(grid.shape))).reshape(grid.shape)
    pairs = []
    for axis in range(grid.dim):
        lo = [slice(None)] * grid.dim
        hi = [slice(None)] * grid.dim
        lo[axis] = slice(0, -1)
        hi[axis] = slice(1, None)
        pairs.append((index[tuple(lo)], index[tuple(hi)]))
    return pairs


def edge_weights(grid: Grid) -> List[np.ndarray]:
    """Fraction of adjacent cells per edge: 1 inside, 1/2 on boundary facets (2D)"""
    weights = []
    for axis in range(grid.dim):
        shape = list(grid.shape)
        shape[axis] -= 1
        w = np.ones(shape)
        for other in range(grid.dim):
            if other == axis:
                continue
            first = [slice(None)] * grid.dim
            last = [slice(None)] * grid.dim
            first[other] = 0
            last[other] = -1
            w[tuple(first)] *= 0.5
            w[tuple(last)] *= 0.5
        weights.append(w)
    return weights


def graph_matrix(n_nodes: int, pairs, weights) -> sparse.csr_matrix:
    """Symmetric weighted graph Laplacian sum_e w_e (e_i - e_j)(e_i - e_j)^T"""
    rows, cols, vals = [], [], []
    for (i, j), w in zip(pairs, weights):
        i, j, w = i.ravel(), j.ravel(), np.broadcast_to(w, i.shape).ravel()
        rows += [i, j, i, j]
        cols += [i, j, j, i]
        vals += [w, w, -w, -w]
    matrix = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_nodes, n_nodes),
    )
    return matrix.tocsr()


def stiffness_matrix(grid: Grid) -> sparse.csr_matrix:
    """K with u^T K u equal to the Dirichlet energy of the piecewise-linear field"""
    scale = grid.h ** (grid.dim - 2)
    weights = [scale * w for w in edge_weights(grid)]
    return graph_matrix(int(np.prod(grid.shape)), edge_pairs(grid), weights)


def dirichlet_energy(field: ScalarField) -> float:
    """Cellwise midpoint quadrature of |grad u|^2"""
    grid = field.grid
    u = field.values
    scale = grid.h ** (grid.dim - 2)
    total = 0.0
    for axis, w in enumerate(edge_weights(grid)):
        diff = np.diff(u, axis=axis)
        total += float(np.sum(w * diff ** 2))
    return total * scale


def node_weights(grid: Grid) -> np.ndarray:
    """Trapezoid weights per node"""
    w = np.full(grid.shape, grid.h ** grid.dim)
    for axis in range(grid.dim):
        first = [slice(None)] * grid.dim
        last = [slice(None)] * grid.dim
        first[axis] = 0
        last[axis] = -1
        w[tuple(first)] *= 0.5
        w[tuple(last)] *= 0.5
    return w


def facet_masks(grid: Grid) -> dict:
    """Boolean node masks per facet name (axis 0 is left/right, axis 1 bottom/top)"""
    masks = {}
    for axis, (low_name, high_name) in enumerate(
            zip(FACET_NAMES[grid.dim][0::2], FACET_NAMES[grid.dim][1::2])):
        low = np.zeros(grid.shape, dtype=bool)
        high = np.zeros(grid.shape, dtype=bool)
        first = [slice(None)] * grid.dim
        last = [slice(None)] * grid.dim
        first[axis] = 0
        last[axis] = -1
        low[tuple(first)] = True
        high[tuple(last)] = True
        masks[low_name] = low
        masks[high_name] = high
    return masks


def boundary_values(grid: Grid, boundary: BoundarySpec) -> Tuple[np.ndarray, np.ndarray]:
    """Pinned-node mask and pinned values; facets are visited in declaration order"""
    if boundary.dim != grid.dim:
        raise DomainError("boundary spec and grid dimensions differ")
    pinned = np.zeros(grid.shape, dtype=bool)
    values = np.zeros(grid.shape)
    mesh = grid.mesh()
    for name, mask in facet_masks(grid).items():
        condition = boundary.conditions[name]
        if not isinstance(condition, Dirichlet):
            continue
        fresh = mask & ~pinned
        trace = np.broadcast_to(np.asarray(condition.trace(*mesh), dtype=float), grid.shape)
        values[fresh] = trace[fresh]
        pinned |= mask
    if (values[pinned] < 0).any() or not np.isfinite(values[pinned]).all():
        raise DomainError("Dirichlet data must be nonnegative and bounded")
    return pinned, values


def hodograph_field(field: ScalarField, params: GammaParams, rescaled: bool = False) -> ScalarField:
    """Nodewise w = c_alpha^(-1/alpha) (u / lambda)^(1/alpha)"""
    scale = rescale_factor(params, rescaled)
    w = profile_inverse(params, np.clip(field.values, 0.0, None) / scale)
    return ScalarField(field.grid, w, nonneg_flag=True)


def write_field_csv(field: ScalarField, path: Union[str, Path]) -> Path:
    """Dump a field: '# dim,h,extents...' then one 'x[,y],value' row per node"""
    grid = field.grid
    path = Path(path)
    header = [str(grid.dim), FLOAT_FORMAT % grid.h]
    for lo, hi in grid.extents:
        header += [FLOAT_FORMAT % lo, FLOAT_FORMAT % hi]
    columns = {f"x{k}": m.ravel() for k, m in enumerate(grid.mesh())}
    columns["value"] = field.values.ravel()
    frame = pd.DataFrame(columns)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("# " + ",".join(header) + "\n")
        frame.to_csv(handle, header=False, index=False, float_format=FLOAT_FORMAT,
                     lineterminator="\n")
    return path


def read_field_csv(path: Union[str, Path], nonneg_flag: bool = False) -> ScalarField:
    """Inverse of write_field_csv"""
    path = Path(path)
    with open(path, "r", encoding="utf-8") as handle:
        first = handle.readline()
    if not first.startswith("#"):
        raise DomainError(f"{path} does not start with a field header")
    parts = [p.strip() for p in first[1:].split(",")]
    dim = int(parts[0])
    h = float(parts[1])
    bounds = [float(p) for p in parts[2:]]
    if len(bounds) != 2 * dim:
        raise DomainError(f"{path} header declares dim={dim} but lists {len(bounds)} bounds")
    extents = [(bounds[2 * k], bounds[2 * k + 1]) for k in range(dim)]
    grid = Grid.from_spacing(extents, h)
    frame = pd.read_csv(path, skiprows=1, header=None, float_precision="round_trip")
    if len(frame) != int(np.prod(grid.shape)):
        raise DomainError(f"{path} has {len(frame)} rows for a grid of {grid.shape}")
    return ScalarField(grid, frame.iloc[:, dim].to_numpy(dtype=float), nonneg_flag)


def restrict_to_ball(grid: Grid, center, radius: float) -> np.ndarray:
    """Mask of nodes within the closed ball"""
    center = np.atleast_1d(np.asarray(center, dtype=float))
    dist2 = sum((m - c) ** 2 for m, c in zip(grid.mesh(), center))
    return dist2 <= radius ** 2 * (1.0 + 1e-12)


def ball_inside(grid: Grid, center, radius: float, tol: Optional[float] = None) -> bool:
    """Whether the closed ball lies within the grid extents"""
    tol = 1e-12 if tol is None else tol
    center = np.atleast_1d(np.asarray(center, dtype=float))
    return all(lo - tol <= c - radius and c + radius <= hi + tol
               for c, (lo, hi) in zip(center, grid.extents))
