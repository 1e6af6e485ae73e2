"""
Interface extraction, distances, flatness certificates and viscosity comparison scans
"""
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from ..models import (
    CertificateMode,
    DomainError,
    FlatnessCertificate,
    FreeBoundary,
    GammaParams,
    Grid,
    ScalarField,
    TouchResult,
    TouchSide,
)
from .exponents import comparison_psi_u, profile_inverse, rescale_factor
from .field import ball_inside, restrict_to_ball, sample, sample_many

logger = logging.getLogger(__name__)

SCAN_DIRECTIONS = 72
TILTS_DEG = (-5.0, 0.0, 5.0)
RADIUS_FACTORS = (1.0, 2.0, 4.0)

# corner order a, b, c, d counter-clockwise from the lower-left node
_CORNERS = ((0, 0), (1, 0), (1, 1), (0, 1))
# edges bottom, right, top, left as corner pairs (low node first)
_EDGES = ((0, 1), (1, 2), (3, 2), (0, 3))
_CORNER_EDGES = ((3, 0), (0, 1), (1, 2), (2, 3))


# ---------------------------------------------------------------------------
# Extraction
# ---------------------------------------------------------------------------

def _edge_key(i: int, j: int, edge: int) -> Tuple[int, int, int]:
    """Global id of a cell edge: (axis, i, j) of its lower node"""
    if edge == 0:
        return (0, i, j)
    if edge == 1:
        return (1, i + 1, j)
    if edge == 2:
        return (0, i, j + 1)
    return (1, i, j)


def _crossing(p_lo: np.ndarray, p_hi: np.ndarray, f_lo: float, f_hi: float) -> np.ndarray:
    t = f_lo / (f_lo - f_hi)
    return p_lo + t * (p_hi - p_lo)


def _extract_1d(grid: Grid, phi: np.ndarray, tau: float) -> FreeBoundary:
    x = grid.axes()[0]
    alive = phi > 0
    cells, polylines = [], []
    for i in np.flatnonzero(alive[:-1] != alive[1:]):
        point = _crossing(np.array([x[i]]), np.array([x[i + 1]]), phi[i], phi[i + 1])
        cells.append((int(i),))
        polylines.append(point.reshape(1, 1))
    return FreeBoundary(grid=grid, tau=tau, cells=cells, polylines=polylines)


def _cell_segments(i: int, j: int, phi: np.ndarray, xs: np.ndarray, ys: np.ndarray):
    """Marching-squares segments of one cell as pairs of (edge key, point)"""
    f = [phi[i + di, j + dj] for di, dj in _CORNERS]
    p = [np.array([xs[i + di], ys[j + dj]]) for di, dj in _CORNERS]
    alive = [v > 0 for v in f]

    crossings = {}
    for k, (c0, c1) in enumerate(_EDGES):
        if alive[c0] != alive[c1]:
            crossings[k] = (_edge_key(i, j, k), _crossing(p[c0], p[c1], f[c0], f[c1]))

    if len(crossings) == 2:
        k0, k1 = sorted(crossings)
        return [(crossings[k0], crossings[k1])]
    if len(crossings) != 4:
        return []

    # saddle: the cell-center average decides which diagonal pair is connected
    center_alive = sum(f) / 4.0 > 0
    out = []
    for corner in range(4):
        if alive[corner] != center_alive:
            e0, e1 = _CORNER_EDGES[corner]
            out.append((crossings[e0], crossings[e1]))
    return out


def _chain(pieces: List[Tuple[Tuple, Tuple]]) -> List[np.ndarray]:
    """Join segments sharing an edge crossing into ordered polylines"""
    by_key: Dict[Tuple, List[int]] = {}
    for idx, (a, b) in enumerate(pieces):
        by_key.setdefault(a[0], []).append(idx)
        by_key.setdefault(b[0], []).append(idx)

    used = np.zeros(len(pieces), dtype=bool)

    def walk(start_idx: int, start_key: Tuple) -> np.ndarray:
        points = []
        idx, key = start_idx, start_key
        while idx is not None and not used[idx]:
            used[idx] = True
            a, b = pieces[idx]
            first, second = (a, b) if a[0] == key else (b, a)
            if not points:
                points.append(first[1])
            points.append(second[1])
            key = second[0]
            idx = next((k for k in by_key[key] if not used[k]), None)
        return np.array(points)

    polylines = []
    open_ends = sorted(key for key, members in by_key.items() if len(members) == 1)
    for key in open_ends:
        idx = by_key[key][0]
        if not used[idx]:
            polylines.append(walk(idx, key))
    for idx in range(len(pieces)):
        if not used[idx]:
            line = walk(idx, pieces[idx][0][0])
            polylines.append(np.vstack([line, line[:1]]))
    return polylines


def _extract_2d(grid: Grid, phi: np.ndarray, tau: float) -> FreeBoundary:
    xs, ys = grid.axes()
    alive = phi > 0
    corners = np.stack([alive[:-1, :-1], alive[1:, :-1], alive[1:, 1:], alive[:-1, 1:]])
    mixed = corners.any(axis=0) & ~corners.all(axis=0)

    cells, pieces = [], []
    for i, j in zip(*np.nonzero(mixed)):
        cell_pieces = _cell_segments(int(i), int(j), phi, xs, ys)
        if cell_pieces:
            cells.append((int(i), int(j)))
            pieces.extend(cell_pieces)

    segments = np.array([[a[1], b[1]] for a, b in pieces]).reshape(-1, 2, 2)
    return FreeBoundary(grid=grid, tau=tau, cells=cells, polylines=_chain(pieces),
                        segments=segments)


def extract_level_set(grid: Grid, phi, tau: float = 0.0) -> FreeBoundary:
    """Interface between {phi > 0} and {phi <= 0} with linear edge interpolation"""
    phi = np.asarray(phi, dtype=float).reshape(grid.shape)
    if grid.dim == 1:
        return _extract_1d(grid, phi, tau)
    if grid.dim == 2:
        return _extract_2d(grid, phi, tau)
    raise DomainError("interfaces are extracted on 1D and 2D grids only")


def extract_interface(field: ScalarField, tau: float) -> FreeBoundary:
    """Sign-change scan (1D) or marching squares (2D) on u - tau"""
    if (field.values < 0).any():
        raise DomainError("extract_interface needs a nonnegative field")
    fb = extract_level_set(field.grid, field.values - tau, tau)
    if fb.is_empty:
        logger.debug("no interface at tau=%.3g", tau)
    return fb


# ---------------------------------------------------------------------------
# Geometry of an extracted interface
# ---------------------------------------------------------------------------

def _segment_distances(points: np.ndarray, segments: np.ndarray) -> np.ndarray:
    """Distance from each point to the nearest segment, chunked over points"""
    p0 = segments[:, 0, :]
    d = segments[:, 1, :] - p0
    dd = np.maximum(np.einsum("ij,ij->i", d, d), 1e-300)
    out = np.empty(len(points))
    for start in range(0, len(points), 512):
        chunk = points[start:start + 512]
        rel = chunk[:, None, :] - p0[None, :, :]
        t = np.clip(np.einsum("kij,ij->ki", rel, d) / dd, 0.0, 1.0)
        nearest = p0[None, :, :] + t[:, :, None] * d[None, :, :]
        out[start:start + 512] = np.sqrt(((chunk[:, None, :] - nearest) ** 2).sum(axis=2)).min(axis=1)
    return out


def distance_to_interface(fb: FreeBoundary, points) -> np.ndarray:
    """Euclidean distance from each point to the interface; inf when there is none"""
    points = np.asarray(points, dtype=float).reshape(-1, fb.grid.dim)
    if fb.is_empty:
        return np.full(len(points), np.inf)
    if fb.grid.dim == 1:
        return np.abs(points[:, 0][:, None] - fb.vertices[:, 0][None, :]).min(axis=1)
    return _segment_distances(points, fb.segments)


def interface_length(fb: FreeBoundary, center=None, radius: Optional[float] = None) -> float:
    """Polyline length (1D: number of points), optionally clipped to a ball"""
    if fb.is_empty:
        return 0.0
    if fb.grid.dim == 1:
        if radius is None:
            return float(len(fb.vertices))
        c = float(np.atleast_1d(center)[0])
        return float(np.sum(np.abs(fb.vertices[:, 0] - c) < radius))

    p0 = fb.segments[:, 0, :]
    d = fb.segments[:, 1, :] - p0
    lengths = np.sqrt((d ** 2).sum(axis=1))
    if radius is None:
        return float(lengths.sum())

    # overlap of t in [0, 1] with |p0 + t d - c| <= radius
    rel = p0 - np.asarray(center, dtype=float)
    a = np.maximum((d ** 2).sum(axis=1), 1e-300)
    b = 2.0 * (rel * d).sum(axis=1)
    c = (rel ** 2).sum(axis=1) - radius ** 2
    disc = b * b - 4.0 * a * c
    hit = disc > 0
    root = np.sqrt(np.where(hit, disc, 0.0))
    t_lo = np.clip((-b - root) / (2.0 * a), 0.0, 1.0)
    t_hi = np.clip((-b + root) / (2.0 * a), 0.0, 1.0)
    return float(np.sum(np.where(hit, (t_hi - t_lo) * lengths, 0.0)))


def _local_normal(fb: FreeBoundary, point: np.ndarray, reach: float) -> np.ndarray:
    """Unit normal of the polyline near a point from the principal axis of nearby vertices"""
    ends = fb.segments.reshape(-1, 2)
    near = ends[np.sqrt(((ends - point) ** 2).sum(axis=1)) <= reach]
    if len(near) < 2:
        raise DomainError(f"too few interface vertices within {reach:.3g} of {point.tolist()}")
    centered = near - near.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    tangent = vt[0]
    return np.array([-tangent[1], tangent[0]])


def _orient_to_positivity(field: ScalarField, point: np.ndarray, normal: np.ndarray) -> np.ndarray:
    """Flip the normal so that it points into {u > 0}"""
    grid = field.grid
    lows = np.array([lo for lo, _ in grid.extents])
    highs = np.array([hi for _, hi in grid.extents])
    step = 2.0 * grid.h
    ahead = np.clip(point + step * normal, lows, highs)
    behind = np.clip(point - step * normal, lows, highs)
    u_ahead, u_behind = sample_many(field, np.vstack([ahead, behind]))
    return normal if u_ahead >= u_behind else -normal


def _check_center(fb: FreeBoundary, center: np.ndarray) -> None:
    tol = fb.grid.h * np.sqrt(fb.grid.dim) * (1.0 + 1e-9)
    if fb.is_empty:
        raise DomainError("field has no interface")
    dist = float(distance_to_interface(fb, center)[0])
    if dist > tol:
        raise DomainError(f"point {center.tolist()} lies {dist:.3g} from the interface (> {tol:.3g})")


# ---------------------------------------------------------------------------
# Flatness
# ---------------------------------------------------------------------------

def _ball_samples(field: ScalarField, center: np.ndarray, radius: float) -> Tuple[np.ndarray, np.ndarray]:
    grid = field.grid
    if radius <= 0:
        raise DomainError(f"ball radius must be positive, got {radius}")
    if not ball_inside(grid, center, radius):
        raise DomainError(f"ball B_{radius:.4g}({center.tolist()}) exits the grid")
    mask = restrict_to_ball(grid, center, radius)
    offsets = grid.points()[mask.ravel()] - center
    return offsets, field.values[mask]


def _sandwich_terms(values: np.ndarray, params: GammaParams, mode: CertificateMode,
                    rescaled: bool) -> Tuple[np.ndarray, np.ndarray]:
    """Positive-set mask and the linearized values P(u)"""
    positive = values > 0
    mode = CertificateMode(mode)
    if mode is CertificateMode.W_LINEAR:
        linear = values
    else:
        lam = rescale_factor(params, rescaled)
        linear = np.zeros_like(values)
        linear[positive] = profile_inverse(params, values[positive] / lam)
    return positive, linear


def _epsilon(offsets: np.ndarray, positive: np.ndarray, linear: np.ndarray,
             nu: np.ndarray, radius: float) -> float:
    proj = offsets @ nu
    worst = 0.0
    if positive.any():
        worst = float(np.max(np.abs(linear[positive] - proj[positive])))
    if (~positive).any():
        worst = max(worst, float(np.max(np.maximum(proj[~positive], 0.0))))
    return worst / radius


def _unit(theta: float) -> np.ndarray:
    return np.array([np.cos(theta), np.sin(theta)])


def direction_epsilon(field: ScalarField, center, radius: float, params: GammaParams,
                      mode: CertificateMode, nu, rescaled: bool = False) -> float:
    """Smallest eps with the profile sandwich in direction nu on the ball samples"""
    center = np.atleast_1d(np.asarray(center, dtype=float))
    nu = np.atleast_1d(np.asarray(nu, dtype=float))
    nu = nu / np.linalg.norm(nu)
    offsets, values = _ball_samples(field, center, radius)
    positive, linear = _sandwich_terms(values, params, mode, rescaled)
    return _epsilon(offsets, positive, linear, nu, radius)


def flatness_certificate(field: ScalarField, center, radius: float, params: GammaParams,
                         mode: CertificateMode = CertificateMode.U_PROFILE,
                         rescaled: bool = False, fb: Optional[FreeBoundary] = None) -> FlatnessCertificate:
    """Direction search for the flattest profile sandwich in B_radius(center)"""
    grid = field.grid
    center = np.atleast_1d(np.asarray(center, dtype=float))
    mode = CertificateMode(mode)
    fb = fb if fb is not None else extract_interface(field, 0.0)
    _check_center(fb, center)

    offsets, values = _ball_samples(field, center, radius)
    positive, linear = _sandwich_terms(values, params, mode, rescaled)

    if grid.dim == 1:
        candidates = [np.array([1.0]), np.array([-1.0])]
        eps = [_epsilon(offsets, positive, linear, nu, radius) for nu in candidates]
        best = int(np.argmin(eps))
        return FlatnessCertificate(center, radius, candidates[best], eps[best], mode,
                                   n_samples=len(values), n_directions=2)
    if grid.dim != 2:
        raise DomainError("flatness certificates are computed in 1D and 2D")

    evaluated: Dict[float, float] = {}

    def objective(theta: float) -> float:
        theta = float(np.mod(theta, 2.0 * np.pi))
        if theta not in evaluated:
            evaluated[theta] = _epsilon(offsets, positive, linear, _unit(theta), radius)
        return evaluated[theta]

    try:
        seed = _local_normal(fb, center, max(radius, 2.0 * grid.h))
        seed_theta = float(np.arctan2(seed[1], seed[0]))
        objective(seed_theta)
        objective(seed_theta + np.pi)
    except DomainError:
        logger.debug("no polyline normal near %s; coarse scan only", center.tolist())

    for theta in np.linspace(0.0, 2.0 * np.pi, SCAN_DIRECTIONS, endpoint=False):
        objective(theta)

    width = np.pi / SCAN_DIRECTIONS
    theta0 = min(evaluated, key=evaluated.get)
    try:
        minimize_scalar(objective, bracket=(theta0 - width, theta0, theta0 + width),
                        method="golden", tol=1e-10)
    except ValueError:
        # the best scan direction is not bracketed by its neighbours; keep the scan result
        pass

    theta_best = min(evaluated, key=evaluated.get)
    return FlatnessCertificate(
        center=center,
        radius=radius,
        nu=_unit(theta_best),
        epsilon=evaluated[theta_best],
        mode=mode,
        n_samples=len(values),
        n_directions=len(evaluated),
    )


def verify_certificate(field: ScalarField, certificate: FlatnessCertificate, params: GammaParams,
                       inflate: float = 1e-9, rescaled: bool = False) -> bool:
    """Re-check the sandwich pointwise on every ball sample with eps + inflate"""
    offsets, values = _ball_samples(field, np.asarray(certificate.center, dtype=float),
                                    certificate.radius)
    positive, linear = _sandwich_terms(values, params, certificate.mode, rescaled)
    proj = offsets @ np.asarray(certificate.nu, dtype=float)
    bound = (certificate.epsilon + inflate) * certificate.radius
    upper_ok = np.all(np.abs(linear[positive] - proj[positive]) <= bound)
    zero_ok = np.all(proj[~positive] <= bound)
    return bool(upper_ok and zero_ok)


def dyadic_flatness_trace(field: ScalarField, center, radii: Sequence[float], params: GammaParams,
                          mode: CertificateMode = CertificateMode.U_PROFILE,
                          rescaled: bool = False) -> List[FlatnessCertificate]:
    """One certificate per radius; radii must be strictly decreasing"""
    radii = [float(r) for r in radii]
    if any(b >= a for a, b in zip(radii, radii[1:])):
        raise DomainError(f"radii must be strictly decreasing, got {radii}")
    fb = extract_interface(field, 0.0)
    return [flatness_certificate(field, center, r, params, mode, rescaled, fb) for r in radii]


# ---------------------------------------------------------------------------
# Viscosity comparison
# ---------------------------------------------------------------------------

def _rotate(nu: np.ndarray, degrees: float) -> np.ndarray:
    if len(nu) == 1 or degrees == 0.0:
        return nu
    a = np.deg2rad(degrees)
    return np.array([np.cos(a) * nu[0] - np.sin(a) * nu[1], np.sin(a) * nu[0] + np.cos(a) * nu[1]])


def _touch_normal(field: ScalarField, fb: FreeBoundary, point: np.ndarray) -> np.ndarray:
    if field.grid.dim == 1:
        normal = np.array([1.0])
    else:
        normal = _local_normal(fb, point, 3.0 * field.grid.h)
    return _orient_to_positivity(field, point, normal)


def viscosity_touch_test(field: ScalarField, params: GammaParams, fb_point, mu: float,
                         ball_radius: float, side: TouchSide, rescaled: bool = False) -> TouchResult:
    """Scan comparison functions tangent at fb_point for a touching configuration

    Above: balls inside {u > 0} with d = R - |x - z0|, touch when u >= psi - tol.
    Below: balls inside {u = 0} with d = |x - z0| - R, touch when u <= psi + tol.
    """
    side = TouchSide(side)
    if side is TouchSide.ABOVE and mu <= 0:
        raise DomainError("touching by above uses mu > 0")
    if side is TouchSide.BELOW and mu >= 0:
        raise DomainError("touching by below uses mu < 0")
    if ball_radius <= 0:
        raise DomainError(f"ball radius must be positive, got {ball_radius}")

    grid = field.grid
    point = np.atleast_1d(np.asarray(fb_point, dtype=float))
    fb = extract_interface(field, 0.0)
    _check_center(fb, point)

    lam = rescale_factor(params, rescaled)
    tol = 2.0 * grid.h ** params.alpha
    u_touch = sample(field, point)
    if abs(u_touch) > tol:
        return TouchResult(passed=True)

    normal = _touch_normal(field, fb, point)
    nodes = grid.points()
    u = field.values.ravel()
    tilts = TILTS_DEG if grid.dim == 2 else (0.0,)

    for factor in RADIUS_FACTORS:
        radius = factor * ball_radius
        near = np.sqrt(((nodes - point) ** 2).sum(axis=1)) <= radius
        x, u_near = nodes[near], u[near]
        for tilt in tilts:
            nu = _rotate(normal, tilt)
            if side is TouchSide.ABOVE:
                z0 = point + radius * nu
                d = radius - np.sqrt(((x - z0) ** 2).sum(axis=1))
            else:
                z0 = point - radius * nu
                d = np.sqrt(((x - z0) ** 2).sum(axis=1)) - radius
            psi = lam * comparison_psi_u(params, np.maximum(d, 0.0), mu / lam)
            gap = u_near - psi
            ordered = gap.min() >= -tol if side is TouchSide.ABOVE else gap.max() <= tol
            if ordered:
                witness = {
                    "radius": radius,
                    "tilt_deg": tilt,
                    "center": z0.tolist(),
                    "touch_value": u_touch,
                    "tolerance": tol,
                    "n_nodes": int(near.sum()),
                }
                logger.info("touch witnessed at %s (%s, R=%.3g, tilt %.1f)", point.tolist(),
                            side.value, radius, tilt)
                return TouchResult(passed=False, witness=witness)
    return TouchResult(passed=True)
