"""
Data models for fblab
"""
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple, Union
from enum import Enum

import numpy as np

from .errors import (
    FreeBoundaryLabError,
    DomainError,
    ConsistencyError,
    ConfigError,
    ConvergenceError,
    BracketError,
)


class CertificateMode(Enum):
    """Comparison family used by flatness certificates"""
    U_PROFILE = "u-profile"
    W_LINEAR = "w-linear"


class TouchSide(Enum):
    """Side from which a comparison function is tested"""
    ABOVE = "above"
    BELOW = "below"


class HodographDirection(Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


class BarrierId(Enum):
    """Closed-form barriers of the linearized problem"""
    Q1 = "q1"
    Q2 = "q2"
    LIMIT_PAIR = "limit_pair"


class StepRule(Enum):
    FIXED = "fixed"
    BACKTRACKING = "backtracking"


@dataclass(frozen=True)
class GammaParams:
    """Exponent algebra derived from gamma"""
    gamma: float
    alpha: float
    c_alpha: float
    s: float
    c_gamma: float


@dataclass(frozen=True)
class Grid:
    """Uniform node-centered grid with equal spacing on every axis"""
    extents: Tuple[Tuple[float, float], ...]
    n_cells: Tuple[int, ...]
    h: float

    def __post_init__(self):
        if len(self.extents) != len(self.n_cells) or not 1 <= len(self.n_cells) <= 3:
            raise DomainError("grid needs 1 to 3 axes with one cell count each")
        if self.h <= 0:
            raise DomainError(f"grid spacing must be positive, got {self.h}")
        for (lo, hi), n in zip(self.extents, self.n_cells):
            if n < 8:
                raise DomainError(f"grid needs at least 8 cells per axis, got {n}")
            if abs((hi - lo) / n - self.h) > 1e-9 * self.h:
                raise DomainError(
                    f"axis [{lo}, {hi}] with {n} cells does not have spacing {self.h}")

    @classmethod
    def from_spacing(cls, extents, h: float) -> "Grid":
        """Build a grid from per-axis [min, max] and the common spacing"""
        extents = tuple((float(lo), float(hi)) for lo, hi in extents)
        n_cells = tuple(int(round((hi - lo) / h)) for lo, hi in extents)
        return cls(extents=extents, n_cells=n_cells, h=float(h))

    @property
    def dim(self) -> int:
        return len(self.n_cells)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(n + 1 for n in self.n_cells)

    def axes(self) -> List[np.ndarray]:
        """Node coordinates per axis"""
        return [lo + self.h * np.arange(n + 1) for (lo, _), n in zip(self.extents, self.n_cells)]

    def mesh(self) -> List[np.ndarray]:
        """Node coordinate arrays with 'ij' indexing"""
        return np.meshgrid(*self.axes(), indexing="ij")

    def points(self) -> np.ndarray:
        """All nodes as an (N, dim) array in row-major order"""
        return np.stack([m.ravel() for m in self.mesh()], axis=1)

    def contains(self, point, tol: float = 1e-12) -> bool:
        point = np.atleast_1d(np.asarray(point, dtype=float))
        return all(lo - tol <= p <= hi + tol for p, (lo, hi) in zip(point, self.extents))


@dataclass
class ScalarField:
    """Node values on a grid; NaN marks excluded boundary nodes of stencil outputs"""
    grid: Grid
    values: np.ndarray
    nonneg_flag: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(self.grid.shape)
        if np.isinf(self.values).any():
            raise DomainError("field values must be finite")
        if self.nonneg_flag and (self.values < 0).any():
            raise DomainError("field flagged nonnegative has negative values")

    def with_values(self, values: np.ndarray, nonneg_flag: Optional[bool] = None) -> "ScalarField":
        flag = self.nonneg_flag if nonneg_flag is None else nonneg_flag
        return ScalarField(self.grid, values, flag)


@dataclass(frozen=True)
class Dirichlet:
    """Prescribed trace on a facet; trace receives coordinate arrays"""
    trace: Callable[..., np.ndarray]


@dataclass(frozen=True)
class FreeFacet:
    """Natural (zero-flux) condition on a facet"""


BoundaryCondition = Union[Dirichlet, FreeFacet]

FACET_NAMES = {
    1: ("left", "right"),
    2: ("left", "right", "bottom", "top"),
}


@dataclass
class BoundarySpec:
    """One condition per outer facet"""
    dim: int
    conditions: Dict[str, BoundaryCondition]

    def __post_init__(self):
        expected = set(FACET_NAMES.get(self.dim, ()))
        if not expected:
            raise DomainError(f"boundary specs exist for 1D and 2D grids, got dim={self.dim}")
        if set(self.conditions) != expected:
            raise DomainError(
                f"every facet needs exactly one condition: expected {sorted(expected)}, "
                f"got {sorted(self.conditions)}")

    @classmethod
    def dirichlet_everywhere(cls, dim: int, trace: Callable[..., np.ndarray]) -> "BoundarySpec":
        return cls(dim, {name: Dirichlet(trace) for name in FACET_NAMES[dim]})


@dataclass
class EnergyReport:
    """Summands of a discrete energy"""
    dirichlet: float
    potential: float
    perimeter: float = 0.0

    @property
    def total(self) -> float:
        return self.dirichlet + self.potential + self.perimeter

    def to_dict(self) -> Dict[str, float]:
        return {
            "dirichlet": self.dirichlet,
            "potential": self.potential,
            "perimeter": self.perimeter,
            "total": self.total,
        }


@dataclass(frozen=True)
class APObjective:
    """Negative-exponent energy E_gamma, or J_gamma when rescaled"""
    params: GammaParams
    rescaled: bool = False


@dataclass(frozen=True)
class ACObjective:
    """One-phase energy with potential equal to the positivity indicator"""


Objective = Union[APObjective, ACObjective]


@dataclass(frozen=True)
class IntervalGeometry:
    """Interval [0, length] with Dirichlet data at both ends"""
    left: float
    right: float
    length: float = 1.0

    def __post_init__(self):
        if self.left < 0 or self.right < 0:
            raise DomainError("interval data must be nonnegative")
        if self.length <= 0:
            raise DomainError(f"interval length must be positive, got {self.length}")


@dataclass(frozen=True)
class RadialGeometry:
    """Exterior of the unit ball in R^n with data 1 on the sphere"""
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise DomainError(f"dimension must be at least 1, got {self.n}")


Geometry = Union[IntervalGeometry, RadialGeometry]


@dataclass
class SolverConfig:
    """Regularization ladder, thresholds and iteration controls for minimize"""
    delta: float
    tau: float
    max_iters: int = 2000
    step_rule: StepRule = StepRule.BACKTRACKING
    energy_tol: float = 1e-10
    ladder: List[float] = field(default_factory=list)
    fixed_step: float = 1.0

    def __post_init__(self):
        if self.delta <= 0 or self.tau <= 0:
            raise DomainError("delta and tau must be positive")
        if not self.ladder:
            self.ladder = [self.delta]
        if any(b >= a for a, b in zip(self.ladder, self.ladder[1:])):
            raise DomainError("continuation ladder must be strictly decreasing")
        if self.max_iters < 1:
            raise DomainError("max_iters must be at least 1")


@dataclass
class EnergyTraceRow:
    iteration: int
    stage: int
    delta: float
    dirichlet: float
    potential: float

    @property
    def total(self) -> float:
        return self.dirichlet + self.potential


@dataclass
class SolveResult:
    """Minimizer with its energy trace and the unregularized final energy"""
    field: ScalarField
    energy: EnergyReport
    trace: List[EnergyTraceRow]
    iterations: int
    converged: bool


@dataclass
class RadialSolution:
    """Radial exterior minimizer sampled on [1, 1 + mu]"""
    gamma: float
    n: int
    mu: float
    radii: np.ndarray
    values: np.ndarray
    dirichlet: float = float("nan")
    potential: float = float("nan")
    scale: float = 1.0

    @property
    def energy(self) -> float:
        """Energy over the whole exterior domain: E_gamma, or J_gamma when scale != 1"""
        return self.dirichlet + self.potential

    @property
    def free_boundary_radius(self) -> float:
        return 1.0 + self.mu


@dataclass
class FreeBoundary:
    """Extracted interface of the positivity set"""
    grid: Grid
    tau: float
    cells: List[Tuple[int, ...]] = field(default_factory=list)
    polylines: List[np.ndarray] = field(default_factory=list)
    segments: np.ndarray = field(default_factory=lambda: np.zeros((0, 2, 2)))

    @property
    def is_empty(self) -> bool:
        return len(self.polylines) == 0

    @property
    def vertices(self) -> np.ndarray:
        if self.is_empty:
            return np.zeros((0, self.grid.dim))
        return np.concatenate([p.reshape(len(p), -1) for p in self.polylines], axis=0)


@dataclass
class FlatnessCertificate:
    """Direction and flatness witnessing the profile sandwich in one ball"""
    center: np.ndarray
    radius: float
    nu: np.ndarray
    epsilon: float
    mode: CertificateMode
    n_samples: int = 0
    n_directions: int = 0


@dataclass
class TouchResult:
    """Outcome of a viscosity comparison scan"""
    passed: bool
    witness: Optional[Dict[str, float]] = None


@dataclass
class WeightedProblem:
    """Half-space problem div(x_n^s grad v) = 0; s=None encodes the s = -1 limit"""
    grid: Grid
    data: Callable[..., np.ndarray]
    s: Optional[float] = None

    def __post_init__(self):
        if self.grid.dim < 2:
            raise DomainError("the half-space problem needs at least one tangential axis")
        bottom = self.grid.extents[-1][0]
        if abs(bottom - 0.5 * self.grid.h) > 1e-12:
            raise DomainError("first x_n row must sit at h/2 above the singular line")
        if self.s is not None and not -1.0 < self.s <= 0.0:
            raise DomainError(f"s must lie in (-1, 0], got {self.s}")

    @property
    def is_limit(self) -> bool:
        return self.s is None


@dataclass
class C1AlphaFit:
    a_prime: np.ndarray
    alpha_fit: float
    C_fit: float
    v0: float = 0.0
    residual: float = 0.0


@dataclass
class MonotonicityTrace:
    radii: np.ndarray
    phi: np.ndarray
    description: str = ""


@dataclass
class FlatnessRatioRow:
    radius: float
    epsilon: float
    ratio: float
    slack: float
    flagged: bool
    floor_dominated: bool


@dataclass
class FlatnessDecayReport:
    in_regime: bool
    rows: List[FlatnessRatioRow] = field(default_factory=list)
    certificates: List[FlatnessCertificate] = field(default_factory=list)


@dataclass
class HarnackReport:
    trapped: bool
    c_plus: float = 0.0
    c_minus: float = 0.0

    @property
    def best(self) -> float:
        return max(self.c_plus, self.c_minus)


@dataclass
class TrapReport:
    C_lower: float
    C_upper: float
    eps_flat: float

    @property
    def C(self) -> float:
        return max(self.C_lower, self.C_upper) / self.eps_flat


@dataclass
class ImprovementReport:
    trapped: bool
    a_minus: float = 1.0
    a_plus: float = 1.0
    a_minus_inner: float = 1.0
    a_plus_inner: float = 1.0
    c_minus: Optional[float] = None
    c_plus: Optional[float] = None

    @property
    def c(self) -> Optional[float]:
        defined = [c for c in (self.c_minus, self.c_plus) if c is not None]
        return min(defined) if defined else None


@dataclass
class SweepReport:
    """Per-gamma results of a compactness sweep, aligned by index"""
    gammas: List[float]
    energies: List[EnergyReport]
    reference_value: float
    reference_provenance: str
    energy_gaps: List[float] = field(default_factory=list)
    l2_distances: List[float] = field(default_factory=list)
    hausdorff_distances: List[float] = field(default_factory=list)
    free_boundary_radii: List[float] = field(default_factory=list)
    flatness_ratios: List[float] = field(default_factory=list)
    truncation: List[Dict[str, float]] = field(default_factory=list)
    complete: bool = True
    failure: Optional[str] = None


__all__ = [
    'FreeBoundaryLabError', 'DomainError', 'ConsistencyError', 'ConfigError',
    'ConvergenceError', 'BracketError',
    'CertificateMode', 'TouchSide', 'HodographDirection', 'BarrierId', 'StepRule',
    'GammaParams', 'Grid', 'ScalarField', 'Dirichlet', 'FreeFacet', 'BoundaryCondition',
    'FACET_NAMES', 'BoundarySpec', 'EnergyReport', 'APObjective', 'ACObjective', 'Objective',
    'IntervalGeometry', 'RadialGeometry', 'Geometry',
    'SolverConfig', 'EnergyTraceRow', 'SolveResult', 'RadialSolution', 'FreeBoundary',
    'FlatnessCertificate', 'TouchResult', 'WeightedProblem', 'C1AlphaFit',
    'MonotonicityTrace', 'FlatnessRatioRow', 'FlatnessDecayReport', 'HarnackReport',
    'TrapReport', 'ImprovementReport', 'SweepReport',
]
