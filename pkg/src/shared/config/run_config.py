"""
Run configuration for the command line: JSON file plus flag overrides, validated by pydantic
"""
import json
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from ..models import ConfigError

SUBCOMMANDS = (
    "solve", "radial", "linearized", "flatness", "monotonicity",
    "sweep-gamma2", "sweep-gamma0", "validate",
)


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GeometryConfig(_Strict):
    """Where a run lives: an interval, a square with tilted-profile data, or the radial exterior"""
    kind: Literal["interval", "tilted-profile", "radial"] = "interval"
    left: float = Field(1.0, ge=0.0)
    right: float = Field(0.0, ge=0.0)
    length: float = Field(1.0, gt=0.0)
    half_width: float = Field(0.5, gt=0.0)
    tilt_deg: float = 0.0
    shift: float = 0.25
    n: int = Field(2, ge=1, le=3)


class SolverSettings(_Strict):
    max_iters: Optional[int] = Field(None, ge=1)
    energy_tol: Optional[float] = Field(None, gt=0.0)
    step_rule: Literal["fixed", "backtracking"] = "backtracking"
    fixed_step: float = Field(1.0, gt=0.0)


class LinearizedSettings(_Strict):
    s: Optional[float] = None
    limit: bool = False
    exact_test: bool = False
    tangential_dims: int = Field(1, ge=1, le=2)
    half_width: float = Field(1.0, gt=0.0)
    height: float = Field(1.0, gt=0.0)
    solve_tol: Optional[float] = Field(None, gt=0.0)

    @field_validator("s")
    @classmethod
    def _s_range(cls, value):
        if value is not None and not -1.0 < value <= 0.0:
            raise ValueError("s must lie in (-1, 0]")
        return value


class ProbeSettings(_Strict):
    """Ball centers and radii for certificates and monotonicity traces"""
    center: Optional[List[float]] = None
    radii: List[float] = Field(default_factory=lambda: [0.2, 0.1, 0.05])
    mode: Literal["u-profile", "w-linear"] = "u-profile"
    field: Optional[str] = None


class RunConfig(_Strict):
    command: Literal["solve", "radial", "linearized", "flatness", "monotonicity",
                     "sweep-gamma2", "sweep-gamma0", "validate"] = "validate"
    gamma: Optional[float] = Field(None, gt=0.0, lt=2.0)
    gammas: Optional[List[float]] = None
    dim: int = Field(1, ge=1, le=3)
    h: float = Field(1.0 / 256, gt=0.0, le=0.25)
    objective: Literal["AP", "AC"] = "AP"
    rescaled: bool = False
    geometry: GeometryConfig = Field(default_factory=GeometryConfig)
    solver: SolverSettings = Field(default_factory=SolverSettings)
    linearized: LinearizedSettings = Field(default_factory=LinearizedSettings)
    probe: ProbeSettings = Field(default_factory=ProbeSettings)
    out: Optional[str] = None
    seed: int = 0
    jobs: int = Field(1, ge=1)
    log_level: Optional[str] = None

    @field_validator("gammas")
    @classmethod
    def _gammas_range(cls, value):
        if value is not None and any(not 0.0 < g < 2.0 for g in value):
            raise ValueError("every gamma must lie in (0, 2)")
        return value

    def resolved(self) -> Dict[str, Any]:
        """Full configuration as plain JSON types, echoed into every report"""
        return self.model_dump(mode="json")


def _key_line(text: str, key: Union[str, int]) -> Optional[int]:
    needle = f'"{key}"'
    for number, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return number
    return None


def _merge(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in overrides.items():
        if value is None:
            continue
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        elif isinstance(value, dict):
            merged[key] = _merge({}, value)
        else:
            merged[key] = value
    return merged


def load_run_config(path: Optional[Union[str, Path]] = None,
                    overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """Read the JSON file (if any), apply flag overrides, validate; errors carry line numbers"""
    text = ""
    data: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        try:
            data = json.loads(text) if text.strip() else {}
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc.msg}", line=exc.lineno) from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object", line=1)

    data = _merge(data, overrides or {})
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        loc: Tuple = tuple(first.get("loc", ()))
        location = ".".join(str(p) for p in loc) or "config"
        line = None
        for part in reversed(loc):
            line = _key_line(text, part) if text else None
            if line is not None:
                break
        raise ConfigError(f"{location}: {first.get('msg', 'invalid value')}", line=line) from exc
