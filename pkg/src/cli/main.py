"""
Command-line entry point: python -m cli <subcommand> [flags]
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from shared.config import RunConfig, config, load_run_config
from shared.models import (
    ACObjective,
    APObjective,
    BoundarySpec,
    CertificateMode,
    ConfigError,
    FreeBoundaryLabError,
    GammaParams,
    Grid,
    IntervalGeometry,
    RadialGeometry,
    ScalarField,
    StepRule,
    WeightedProblem,
)
from shared.utils import (
    c1alpha_fit,
    default_solver_config,
    derive_params,
    dyadic_flatness_trace,
    extract_interface,
    failure_report,
    gamma_to_0_sweep,
    gamma_to_2_sweep,
    half_grid,
    interval_boundary,
    interval_grid,
    minimize_with_report,
    monotonicity_trace,
    profile,
    radial_exterior,
    radial_field,
    read_field_csv,
    rescale_factor,
    solve,
    verify_certificate,
    weighted_energy,
    write_csv,
    write_dat,
    write_field_csv,
    write_json,
    write_plot_stub,
)

from .oracles import run_oracles

logger = logging.getLogger(__name__)

DEFAULT_GAMMA = 1.0
DEFAULT_S = -0.5
GAMMA2_LADDER = [1.5, 1.75, 1.9]
GAMMA0_LADDER = [0.4, 0.2, 0.1]

# argparse dest -> path inside RunConfig
OVERRIDES: Dict[str, Tuple[str, ...]] = {
    "out": ("out",),
    "jobs": ("jobs",),
    "seed": ("seed",),
    "log_level": ("log_level",),
    "gamma": ("gamma",),
    "gammas": ("gammas",),
    "dim": ("dim",),
    "h": ("h",),
    "objective": ("objective",),
    "rescaled": ("rescaled",),
    "geometry": ("geometry", "kind"),
    "left": ("geometry", "left"),
    "right": ("geometry", "right"),
    "length": ("geometry", "length"),
    "half_width": ("geometry", "half_width"),
    "tilt_deg": ("geometry", "tilt_deg"),
    "shift": ("geometry", "shift"),
    "n": ("geometry", "n"),
    "max_iters": ("solver", "max_iters"),
    "energy_tol": ("solver", "energy_tol"),
    "step_rule": ("solver", "step_rule"),
    "fixed_step": ("solver", "fixed_step"),
    "s": ("linearized", "s"),
    "limit": ("linearized", "limit"),
    "exact_test": ("linearized", "exact_test"),
    "tangential_dims": ("linearized", "tangential_dims"),
    "width": ("linearized", "half_width"),
    "height": ("linearized", "height"),
    "solve_tol": ("linearized", "solve_tol"),
    "center": ("probe", "center"),
    "radii": ("probe", "radii"),
    "mode": ("probe", "mode"),
    "field": ("probe", "field"),
}


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _flag(parser: argparse.ArgumentParser, name: str, **kwargs):
    kwargs.setdefault("default", None)
    parser.add_argument(name, **kwargs)


def _switch(parser: argparse.ArgumentParser, name: str, help_text: str):
    parser.add_argument(name, action="store_const", const=True, default=None, help=help_text)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    _flag(common, "--config", help="JSON run configuration; flags override its values")
    _flag(common, "--out", help="Output directory (default: $FBLAB_OUT/<subcommand>)")
    _flag(common, "--jobs", type=int, help="Worker processes for sweeps")
    _flag(common, "--seed", type=int, help="Recorded seed of the run")
    _flag(common, "--log-level", dest="log_level", help="DEBUG, INFO, WARNING or ERROR")

    physics = argparse.ArgumentParser(add_help=False)
    _flag(physics, "--gamma", type=float, help="Exponent gamma in (0, 2)")
    _flag(physics, "--h", type=float, help="Grid spacing")
    _flag(physics, "--objective", choices=["AP", "AC"])
    _switch(physics, "--rescaled", "Use the rescaled functional J_gamma")

    geometry = argparse.ArgumentParser(add_help=False)
    _flag(geometry, "--geometry", choices=["interval", "tilted-profile", "radial"])
    _flag(geometry, "--left", type=float, help="Interval data at x = 0")
    _flag(geometry, "--right", type=float, help="Interval data at x = length")
    _flag(geometry, "--length", type=float)
    _flag(geometry, "--half-width", dest="half_width", type=float, help="Half side of the square")
    _flag(geometry, "--tilt-deg", dest="tilt_deg", type=float, help="Tilt of the profile normal")
    _flag(geometry, "--shift", type=float, help="Offset of the tilted interface from the origin")

    probe = argparse.ArgumentParser(add_help=False)
    _flag(probe, "--center", type=float, nargs="+")
    _flag(probe, "--radii", type=float, nargs="+")
    _flag(probe, "--mode", choices=["u-profile", "w-linear"])
    _flag(probe, "--field", help="Field CSV written by `solve` to probe instead of a built-in geometry")

    parser = argparse.ArgumentParser(
        prog="fblab",
        description="Numerical laboratory for the negative-exponent Alt-Phillips free boundary problem",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common, physics, geometry], help="Minimize the energy")
    _flag(p, "--max-iters", dest="max_iters", type=int)
    _flag(p, "--energy-tol", dest="energy_tol", type=float)
    _flag(p, "--step-rule", dest="step_rule", choices=["fixed", "backtracking"])
    _flag(p, "--fixed-step", dest="fixed_step", type=float)

    p = sub.add_parser("radial", parents=[common], help="Radial exterior minimizer")
    _flag(p, "--gamma", type=float)
    _flag(p, "--dim", type=int, help="Ambient dimension n")
    _switch(p, "--rescaled", "Report J_gamma instead of E_gamma")

    p = sub.add_parser("linearized", parents=[common], help="Degenerate linearized problem")
    _flag(p, "--s", type=float, help="Weight exponent in (-1, 0]")
    _switch(p, "--limit", "Solve the s = -1 limit problem")
    _switch(p, "--exact-test", "Use x_1^2 - x_n^2/(1+s) as data and report the error")
    _flag(p, "--tangential-dims", dest="tangential_dims", type=int, choices=[1, 2])
    _flag(p, "--width", type=float, help="Tangential half width")
    _flag(p, "--height", type=float)
    _flag(p, "--h", type=float)
    _flag(p, "--solve-tol", dest="solve_tol", type=float)

    sub.add_parser("flatness", parents=[common, physics, geometry, probe],
                   help="Flatness certificates on a dyadic ladder of balls")
    sub.add_parser("monotonicity", parents=[common, physics, geometry, probe],
                   help="Monotonicity functional on increasing balls")

    for name, text in (("sweep-gamma2", "Compactness sweep as gamma increases to 2"),
                       ("sweep-gamma0", "Compactness sweep as gamma decreases to 0")):
        p = sub.add_parser(name, parents=[common], help=text)
        _flag(p, "--gammas", type=float, nargs="+")
        _flag(p, "--h", type=float)
        _flag(p, "--geometry", choices=["interval", "radial"])
        _flag(p, "--left", type=float)
        _flag(p, "--right", type=float)
        _flag(p, "--length", type=float)
        if name == "sweep-gamma2":
            _flag(p, "--n", type=int, help="Dimension of the radial geometry")

    sub.add_parser("validate", parents=[common], help="Run the closed-form oracle suite")
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    out: Dict[str, Any] = {"command": args.command}
    for dest, path in OVERRIDES.items():
        value = getattr(args, dest, None)
        if value is None:
            continue
        node = out
        for key in path[:-1]:
            node = node.setdefault(key, {})
        node[path[-1]] = value
    return out


# ---------------------------------------------------------------------------
# Shared builders
# ---------------------------------------------------------------------------

def _params(cfg: RunConfig) -> GammaParams:
    return derive_params(cfg.gamma if cfg.gamma is not None else DEFAULT_GAMMA)


def _objective(cfg: RunConfig, params: GammaParams):
    if cfg.objective == "AC":
        return ACObjective()
    return APObjective(params, cfg.rescaled)


def _normal(cfg: RunConfig) -> np.ndarray:
    angle = np.deg2rad(cfg.geometry.tilt_deg)
    return np.array([np.sin(angle), np.cos(angle)])


def _square(cfg: RunConfig, center: Sequence[float]) -> Grid:
    hw = cfg.geometry.half_width
    return Grid.from_spacing([(c - hw, c + hw) for c in center], cfg.h)


def _tilted_trace(cfg: RunConfig, params: GammaParams):
    nu = _normal(cfg)
    lam = rescale_factor(params, cfg.rescaled)
    shift = cfg.geometry.shift
    return lambda x, y: lam * profile(params, x * nu[0] + y * nu[1] + shift)


def _interval(cfg: RunConfig) -> IntervalGeometry:
    g = cfg.geometry
    return IntervalGeometry(g.left, g.right, g.length)


def _interface_table(field: ScalarField) -> Dict[str, np.ndarray]:
    vertices = extract_interface(field, 0.0).vertices
    return {f"x{k + 1}": vertices[:, k] for k in range(field.grid.dim)}


def _minimize(cfg: RunConfig, params: GammaParams):
    kind = cfg.geometry.kind
    if kind == "interval":
        grid = interval_grid(_interval(cfg), cfg.h)
        boundary = interval_boundary(_interval(cfg))
    elif kind == "tilted-profile":
        grid = _square(cfg, [0.0, 0.0])
        boundary = BoundarySpec.dirichlet_everywhere(2, _tilted_trace(cfg, params))
    else:
        raise ConfigError("solve runs on interval or tilted-profile geometries")
    objective = _objective(cfg, params)
    solver_config = default_solver_config(grid, objective, cfg.solver.max_iters, cfg.solver.energy_tol)
    solver_config.step_rule = StepRule(cfg.solver.step_rule)
    solver_config.fixed_step = cfg.solver.fixed_step
    return minimize_with_report(grid, boundary, objective, solver_config)


def _probe_field(cfg: RunConfig, params: GammaParams) -> Tuple[ScalarField, np.ndarray, Any]:
    """Field to probe, default ball center and zero set (indicator or level function)"""
    center = None if cfg.probe.center is None else np.asarray(cfg.probe.center, dtype=float)
    if cfg.probe.field is not None:
        if center is None:
            raise ConfigError("probe.center is required with probe.field")
        field = read_field_csv(cfg.probe.field, nonneg_flag=True)
        return field, center, field.values <= 0.0

    kind = cfg.geometry.kind
    if kind == "tilted-profile":
        nu = _normal(cfg)
        grid = _square(cfg, [0.0, 0.0])
        x, y = grid.mesh()
        level = x * nu[0] + y * nu[1] + cfg.geometry.shift
        field = ScalarField(grid, _tilted_trace(cfg, params)(x, y), nonneg_flag=True)
        default = -cfg.geometry.shift * nu
        return field, default if center is None else center, level

    if kind == "radial":
        solution = radial_exterior(params, 2, rescaled=cfg.rescaled)
        radius = solution.free_boundary_radius
        grid = _square(cfg, [radius, 0.0])
        field = radial_field(solution, grid)
        x, y = grid.mesh()
        level = radius - np.sqrt(x ** 2 + y ** 2)
        return field, np.array([radius, 0.0]) if center is None else center, level

    field = _minimize(cfg, params).field
    if center is None:
        vertices = extract_interface(field, 0.0).vertices
        if len(vertices) == 0:
            raise ConfigError("the interval minimizer has no free boundary; pass probe.center")
        center = vertices[0]
    return field, center, field.values <= 0.0


def _config_comments(cfg: RunConfig) -> List[str]:
    return [f"fblab {cfg.command}", f"gamma={cfg.gamma} h={cfg.h} seed={cfg.seed}"]


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_solve(cfg: RunConfig, out_dir: Path) -> int:
    params = _params(cfg)
    result = _minimize(cfg, params)
    field = result.field
    write_field_csv(field, out_dir / "field.csv")
    write_csv(out_dir / "energy_trace.csv", {
        "iteration": [r.iteration for r in result.trace],
        "stage": [r.stage for r in result.trace],
        "delta": [r.delta for r in result.trace],
        "dirichlet": [r.dirichlet for r in result.trace],
        "potential": [r.potential for r in result.trace],
        "total": [r.total for r in result.trace],
    }, comments=_config_comments(cfg))
    write_csv(out_dir / "interface.csv", _interface_table(field))
    if field.grid.dim == 1:
        dat = write_dat(out_dir / "solve.dat", {"x": field.grid.axes()[0], "u": field.values})
        write_plot_stub(out_dir, [dat])
    write_json(out_dir / "solve_report.json", {
        "status": "ok",
        "config": cfg.resolved(),
        "energy": result.energy.to_dict(),
        "iterations": result.iterations,
        "converged": result.converged,
    })
    print(f"energy={result.energy.total:.10g} iterations={result.iterations}")
    return 0


def cmd_radial(cfg: RunConfig, out_dir: Path) -> int:
    params = _params(cfg)
    solution = radial_exterior(params, cfg.dim, rescaled=cfg.rescaled)
    write_csv(out_dir / "radial.csv", {"r": solution.radii, "u": solution.values},
              comments=_config_comments(cfg))
    dat = write_dat(out_dir / "radial.dat", {"r": solution.radii, "u": solution.values})
    write_plot_stub(out_dir, [dat])
    write_json(out_dir / "radial_report.json", {
        "status": "ok",
        "config": cfg.resolved(),
        "mu": solution.mu,
        "free_boundary_radius": solution.free_boundary_radius,
        "energy": solution.energy,
        "dirichlet": solution.dirichlet,
        "potential": solution.potential,
        "functional": "J_gamma" if cfg.rescaled else "E_gamma",
    })
    print(f"mu={solution.mu:.6f} energy={solution.energy:.10g}")
    return 0


def cmd_linearized(cfg: RunConfig, out_dir: Path) -> int:
    lin = cfg.linearized
    if lin.limit and lin.exact_test:
        raise ConfigError("the exact test needs s > -1; drop linearized.limit")
    s = None if lin.limit else (lin.s if lin.s is not None else DEFAULT_S)
    grid = half_grid(lin.tangential_dims, lin.half_width, lin.height, cfg.h)

    if lin.exact_test:
        def data(*xs):
            return xs[0] ** 2 - xs[-1] ** 2 / (1.0 + s)
    else:
        def data(*xs):
            return np.cos(np.pi * xs[0]) * (1.0 + xs[-1])

    v = solve(WeightedProblem(grid, data, s), lin.solve_tol)
    write_field_csv(v, out_dir / "linearized_field.csv")
    report: Dict[str, Any] = {
        "status": "ok",
        "config": cfg.resolved(),
        "s": s,
        "limit": s is None,
        "c1alpha": c1alpha_fit(v),
    }
    if s is not None:
        report["weighted_energy"] = weighted_energy(v, s)
    if lin.exact_test:
        error = float(np.max(np.abs(v.values - data(*grid.mesh()))))
        bound = 5.0 * grid.h ** 2 / (1.0 + s)
        report.update(max_error=error, error_bound=bound, within_bound=error <= bound)
        if error > bound:
            logger.warning("exact-solution error %.3e exceeds %.3e", error, bound)
        print(f"max_error={error:.3e} bound={bound:.3e}")
    write_json(out_dir / "linearized_report.json", report)
    return 0


def cmd_flatness(cfg: RunConfig, out_dir: Path) -> int:
    params = _params(cfg)
    field, center, _ = _probe_field(cfg, params)
    mode = CertificateMode(cfg.probe.mode)
    radii = sorted(cfg.probe.radii, reverse=True)
    certs = dyadic_flatness_trace(field, center, radii, params, mode, cfg.rescaled)

    eps = np.array([c.epsilon for c in certs])
    ratios = np.concatenate([[np.nan], eps[1:] / np.where(eps[:-1] > 0, eps[:-1], np.nan)])
    table: Dict[str, Any] = {"radius": [c.radius for c in certs], "epsilon": eps, "ratio": ratios}
    for k in range(field.grid.dim):
        table[f"nu{k + 1}"] = [c.nu[k] for c in certs]
    table["verified"] = [verify_certificate(field, c, params, rescaled=cfg.rescaled) for c in certs]
    table["n_samples"] = [c.n_samples for c in certs]
    write_csv(out_dir / "flatness.csv", table, comments=_config_comments(cfg))
    write_csv(out_dir / "interface.csv", _interface_table(field))
    dat = write_dat(out_dir / "flatness.dat", {"radius": table["radius"], "epsilon": eps})
    write_plot_stub(out_dir, [dat])
    write_json(out_dir / "flatness_report.json", {
        "status": "ok", "config": cfg.resolved(), "certificates": certs})
    for cert in certs:
        print(f"r={cert.radius:.4g} epsilon={cert.epsilon:.4g}")
    return 0


def cmd_monotonicity(cfg: RunConfig, out_dir: Path) -> int:
    params = _params(cfg)
    field, center, zero_set = _probe_field(cfg, params)
    radii = sorted(cfg.probe.radii)
    trace = monotonicity_trace(field, zero_set, center, radii, description=cfg.geometry.kind)
    write_csv(out_dir / "phi_trace.csv", {"radius": trace.radii, "phi": trace.phi},
              comments=_config_comments(cfg))
    dat = write_dat(out_dir / "phi_trace.dat", {"radius": trace.radii, "phi": trace.phi})
    write_plot_stub(out_dir, [dat])
    nondecreasing = bool(np.all(np.diff(trace.phi) >= -field.grid.h))
    write_json(out_dir / "monotonicity_report.json", {
        "status": "ok", "config": cfg.resolved(), "trace": trace, "nondecreasing": nondecreasing})
    for r, phi in zip(trace.radii, trace.phi):
        print(f"r={r:.4g} phi={phi:.6g}")
    return 0


def _sweep_table(report) -> Dict[str, Any]:
    table: Dict[str, Any] = {
        "gamma": report.gammas,
        "dirichlet": [e.dirichlet for e in report.energies],
        "potential": [e.potential for e in report.energies],
        "total": [e.total for e in report.energies],
        "gap": report.energy_gaps,
    }
    for name, values in (("l2_distance", report.l2_distances),
                         ("hausdorff", report.hausdorff_distances),
                         ("free_boundary_radius", report.free_boundary_radii)):
        if values and len(values) == len(report.gammas):
            table[name] = values
    return table


def _cmd_sweep(cfg: RunConfig, out_dir: Path, to_two: bool) -> int:
    kind = cfg.geometry.kind
    if kind == "tilted-profile" or (kind == "radial" and not to_two):
        raise ConfigError(f"{cfg.command} does not run on {kind} geometries")
    geometry = RadialGeometry(cfg.geometry.n) if kind == "radial" else _interval(cfg)
    if to_two:
        report = gamma_to_2_sweep(geometry, cfg.gammas or GAMMA2_LADDER, cfg.h, cfg.jobs)
    else:
        report = gamma_to_0_sweep(geometry, cfg.gammas or GAMMA0_LADDER, cfg.h, cfg.jobs)

    table = _sweep_table(report)
    write_csv(out_dir / "sweep_energies.csv", table, comments=[
        *_config_comments(cfg), f"reference={report.reference_value!r} ({report.reference_provenance})"])
    if report.truncation:
        write_csv(out_dir / "truncation.csv", {k: [row[k] for row in report.truncation]
                                               for k in report.truncation[0]})
    if report.gammas:
        dat = write_dat(out_dir / "sweep.dat", {"gamma": table["gamma"], "total": table["total"]})
        write_plot_stub(out_dir, [dat])
    write_json(out_dir / "sweep_report.json", {
        "status": "ok" if report.complete else "failed",
        "config": cfg.resolved(),
        "report": report,
    })
    if not report.complete:
        logger.error("sweep stopped early: %s", report.failure)
        return 1
    for gamma, total, gap in zip(table["gamma"], table["total"], table["gap"]):
        print(f"gamma={gamma:.4g} energy={total:.10g} gap={gap:.3e}")
    return 0


def cmd_sweep_gamma2(cfg: RunConfig, out_dir: Path) -> int:
    return _cmd_sweep(cfg, out_dir, to_two=True)


def cmd_sweep_gamma0(cfg: RunConfig, out_dir: Path) -> int:
    return _cmd_sweep(cfg, out_dir, to_two=False)


def cmd_validate(cfg: RunConfig, out_dir: Path) -> int:
    results = run_oracles()
    width = max(len(r.name) for r in results)
    print(f"{'check':<{width}}  {'status':<6}  {'value':>12}  {'bound':>12}")
    for r in results:
        print(f"{r.name:<{width}}  {'ok' if r.passed else 'FAIL':<6}  {r.value:>12.4g}  {r.bound:>12.4g}")
    write_csv(out_dir / "validate.csv", {
        "check": [r.name for r in results],
        "passed": [r.passed for r in results],
        "value": [r.value for r in results],
        "bound": [r.bound for r in results],
    })
    failed = [r.name for r in results if not r.passed]
    write_json(out_dir / "validate_report.json", {
        "status": "ok" if not failed else "failed",
        "config": cfg.resolved(),
        "checks": results,
        "failed": failed,
    })
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 1 if failed else 0


COMMANDS = {
    "solve": cmd_solve,
    "radial": cmd_radial,
    "linearized": cmd_linearized,
    "flatness": cmd_flatness,
    "monotonicity": cmd_monotonicity,
    "sweep-gamma2": cmd_sweep_gamma2,
    "sweep-gamma0": cmd_sweep_gamma0,
    "validate": cmd_validate,
}


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def _setup_logging(level: Optional[str]):
    level = (level or config.LOG_LEVEL).upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse, resolve the configuration, dispatch; returns the process exit code"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        config.validate()
        cfg = load_run_config(args.config, _overrides(args))
    except (ConfigError, ValueError) as exc:
        print(f"fblab: config error: {exc}", file=sys.stderr)
        return 2
    _setup_logging(cfg.log_level)

    out_dir = Path(cfg.out) if cfg.out else config.output_root() / cfg.command
    config.create_directories(out_dir)
    logger.info("running %s into %s", cfg.command, out_dir)

    try:
        return COMMANDS[cfg.command](cfg, out_dir)
    except ConfigError as exc:
        print(f"fblab: config error: {exc}", file=sys.stderr)
        return 2
    except (FreeBoundaryLabError, OverflowError) as exc:
        logger.error("%s failed: %s", cfg.command, exc)
        failure_report(out_dir, cfg.command, exc, cfg.resolved())
        print(f"fblab: {cfg.command} failed: {exc} (see {out_dir / 'report.json'})", file=sys.stderr)
        return 1


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
