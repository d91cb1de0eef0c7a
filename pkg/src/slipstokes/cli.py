"""Command-line driver: solves, convergence studies, patch tests, constants, slip sweeps.

Every subcommand writes its artifacts into ``--out``: a JSON run report
(``report.json``), wall-clock timings kept apart in ``timings.json`` so the
report itself is reproducible byte for byte, plus CSV and VTK files where
relevant.  The exit status is 0 exactly when every solve met the residual
tolerance (and, for ``patch-test``, reproduced the exact flow).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (CSV_COLUMNS, DEFAULT_GAMMA0, coercivity_probe, convergence_study,
                       error_norms, estimate_constants, select_parameters, slip_violation)
from .assembly import ProblemConfig, make_spaces
from .cases import BuiltinCase, cavity_mesh, get_case, patch_mesh
from .femspace import interpolate
from .linsolve import SingularSystemError, solve_stokes
from .mesh import BoundaryTag, MeshError, load_mesh
from .vtk import write_vtk

log = logging.getLogger("slipstokes")

COMMANDS = ("solve", "converge", "patch-test", "estimate-constants", "sweep-slip")
TABLE_LEVELS = (8, 16, 32, 64, 128)
SWEEP_THETAS = (-1, 1)
SWEEP_GAMMAS = (1e-3, 1.0, 1e3)
PATCH_TOL = 1e-10
AUTO = "auto"


class ConfigError(ValueError):
    pass


# -- configuration ---------------------------------------------------------------

def _int_list(text):
    if isinstance(text, (list, tuple)):
        return tuple(int(v) for v in text)
    return tuple(int(v) for v in str(text).replace(" ", "").split(",") if v)


def _float_list(text):
    if isinstance(text, (list, tuple)):
        return tuple(float(v) for v in text)
    return tuple(float(v) for v in str(text).replace(" ", "").split(",") if v)


def _real_or_auto(text):
    if isinstance(text, str) and text.strip().lower() == AUTO:
        return AUTO
    value = float(text)
    if not value > 0:
        raise ValueError("must be positive or 'auto'")
    return value


def _theta(text):
    value = int(text)
    if value not in (-1, 0, 1):
        raise ValueError("theta must be -1, 0 or 1")
    return value


def _degree(text):
    value = int(text)
    if value not in (1, 2):
        raise ValueError("degree must be 1 or 2")
    return value


CONVERTERS = {
    "theta": _theta, "gamma0": _real_or_auto, "beta": _real_or_auto, "degree": _degree,
    "nu": float, "levels": _int_list, "mesh": str, "case": str, "out": str, "seed": int,
    "dim": int, "tol": float, "method": str, "jobs": int, "samples": int,
    "thetas": _int_list, "gamma0s": _float_list, "vtk": lambda v: str(v).lower() in
    ("1", "true", "yes", "on"),
}


def parse_config_file(path) -> dict:
    """``key = value`` (or ``key: value``) lines; ``#`` starts a comment."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        sep = "=" if "=" in line else ":" if ":" in line else None
        if sep is None:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split(sep, 1))
        key = key.replace("-", "_")
        if key not in CONVERTERS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = _convert(key, value)
    return out


def _convert(key, value):
    try:
        return CONVERTERS[key](value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid value {value!r} for {key}: {exc}") from exc


@dataclass
class RunSpec:
    """Resolved description of one CLI run.

    The mesh comes either from ``mesh`` (a file) or from the built-in
    generator of the case at the levels in ``levels``; never both.
    """

    command: str
    case: str = BuiltinCase.CAVITY2D.value
    theta: int = -1
    gamma0: float | str = DEFAULT_GAMMA0
    beta: float | str = AUTO
    degree: int = 1
    nu: float | None = None
    levels: tuple = ()
    mesh: str | None = None
    out: str = "out"
    seed: int = 0
    dim: int = 2
    tol: float = 1e-8
    method: str = "direct"
    jobs: int = 1
    samples: int = 200
    thetas: tuple = SWEEP_THETAS
    gamma0s: tuple = SWEEP_GAMMAS
    vtk: bool = True
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        try:
            BuiltinCase(self.case)
        except ValueError:
            names = ", ".join(c.value for c in BuiltinCase)
            raise ConfigError(f"unknown case {self.case!r} (choose from {names})") from None
        if self.mesh is not None and self.levels:
            raise ConfigError("give either --mesh or --levels, not both")
        if self.dim not in (2, 3):
            raise ConfigError("dim must be 2 or 3")
        if self.method not in ("direct", "iterative"):
            raise ConfigError("method must be 'direct' or 'iterative'")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")


DEFAULT_LEVELS = {"solve": (16,), "converge": TABLE_LEVELS, "sweep-slip": TABLE_LEVELS,
                  "estimate-constants": (8, 16)}


def build_spec(command: str, values: dict) -> RunSpec:
    """Defaults, overridden by ``values`` (already merged file + flags)."""
    kw = {k: v for k, v in values.items() if v is not None}
    if command == "patch-test":
        kw.setdefault("case", BuiltinCase.PATCH_CONSTANT_FLOW.value)
    if "mesh" not in kw:
        kw.setdefault("levels", DEFAULT_LEVELS.get(command, ()))
    kw.pop("config", None)
    return RunSpec(command=command, **kw)


# -- helpers -----------------------------------------------------------------------

def _dim_of(spec: RunSpec) -> int:
    if spec.case in (BuiltinCase.PATCH_AFFINE_3D.value, BuiltinCase.CYLINDER3D.value):
        return 3
    if spec.case in (BuiltinCase.CAVITY2D.value, BuiltinCase.MANUFACTURED_PRESSURE_2D.value,
                     BuiltinCase.NACA2D.value):
        return 2
    return spec.dim


def _mesh_factory(spec: RunSpec):
    if spec.mesh is not None:
        path = spec.mesh
        return lambda _n: load_mesh(path, reorient=True)
    name = BuiltinCase(spec.case)
    if name in (BuiltinCase.CAVITY2D, BuiltinCase.MANUFACTURED_PRESSURE_2D):
        return cavity_mesh
    if name in (BuiltinCase.PATCH_CONSTANT_FLOW, BuiltinCase.PATCH_AFFINE_3D):
        d = _dim_of(spec)
        return lambda n: patch_mesh(d, n)
    raise ConfigError(f"case {spec.case} needs a user mesh (--mesh)")


def _case(spec: RunSpec):
    return get_case(spec.case, _dim_of(spec), spec.nu)


def _nu(spec: RunSpec, case) -> float:
    if spec.nu is not None:
        return spec.nu
    return case.nu if case.nu is not None else 1.0


def resolve_config(spec: RunSpec, mesh, spaces, theta=None, gamma0=None, nu=None):
    """ProblemConfig for one mesh, resolving ``auto`` parameters; also returns constants."""
    theta = spec.theta if theta is None else theta
    gamma0 = spec.gamma0 if gamma0 is None else gamma0
    est = None
    beta = spec.beta
    if beta == AUTO or gamma0 == AUTO:
        est = estimate_constants(mesh, spaces.pressure)
        auto_beta, auto_gamma = select_parameters(
            theta, est, DEFAULT_GAMMA0 if gamma0 == AUTO else gamma0)
        beta = auto_beta if beta == AUTO else beta
        gamma0 = auto_gamma if gamma0 == AUTO else gamma0
    cfg = ProblemConfig(nu=nu, theta=theta, gamma0=float(gamma0), beta=float(beta),
                        degree=spec.degree)
    return cfg, est


def _clean(value):
    """JSON-ready copy with floats rounded to 12 significant digits."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return float(f"{v:.12g}") if np.isfinite(v) else str(v)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    return value


def _config_dict(cfg: ProblemConfig) -> dict:
    return asdict(cfg)


def _constants_dict(est):
    return None if est is None else {"C_in": est.C_in, "C_tr": est.C_tr}


def _spec_dict(spec: RunSpec) -> dict:
    d = asdict(spec)
    d.pop("extras")
    d.pop("jobs")  # parallelism does not change results
    d.pop("out")  # the report lives there; keeps reports comparable across directories
    return d


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(_clean(payload), indent=2, sort_keys=True) + "\n")


class Outputs:
    def __init__(self, spec: RunSpec):
        self.dir = Path(spec.out)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.files = []
        self.timings = {}

    def path(self, name: str) -> Path:
        self.files.append(name)
        return self.dir / name

    def finish(self, spec: RunSpec, payload: dict, ok: bool) -> int:
        payload = dict(payload)
        payload.update(command=spec.command, spec=_spec_dict(spec), status="ok" if ok else
                       "failed", version=__version__)
        payload["artifacts"] = sorted(set(self.files) | {"report.json", "timings.json"})
        _write_json(self.dir / "report.json", payload)
        _write_json(self.dir / "timings.json", self.timings)
        return 0 if ok else 1


def _level_record(n, mesh, cfg, est, sol, rep=None):
    rec = {"n": n, "h": mesh.h, "n_cells": mesh.n_cells, "n_unknowns": sol.system.size,
           "config": _config_dict(cfg), "constants": _constants_dict(est),
           "solver": {"method": sol.report.method, "residual": sol.report.residual,
                      "iterations": sol.report.iterations,
                      "refinement_steps": sol.report.refinement_steps,
                      "converged": sol.report.converged}}
    if rep is not None:
        rec["errors"] = {"err_p_L2": rep.err_p_L2, "err_u_L2": rep.err_u_L2,
                         "err_u_H1": rep.err_u_H1, "slip_violation": rep.slip_violation}
    return rec


# -- subcommands ----------------------------------------------------------------------

def cmd_solve(spec: RunSpec) -> int:
    out = Outputs(spec)
    case = _case(spec)
    nu = _nu(spec, case)
    factory = _mesh_factory(spec)
    n = spec.levels[0] if spec.levels else None
    t0 = time.perf_counter()
    mesh = factory(n)
    spaces = make_spaces(mesh, spec.degree)
    cfg, est = resolve_config(spec, mesh, spaces, nu=nu)
    try:
        sol = solve_stokes(mesh, cfg, case, spaces, method=spec.method, tol=min(spec.tol, 1e-10))
    except SingularSystemError as exc:
        out.timings["total"] = time.perf_counter() - t0
        return out.finish(spec, {"error": str(exc), "pivot": exc.pivot}, False)
    rep = error_norms(case.exact, sol.velocity, sol.pressure, case.g) if case.exact else None
    rec = _level_record(n, mesh, cfg, est, sol, rep)
    if rep is None and mesh.facets_with(BoundaryTag.SLIP).size:
        rec["errors"] = {"slip_violation": slip_violation(sol.velocity, case.g)}
    if case.name == "cavity2d":
        rec["note"] = "exact pressure is zero; the pressure error is the discrete pressure itself"
    if spec.vtk:
        write_vtk(out.path("solution.vtk"), sol.velocity, sol.pressure, title=case.name)
    out.timings["total"] = time.perf_counter() - t0
    out.timings["solve"] = sol.report.wall_time
    ok = sol.report.residual <= spec.tol
    return out.finish(spec, {"case": case.name, "seed": spec.seed, "levels": [rec]}, ok)


def cmd_converge(spec: RunSpec) -> int:
    out = Outputs(spec)
    case = _case(spec)
    if case.exact is None:
        raise ConfigError(f"case {spec.case} has no exact solution to converge to")
    nu = _nu(spec, case)
    factory = _mesh_factory(spec)
    levels = spec.levels
    if len(levels) < 2:
        raise ConfigError("converge needs at least two generator levels")
    base = ProblemConfig(nu=nu, theta=spec.theta,
                         gamma0=DEFAULT_GAMMA0 if spec.gamma0 == AUTO else spec.gamma0,
                         beta=1.0 if spec.beta == AUTO else spec.beta, degree=spec.degree)
    records, stamps = [], {}
    t0 = time.perf_counter()

    def record(n, mesh, sol, rep):
        est = estimate_constants(mesh, sol.system.spaces.pressure) \
            if AUTO in (spec.beta, spec.gamma0) else None
        records.append(_level_record(n, mesh, sol.config, est, sol, rep))
        stamps[f"n={n}"] = sol.report.wall_time
        if spec.vtk and n == levels[-1]:
            write_vtk(out.path("solution.vtk"), sol.velocity, sol.pressure, title=case.name)

    study = convergence_study(case, base, levels, factory, auto_beta=spec.beta == AUTO,
                              auto_gamma0=spec.gamma0 == AUTO, residual_tol=spec.tol,
                              on_level=record)
    out.path("convergence.csv").write_text(study.to_csv())
    out.timings.update(stamps, total=time.perf_counter() - t0)
    payload = {"case": case.name, "seed": spec.seed, "levels": records,
               "csv_columns": list(CSV_COLUMNS),
               "orders": [r.orders for r in study.reports]}
    if case.name == "cavity2d":
        payload["note"] = "exact pressure is zero; the pressure error is the discrete pressure"
    return out.finish(spec, payload, not study.failed and len(study.reports) == len(levels))


def cmd_patch_test(spec: RunSpec) -> int:
    out = Outputs(spec)
    d = _dim_of(spec)
    case = get_case(spec.case, d, spec.nu)
    nu = _nu(spec, case)
    n = spec.levels[0] if spec.levels else (4 if d == 2 else 2)
    mesh = _mesh_factory(spec)(n)
    thetas = (spec.theta,) if spec.extras.get("theta_given") else (-1, 0, 1)
    results, ok = [], True
    t0 = time.perf_counter()
    for theta in thetas:
        spaces = make_spaces(mesh, spec.degree)
        cfg, est = resolve_config(spec, mesh, spaces, theta=theta, nu=nu)
        sol = solve_stokes(mesh, cfg, case, spaces, method=spec.method, tol=min(spec.tol, 1e-10))
        exact = interpolate(spaces.velocity, case.exact.u)
        err = float(np.max(np.abs(sol.velocity.coefficients - exact.coefficients)))
        passed = err <= PATCH_TOL and sol.report.residual <= spec.tol
        ok &= passed
        results.append({"theta": theta, "config": _config_dict(cfg),
                        "max_dof_error": err, "residual": sol.report.residual,
                        "passed": passed})
        out.timings[f"theta={theta}"] = sol.report.wall_time
    out.timings["total"] = time.perf_counter() - t0
    return out.finish(spec, {"case": case.name, "dim": d, "n": n, "h": mesh.h,
                             "tolerance": PATCH_TOL, "results": results}, ok)


def cmd_estimate_constants(spec: RunSpec) -> int:
    out = Outputs(spec)
    factory = _mesh_factory(spec)
    case = _case(spec) if spec.mesh is None else None
    nu = spec.nu if spec.nu is not None else (case.nu if case and case.nu else 1.0)
    levels = spec.levels or (None,)
    records = []
    t0 = time.perf_counter()
    for n in levels:
        mesh = factory(n)
        spaces = make_spaces(mesh, spec.degree)
        est = estimate_constants(mesh, spaces.pressure)
        beta, gamma0 = select_parameters(
            spec.theta, est, DEFAULT_GAMMA0 if spec.gamma0 == AUTO else spec.gamma0)
        cfg = ProblemConfig(nu=nu, theta=spec.theta, gamma0=gamma0, beta=beta,
                            degree=spec.degree)
        probe = coercivity_probe(mesh, spaces, cfg, spec.samples, spec.seed) \
            if spec.samples > 0 else None
        records.append({"n": n, "h": mesh.h, "C_in": est.C_in, "C_tr": est.C_tr,
                        "beta": beta, "gamma0": gamma0, "coercivity_min": probe})
    out.timings["total"] = time.perf_counter() - t0
    payload = {"seed": spec.seed, "samples": spec.samples, "levels": records,
               "C_in": records[-1]["C_in"], "C_tr": records[-1]["C_tr"]}
    ok = all(r["coercivity_min"] is None or r["coercivity_min"] > 0 for r in records)
    return out.finish(spec, payload, ok)


def _sweep_job(args):
    spec, theta, gamma0 = args
    case = _case(spec)
    nu = _nu(spec, case)
    factory = _mesh_factory(spec)
    rows = []
    for n in spec.levels or (None,):
        mesh = factory(n)
        spaces = make_spaces(mesh, spec.degree)
        cfg, est = resolve_config(spec, mesh, spaces, theta=theta, gamma0=gamma0, nu=nu)
        sol = solve_stokes(mesh, cfg, case, spaces, method=spec.method, tol=min(spec.tol, 1e-10))
        rows.append({"theta": theta, "gamma0": gamma0, "n": n, "h": mesh.h,
                     "beta": cfg.beta, "slip_violation": slip_violation(sol.velocity, case.g),
                     "residual": sol.report.residual, "wall_time": sol.report.wall_time})
    return rows


def cmd_sweep_slip(spec: RunSpec) -> int:
    out = Outputs(spec)
    jobs = [(spec, t, g) for t in spec.thetas for g in spec.gamma0s]
    t0 = time.perf_counter()
    if spec.jobs > 1:
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            results = list(pool.map(_sweep_job, jobs))  # merged in job order
    else:
        results = [_sweep_job(j) for j in jobs]
    rows = [r for block in results for r in block]
    for r in rows:
        out.timings[f"theta={r['theta']},gamma0={r['gamma0']:g},n={r['n']}"] = r.pop("wall_time")
    out.timings["total"] = time.perf_counter() - t0
    lines = ["theta,gamma0,h,beta,slip_violation"]
    lines += [f"{r['theta']},{r['gamma0']:.6g},{r['h']:.6g},{r['beta']:.6g},"
              f"{r['slip_violation']:.6g}" for r in rows]
    out.path("slip_sweep.csv").write_text("\n".join(lines) + "\n")
    ok = all(r["residual"] <= spec.tol for r in rows)
    return out.finish(spec, {"case": spec.case, "rows": rows}, ok)


HANDLERS = {"solve": cmd_solve, "converge": cmd_converge, "patch-test": cmd_patch_test,
            "estimate-constants": cmd_estimate_constants, "sweep-slip": cmd_sweep_slip}


def run(spec: RunSpec) -> int:
    """Execute a resolved run; returns the process exit code."""
    return HANDLERS[spec.command](spec)


# -- argument parsing -----------------------------------------------------------------

def _argtype(key):
    def conv(text):
        try:
            return CONVERTERS[key](text)
        except (TypeError, ValueError) as exc:
            raise argparse.ArgumentTypeError(str(exc)) from exc
    conv.__name__ = key
    return conv


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    S = argparse.SUPPRESS
    common.add_argument("--config", metavar="PATH", default=S,
                        help="key = value file; explicit flags take precedence")
    common.add_argument("--case", type=_argtype("case"), default=S,
                        help="built-in case: " + ", ".join(c.value for c in BuiltinCase))
    common.add_argument("--mesh", metavar="PATH", default=S, help="mesh file instead of levels")
    common.add_argument("--levels", type=_argtype("levels"), default=S, metavar="N,N,...",
                        help="generator levels (cells per side)")
    common.add_argument("--theta", type=_argtype("theta"), default=S, metavar="{-1,0,1}")
    common.add_argument("--gamma0", type=_argtype("gamma0"), default=S, metavar="REAL|auto")
    common.add_argument("--beta", type=_argtype("beta"), default=S, metavar="REAL|auto")
    common.add_argument("--degree", type=_argtype("degree"), default=S, metavar="{1,2}")
    common.add_argument("--nu", type=_argtype("nu"), default=S)
    common.add_argument("--dim", type=_argtype("dim"), default=S, help="dimension of patch cases")
    common.add_argument("--out", default=S, metavar="DIR", help="output directory")
    common.add_argument("--seed", type=_argtype("seed"), default=S)
    common.add_argument("--tol", type=_argtype("tol"), default=S,
                        help="residual tolerance deciding the exit code")
    common.add_argument("--method", choices=("direct", "iterative"), default=S)
    common.add_argument("--jobs", type=_argtype("jobs"), default=S,
                        help="worker processes for sweeps")
    common.add_argument("--samples", type=_argtype("samples"), default=S,
                        help="coercivity probe samples")
    common.add_argument("--thetas", type=_argtype("thetas"), default=S,
                        help="sweep values, e.g. --thetas=-1,1")
    common.add_argument("--gamma0s", type=_argtype("gamma0s"), default=S)
    common.add_argument("--no-vtk", dest="vtk", action="store_false", default=S)
    common.add_argument("-v", "--verbose", action="store_true", default=S)

    parser = argparse.ArgumentParser(prog="slipstokes", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    helps = {"solve": "solve one case on one mesh",
             "converge": "error table over mesh levels (CSV)",
             "patch-test": "exactness check for flows in the discrete space",
             "estimate-constants": "inverse/trace constants, parameters, coercivity probe",
             "sweep-slip": "slip violation over theta, gamma0 and mesh levels"}
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    ns = vars(parser.parse_args(argv))
    command = ns.pop("command")
    verbose = ns.pop("verbose", False)
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        values = parse_config_file(ns["config"]) if "config" in ns else {}
        values.update(ns)
        if "mesh" in ns and "levels" not in ns:
            values.pop("levels", None)
        if "levels" in ns and "mesh" not in ns:
            values.pop("mesh", None)
        spec = build_spec(command, values)
        spec.extras["theta_given"] = "theta" in values
        return run(spec)
    except (ConfigError, MeshError) as exc:
        print(f"slipstokes: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"slipstokes: I/O error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
