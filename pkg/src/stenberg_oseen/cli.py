"""Command-line driver: ``stenberg-oseen {solve,study,audit,dofs}``.

Parameters come from an optional JSON config file (validated against
``CONFIG_SCHEMA``; unknown keys are rejected) and are overridden by flags.
Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields, replace
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .analysis import (
    StudyConfig,
    StudyError,
    check_complex_exactness,
    dof_comparison,
    infsup_on_mesh,
    interpolate_exact,
    run_convergence_study,
    solve_on_mesh,
)
from .mesh import MeshError, mesh_metrics
from .solver import SolverError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

_int_or_null = {"type": ["integer", "null"], "minimum": 1, "maximum": 20}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "problem": {"enum": ["paper-benchmark", "polynomial-mms"]},
        "nu": {"type": "number", "exclusiveMinimum": 0},
        "k": {"type": "integer", "minimum": 2, "maximum": 6},
        "levels": {"type": "integer", "minimum": 1},
        "level": {"type": "integer", "minimum": 1},
        "n0": {"type": "integer", "minimum": 1},
        "perturb": {"type": "number", "minimum": 0, "maximum": 0.3},
        "seed": {"type": "integer"},
        "sigma": {"oneOf": [{"const": "auto"}, {"type": "number", "exclusiveMinimum": 0}]},
        "delta0": {"type": "number", "minimum": 0},
        "delta0_sweep": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
        "convection": {"enum": ["upwind", "central", "none"]},
        "vorticity": {"type": "boolean"},
        "quad_degree": _int_or_null,
        "facet_quad_degree": _int_or_null,
        "mesh_file": {"type": ["string", "null"]},
        "drop_interior": {"type": "boolean"},
        "infsup_levels": {"type": "integer", "minimum": 0},
        "out": {"type": ["string", "null"]},
    },
}

# keys consumed by the driver rather than StudyConfig
DRIVER_KEYS = ("level", "delta0_sweep", "drop_interior", "infsup_levels", "out")
DRIVER_DEFAULTS = {"level": None, "delta0_sweep": None, "drop_interior": False, "infsup_levels": 3, "out": None}


class ConfigError(ValueError):
    pass


def _schema_message(err: jsonschema.ValidationError) -> str:
    where = ".".join(str(p) for p in err.absolute_path) or "config"
    if err.validator == "minimum":
        return f"{where} must be >= {err.validator_value}, got {err.instance}"
    if err.validator == "additionalProperties":
        return f"unknown key(s): {err.message}"
    return f"{where}: {err.message}"


def _flag_overrides(args) -> dict:
    out = {}
    for key in ("nu", "k", "levels", "level", "n0", "perturb", "seed", "delta0", "convection", "out", "problem", "mesh_file"):
        val = getattr(args, key, None)
        if val is not None:
            out[key] = val
    if getattr(args, "sigma", None) is not None:
        out["sigma"] = args.sigma if args.sigma == "auto" else _parse_float(args.sigma, "sigma")
    if getattr(args, "no_vorticity", False):
        out["vorticity"] = False
    if getattr(args, "quad_degree", None) is not None:
        out["quad_degree"] = args.quad_degree
    if getattr(args, "facet_quad_degree", None) is not None:
        out["facet_quad_degree"] = args.facet_quad_degree
    if getattr(args, "delta0_sweep", None):
        out["delta0_sweep"] = [_parse_float(v, "delta0-sweep") for v in args.delta0_sweep.split(",")]
    if getattr(args, "drop_interior", False):
        out["drop_interior"] = True
    if getattr(args, "infsup_levels", None) is not None:
        out["infsup_levels"] = args.infsup_levels
    return out


def _parse_float(text: str, name: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{name} must be a number, got {text!r}") from None


def resolve_config(args) -> tuple[StudyConfig, dict]:
    """Merge the config file and flags, validate, and split driver options."""
    raw = {}
    if args.config:
        try:
            raw = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config file must contain a JSON object")
    raw.update(_flag_overrides(args))
    errors = sorted(jsonschema.Draft7Validator(CONFIG_SCHEMA).iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        raise ConfigError("; ".join(_schema_message(e) for e in errors))
    driver = {k: raw.pop(k, DRIVER_DEFAULTS[k]) for k in DRIVER_KEYS}
    if raw.get("sigma") == "auto":
        raw["sigma"] = None
    known = {f.name for f in fields(StudyConfig)}
    try:
        cfg = StudyConfig(**{k: v for k, v in raw.items() if k in known})
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.mesh_file is not None and not Path(cfg.mesh_file).is_file():
        raise ConfigError(f"mesh file not found: {cfg.mesh_file}")
    return cfg, driver


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _header(cfg: StudyConfig, driver: dict, command: str) -> str:
    extra = {k: v for k, v in driver.items() if v not in (None, False) and k != "out"}
    if command != "audit":
        extra.pop("infsup_levels", None)
    payload = {**cfg.resolved(), **extra, "command": command, "version": __version__}
    return "# config: " + json.dumps(payload, sort_keys=True) + "\n"


# -- commands --------------------------------------------------------------

def cmd_solve(cfg: StudyConfig, driver: dict) -> int:
    level = driver["level"] or cfg.levels
    mesh = cfg.meshes(level)[-1]
    solution = cfg.solution()
    res = solve_on_mesh(mesh, solution, cfg.params(), level)
    h, min_angle, _ = mesh_metrics(mesh)
    lines = [_header(cfg, driver, "solve").rstrip("\n")]
    lines.append(f"level {level}: h={h:.6e} nt={mesh.nt} min_angle={np.degrees(min_angle):.2f}deg")
    rep = res.report
    lines.append(f"unknowns {rep.n_unknowns} (velocity {res.V.n_free}, pressure {res.Q.ndof}) nnz {rep.nnz}")
    lines.append(f"solver {rep.method}: residual {rep.residual:.3e} multiplier {rep.lagrange_multiplier:.3e} time {rep.seconds:.2f}s")
    e = res.errors
    lines.append(
        f"errors: energy {e.energy:.6e} l2u {e.l2u:.6e} divu {e.divu:.6e} linfu {e.linfu:.6e} "
        f"l2p {e.l2p:.6e} l2p_proj {e.l2p_proj:.6e}"
    )
    if cfg.problem == "polynomial-mms":
        ui, pi = interpolate_exact(res.V, res.Q, solution, cfg.params())
        cu = float(np.abs(res.u - ui).max())
        cp = float(np.abs(res.p - pi).max())
        lines.append(f"consistency: max coefficient error u {cu:.3e} p {cp:.3e}")
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if driver["out"]:
        np.savez(
            driver["out"], u=res.u, p=res.p, vertices=mesh.vertices, triangles=mesh.triangles,
            header=np.array(_header(cfg, driver, "solve")),
        )
    return EXIT_OK


def cmd_study(cfg: StudyConfig, driver: dict) -> int:
    sweep = driver["delta0_sweep"]
    if sweep:
        rows = ["delta0,level,h,energy,l2u"]
        for d0 in sweep:
            table = run_convergence_study(replace(cfg, delta0=d0))
            for lv, h, e in zip(table.levels, table.h, table.errors):
                rows.append(f"{d0:.3e},{lv},{h:.6e},{e.energy:.6e},{e.l2u:.6e}")
        _emit(_header(cfg, driver, "study") + "\n".join(rows) + "\n", driver["out"])
        return EXIT_OK

    def progress(res):
        logging.getLogger(__name__).info("finished level %d", res.level)

    try:
        table = run_convergence_study(cfg, on_level=progress)
    except StudyError as exc:
        table = exc.table
        table.header = _header(cfg, driver, "study").rstrip("\n")
        sys.stderr.write(f"error: {exc}\n")
        _emit(table.to_csv(), driver["out"])
        return EXIT_NUMERIC
    table.header = _header(cfg, driver, "study").rstrip("\n")
    _emit(table.to_csv(), driver["out"])
    if driver["out"]:
        sys.stdout.write(table.format() + "\n")
    return EXIT_OK


def cmd_audit(cfg: StudyConfig, driver: dict) -> int:
    meshes = cfg.meshes()
    lines = [_header(cfg, driver, "audit").rstrip("\n"), "exactness:"]
    ok = True
    for lv, mesh in enumerate(meshes, start=1):
        rep = check_complex_exactness(mesh, cfg.k, drop_interior=driver["drop_interior"])
        ok &= rep.exact
        lines.append(f"  level {lv}: {rep.summary()} exact={rep.exact}")
    nis = min(driver["infsup_levels"], len(meshes))
    if nis:
        lines.append("inf-sup (|.|_1,h velocity norm):")
        betas = []
        for lv, mesh in enumerate(meshes[:nis], start=1):
            try:
                beta, method, nv, npr = infsup_on_mesh(mesh, cfg.k, drop_interior=driver["drop_interior"])
            except RuntimeError:
                beta, method, nv, npr = 0.0, "singular", -1, -1
            betas.append(beta)
            lines.append(f"  level {lv}: h={mesh.h:.4e} dimV={nv} dimQ={npr} beta={beta:.6f} [{method}]")
        positive = min(betas) > 0
        ratio = max(betas) / min(betas) if positive else float("inf")
        lines.append(f"  beta>0: {positive}  max/min ratio: {ratio:.4f}  ratio<2: {ratio < 2}")
        ok &= positive and ratio < 2
    lines.append(f"verdict: {'PASS' if ok else 'FAIL'}")
    _emit("\n".join(lines) + "\n", driver["out"])
    return EXIT_OK if ok else EXIT_NUMERIC


def cmd_dofs(cfg: StudyConfig, driver: dict, args) -> int:
    if args.counts:
        stats = [tuple(args.counts)]
    else:
        stats = [(m.nv, m.ne, m.nt) for m in cfg.meshes()]
    rows = ["level,nv,ne,nt,k,stenberg_u,pressure,stenberg_total,bdm_u,bdm_total,ratio"]
    for lv, (nv, ne, nt) in enumerate(stats, start=1):
        d = dof_comparison(nv, ne, nt, cfg.k)
        rows.append(
            f"{lv},{nv},{ne},{nt},{cfg.k},{d.stenberg},{d.pressure},{d.stenberg_total},"
            f"{d.bdm},{d.bdm_total},{d.ratio:.4f}"
        )
    _emit(_header(cfg, driver, "dofs") + "\n".join(rows) + "\n", driver["out"])
    return EXIT_OK


# -- argument parsing ------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON config file")
    common.add_argument("--problem", choices=["paper-benchmark", "polynomial-mms"])
    common.add_argument("--nu", type=float)
    common.add_argument("--k", type=int)
    common.add_argument("--levels", type=int, help="number of mesh levels")
    common.add_argument("--n0", type=int, help="subdivisions per side on level 1")
    common.add_argument("--perturb", type=float)
    common.add_argument("--seed", type=int)
    common.add_argument("--sigma", help='penalty, or "auto" for 6(k+1)(k+2)/2')
    common.add_argument("--delta0", type=float)
    common.add_argument("--convection", choices=["upwind", "central", "none"])
    common.add_argument("--no-vorticity", action="store_true")
    common.add_argument("--quad-degree", type=int)
    common.add_argument("--facet-quad-degree", type=int)
    common.add_argument("--mesh-file", metavar="PATH", help="level-1 mesh in text format")
    common.add_argument("--out", metavar="PATH")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="stenberg-oseen", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("solve", parents=[common], help="solve on one mesh level")
    p.add_argument("--level", type=int, help="mesh level to solve on (default: --levels)")
    p = sub.add_parser("study", parents=[common], help="convergence table as CSV")
    p.add_argument("--delta0-sweep", metavar="LIST", help="comma-separated delta0 values")
    p = sub.add_parser("audit", parents=[common], help="complex exactness and inf-sup audit")
    p.add_argument("--drop-interior", action="store_true", help="remove interior velocity DOFs (negative control)")
    p.add_argument("--infsup-levels", type=int, help="levels included in the inf-sup table (default 3)")
    p = sub.add_parser("dofs", parents=[common], help="Stenberg vs BDM DOF counts")
    p.add_argument("--counts", type=int, nargs=3, metavar=("NV", "NE", "NT"), help="mesh statistics instead of generated meshes")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg, driver = resolve_config(args)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG
    try:
        if args.command == "solve":
            return cmd_solve(cfg, driver)
        if args.command == "study":
            return cmd_study(cfg, driver)
        if args.command == "audit":
            return cmd_audit(cfg, driver)
        return cmd_dofs(cfg, driver, args)
    except (MeshError, OSError) as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG
    except (SolverError, RuntimeError, np.linalg.LinAlgError, ArithmeticError) as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
