"""Command-line experiments: ``sonicflow <command> --config cfg.json --out dir``.

Exit codes: 0 success, 1 configuration error, 2 failed check, 3 solver stall.
"""
from __future__ import annotations

import argparse
import copy
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import gasdyn, hopf, linop, pde2d
from .errors import InvalidParameter, SonicFlowError
from .gasdyn import GasModel
from .grid import StripGrid, lift_symmetric
from .nozzle import make_profile
from .symmetric import build_symmetric_flow

log = logging.getLogger("sonicflow")

KINDS = ("symmetric", "solve", "verify", "perturb", "hopf-gallery")
ENTRY_KINDS = ("symmetric", "sin", "sin2")

DEFAULTS = {
    "gas": {"gamma": 1.4, "c0": 1.2},
    "nozzle": {"a": 0.25, "p": 2.0},
    "grid": {"nx": 65, "ny": 32},
    "solver": {"eps0": 1e-1, "eps_factor": 0.5, "eps_min": 1e-3, "newton_tol": 1e-9,
               "max_newton": 50, "damping_min": 2.0**-10},
    "experiment": {"kind": "solve", "delta": 0.0, "seed": 0, "init_delta": 0.0,
                   "entry": "symmetric", "grids": None},
}

# stations per grid interval when lifting the symmetric potential
LIFT_REFINE = 16


class ConfigError(Exception):
    pass


def load_config(source=None, overrides: dict | None = None) -> dict:
    """Merge a JSON config (path, dict or None) over the defaults.

    Unknown keys anywhere are rejected.
    """
    cfg = copy.deepcopy(DEFAULTS)
    if source is None:
        user = {}
    elif isinstance(source, dict):
        user = source
    else:
        try:
            user = json.loads(Path(source).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {source}: {exc}") from exc
    if not isinstance(user, dict):
        raise ConfigError("config must be a JSON object")
    for section, body in user.items():
        if section not in cfg:
            raise ConfigError(f"unknown config section {section!r}")
        if not isinstance(body, dict):
            raise ConfigError(f"section {section!r} must be an object")
        for key, val in body.items():
            if key not in cfg[section]:
                raise ConfigError(f"unknown key {section}.{key}")
            cfg[section][key] = val
    _validate(cfg)  # the file on its own must be valid, whatever the overrides
    for (section, key), val in (overrides or {}).items():
        cfg[section][key] = val
    _validate(cfg)
    return cfg


def _validate(cfg: dict) -> None:
    ex = cfg["experiment"]
    if ex["kind"] not in KINDS:
        raise ConfigError(f"experiment.kind must be one of {KINDS}")
    if ex["entry"] not in ENTRY_KINDS:
        raise ConfigError(f"experiment.entry must be one of {ENTRY_KINDS}")
    if not isinstance(ex["seed"], int):
        raise ConfigError("experiment.seed must be an integer")
    if ex["delta"] < 0 or ex["init_delta"] < 0:
        raise ConfigError("perturbation amplitudes must be >= 0")
    try:
        gas_of(cfg)
        make_profile(cfg["nozzle"]["a"], cfg["nozzle"]["p"])
        solver_of(cfg)
    except InvalidParameter as exc:
        raise ConfigError(str(exc)) from exc
    except SonicFlowError as exc:
        raise ConfigError(str(exc)) from exc
    for nx, ny in grids_of(cfg):
        if not (isinstance(nx, int) and isinstance(ny, int)) or nx < 2 or ny < 4:
            raise ConfigError(f"invalid grid {nx}x{ny}")


def gas_of(cfg) -> GasModel:
    return GasModel(float(cfg["gas"]["gamma"]), float(cfg["gas"]["c0"]))


def profile_of(cfg):
    return make_profile(float(cfg["nozzle"]["a"]), float(cfg["nozzle"]["p"]))


def solver_of(cfg) -> pde2d.SolverConfig:
    s = cfg["solver"]
    return pde2d.SolverConfig(float(s["eps0"]), float(s["eps_factor"]), float(s["eps_min"]),
                              float(s["newton_tol"]), int(s["max_newton"]), float(s["damping_min"]))


def grids_of(cfg) -> list[tuple[int, int]]:
    g = cfg["experiment"]["grids"]
    if g is None:
        return [(cfg["grid"]["nx"], cfg["grid"]["ny"])]
    return [tuple(pair) for pair in g]


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


# ----------------------------------------------------------------- commands

def run_symmetric(cfg: dict, out: Path) -> int:
    gas, profile = gas_of(cfg), profile_of(cfg)
    stations = int(cfg["grid"]["nx"])
    flow = build_symmetric_flow(gas, profile, stations)
    flow.to_csv(out / "symmetric.csv")
    b0 = gasdyn.entry_speed(gas, profile.n0)
    flux = profile.n(flow.xs) * flow.rho * flow.u
    checks = {
        "flux_conserved": bool(np.max(np.abs(flux / flow.m - 1.0)) <= 1e-10),
        "accelerating": bool(np.all(np.diff(flow.u) > 0.0)),
        "subsonic_interior": bool(np.all(flow.mach[:-1] < 1.0)),
        "sonic_exit": bool(abs(flow.mach[-1] - 1.0) <= 1e-6),
        "entry_matches_b0": bool(abs(flow.u[0] - b0) <= 1e-10),
    }
    _write_json(out / "symmetric.json", {
        "b0": b0, "b1": gasdyn.sonic_speed(gas).b1, "mass_flux": flow.m,
        "stations": stations, "checks": checks,
    })
    return 0 if all(checks.values()) else 2


def _entry_data(cfg, gas, profile):
    ex = cfg["experiment"]
    if ex["entry"] == "symmetric" or ex["delta"] == 0:
        return pde2d.BoundaryData.symmetric(gas, profile)
    return pde2d.BoundaryData.perturbed(gas, profile, float(ex["delta"]), ex["entry"])


def _solve_on(cfg, nx, ny, data, init_delta=0.0):
    gas, profile = gas_of(cfg), profile_of(cfg)
    grid = StripGrid(nx, ny)
    flow = build_symmetric_flow(gas, profile, LIFT_REFINE * (nx - 1) + 1)
    guess = lift_symmetric(flow, grid)
    if init_delta > 0:
        guess = guess + pde2d.smooth_perturbation(grid, init_delta, cfg["experiment"]["seed"])
    report = pde2d.newton_solve(guess, gas, profile, grid, data, solver_of(cfg),
                                log=log.debug)
    return report, flow


def _sign_reports(report, flow, cfg):
    gas, profile = gas_of(cfg), profile_of(cfg)
    coeffs = linop.assemble_linearized(report.solution, flow, gas, profile)
    drift = linop.check_exit_drift_sign(coeffs)
    key = linop.check_key_inequality(report.solution, gas)
    return coeffs, [drift, key]


def run_solve(cfg: dict, out: Path) -> int:
    gas, profile = gas_of(cfg), profile_of(cfg)
    nx, ny = int(cfg["grid"]["nx"]), int(cfg["grid"]["ny"])
    data = _entry_data(cfg, gas, profile)
    report, flow = _solve_on(cfg, nx, ny, data, float(cfg["experiment"]["init_delta"]))
    report.solution.to_csv(out / "solution.csv")
    report.mach_field.to_csv(out / "mach.csv")
    _, signs = _sign_reports(report, flow, cfg)
    payload = report.to_dict()
    payload["sign_checks"] = [s.to_dict() for s in signs]
    _write_json(out / "report.json", payload)
    if not report.converged:
        log.warning("solver stalled: %s", report.stall_reason)
        return 3
    return 0 if all(s.passed for s in signs) else 2


def run_verify(cfg: dict, out: Path) -> int:
    """Solve the symmetric problem and check every sign condition on it."""
    gas, profile = gas_of(cfg), profile_of(cfg)
    nx, ny = int(cfg["grid"]["nx"]), int(cfg["grid"]["ny"])
    report, flow = _solve_on(cfg, nx, ny, pde2d.BoundaryData.symmetric(gas, profile))
    if not report.converged:
        _write_json(out / "verify.json", {"solve": report.to_dict()})
        return 3
    coeffs, signs = _sign_reports(report, flow, cfg)
    closed = linop.closed_form_exit_drift(gas, profile)
    exit_b1 = coeffs.b1.values[-1]
    heat = linop.heat_structure(coeffs, gas)
    op, patch = linop.exit_operator(gas, profile)
    hrep = hopf.analyze(op, patch)
    oblique = linop.oblique_vectors(report.solution, gas, profile)
    checks = {
        "a12_zero": bool(np.all(coeffs.a12.values == 0.0)),
        "exit_drift_negative": signs[0].passed,
        "exit_drift_matches_closed_form": bool(
            np.max(np.abs(exit_b1 / closed - 1.0)) <= 0.1),
        "key_inequality": signs[1].passed,
        "heat_structure": bool(heat["ok"]),
        "oblique_boundary_conditions": oblique.oblique,
        "hopf_condition_positive": hrep.condition_value > 0.0,
        "barrier_ok": bool(hrep.barrier_ok),
    }
    _write_json(out / "verify.json", {
        "solve": report.to_dict(),
        "sign_checks": [s.to_dict() for s in signs],
        "closed_form_exit_drift": closed,
        "exit_drift_range": [float(exit_b1.min()), float(exit_b1.max())],
        "heat_structure": heat,
        "hopf_exit": hrep.to_dict(),
        "checks": checks,
    })
    return 0 if all(checks.values()) else 2


def perturb_sweep(cfg: dict) -> list[dict]:
    gas, profile = gas_of(cfg), profile_of(cfg)
    ex = cfg["experiment"]
    delta = float(ex["delta"])
    kind = "sin" if ex["entry"] == "symmetric" else ex["entry"]
    deltas = sorted({delta / 4, delta / 2, delta})
    rows = []
    for nx, ny in grids_of(cfg):
        for d in deltas:
            data = (pde2d.BoundaryData.symmetric(gas, profile) if d == 0
                    else pde2d.BoundaryData.perturbed(gas, profile, d, kind))
            report, _ = _solve_on(cfg, nx, ny, data)
            floor = report.residual_history[-1] if report.residual_history else float("nan")
            rows.append({
                "grid": [nx, ny],
                "entry": kind,
                "delta": d,
                "converged": report.converged,
                "final_eps": report.final_eps,
                "stall_reason": report.stall_reason,
                "max_interior_mach": report.max_interior_mach,
                "residual_floor": floor,
                "displaced_entry_residual": report.gauge_row_residual,
                "nonexistence_indicator": (not report.converged) or report.max_interior_mach >= 1.0,
            })
            log.info("grid %dx%d delta=%g converged=%s", nx, ny, d, report.converged)
    return rows


def run_perturb(cfg: dict, out: Path) -> int:
    _write_json(out / "perturb.json", perturb_sweep(cfg))
    return 0


def hopf_gallery(cfg: dict) -> list[dict]:
    gas, profile = gas_of(cfg), profile_of(cfg)
    kappa = 1.0
    cases = [
        ("heat_like_exit", hopf.DegenOperator.constant([[0.0, 0.0], [0.0, 1.0]], [-1.0, 0.0])
         .affine([[0.0, 1.0], [-1.0, 0.0]]), hopf.BoundaryPatch.flat([0.0, -1.0]), True),
        ("laplacian_flat", hopf.DegenOperator.constant(np.eye(2), [0.0, 0.0]),
         hopf.BoundaryPatch.flat([0.0, 0.0]), False),
        ("laplacian_curved", hopf.DegenOperator.constant(np.eye(2), [0.0, 0.0]),
         hopf.BoundaryPatch.quadratic([0.0, 0.0], [[kappa]]), False),
    ]
    op, patch = linop.exit_operator(gas, profile)
    cases.append(("linearized_exit", op, patch, True))
    rows = []
    for name, op, patch, expect in cases:
        rep = hopf.analyze(op, patch)
        _, beta = hopf.flatten(op, patch)
        applicable = rep.condition_value > 0.0 and bool(rep.barrier_ok)
        rows.append({
            "name": name,
            "report": rep.to_dict(),
            "flatten_consistent": abs(rep.condition_value - float(beta[-1])) <= 1e-12,
            "expected_applicable": expect,
            "applicable": applicable,
            "match": applicable == expect,
        })
    return rows


def run_hopf_gallery(cfg: dict, out: Path) -> int:
    rows = hopf_gallery(cfg)
    _write_json(out / "hopf_gallery.json", rows)
    return 0 if all(r["match"] and r["flatten_consistent"] for r in rows) else 2


COMMANDS = {
    "symmetric": run_symmetric,
    "solve": run_solve,
    "verify": run_verify,
    "perturb": run_perturb,
    "hopf-gallery": run_hopf_gallery,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="sonicflow", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=list(COMMANDS))
    parser.add_argument("--config", type=Path, default=None)
    parser.add_argument("--out", type=Path, default=Path("out"))
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    overrides = {("experiment", "kind"): args.command}
    if args.seed is not None:
        overrides[("experiment", "seed")] = args.seed
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    if args.command != "symmetric":
        try:
            for nx, ny in grids_of(cfg):
                StripGrid(nx, ny)
        except InvalidParameter as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 1
    args.out.mkdir(parents=True, exist_ok=True)
    return COMMANDS[args.command](cfg, args.out)


if __name__ == "__main__":
    sys.exit(main())
