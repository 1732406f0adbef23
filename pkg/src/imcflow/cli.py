"""Command-line harness: scenario runs, background checks, sweeps.

Subcommands
    run           integrate a scenario config, write trace CSV + report JSON
    check-static  closed-form background identity residuals over random radii
    check-flux    flux-constant identity over seeded random surfaces
    sweep         gap evaluation (no flow) over a parameter grid
    version       package version and active kernel backend

Exit codes: 0 all enabled verdicts pass; 1 verdict failure; 2 flow breakdown;
64 configuration error. Identical config + seed gives byte-identical CSV.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np
from scipy.special import eval_legendre

from . import __version__
from ._backend import BACKEND_NAME
from .ambient import (AmbientParams, lapse_laplacian_residual,
                      scalar_curvature_residual, static_residual,
                      unit_sphere_area)
from .errors import (FlowBreakdownError, HorizonViolationError, ImcflowError,
                     InvalidConfigError, InvalidParamsError,
                     TimestepUnderflowError)
from .flow import FlowConfig, run
from .monitor import (flux_integral, limit_diagnostics, minkowski_gap,
                      monotonicity_verdict, q_floor, quantity_Q, trace_to_csv,
                      weighted_mean_curvature_integral)
from .sphere import build_grid
from .surface import (area, coordinate_sphere, default_phi_map,
                      geometry_fields, perturbed_sphere, star_shape_margin,
                      surface_from_phi_values, surface_from_s_values)

EXIT_OK = 0
EXIT_VERDICT = 1
EXIT_BREAKDOWN = 2
EXIT_CONFIG = 64

_COMMENT_RE = re.compile(r'("(?:[^"\\]|\\.)*")|//[^\n]*|/\*.*?\*/', re.S)


def load_config(path: str) -> dict:
    """JSON with // and /* */ comments stripped (strings preserved)."""
    with open(path) as fh:
        text = fh.read()
    stripped = _COMMENT_RE.sub(lambda m: m.group(1) or "", text)
    return json.loads(stripped)


def _atomic_write(path: str, data: str):
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(data)
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# Scenario assembly
# ---------------------------------------------------------------------------

_DEFAULT_CHECKS = {
    "monotonicity": {"enabled": True, "slack_rel": 1e-8},
    "q_floor": {"enabled": True, "tol": 1e-6},
    "sandwich": {"enabled": True, "tol": 1e-6},
    "chi_lower_bound": {"enabled": True, "tol": 1e-6},
    "area_growth": {"enabled": True, "tol": 1e-6},
    "flux_constancy": {"enabled": True, "tol": 1e-8},
    "hexp_band": {"enabled": True, "max_ratio": 20.0},
    "gap_nonnegative": {"enabled": True, "tol": 1e-9},
    "decay_fit": {"enabled": False, "min_r2": 0.99},
    "q_limit": {"enabled": False, "tol": 1e-3},
}


def _effective_checks(cfg: dict) -> dict:
    checks = {k: dict(v) for k, v in _DEFAULT_CHECKS.items()}
    for name, override in (cfg.get("checks") or {}).items():
        if name not in checks:
            raise InvalidConfigError(f"unknown check {name!r}")
        checks[name].update(override)
    return checks


def build_scenario(cfg: dict):
    """Construct (surface, FlowConfig, checks) from a parsed scenario dict;
    validates admissibility (mean convex, star-shaped, outside horizon)."""
    amb_cfg = cfg.get("ambient") or {}
    try:
        ambient = AmbientParams(int(amb_cfg.get("n", 3)),
                                float(amb_cfg.get("m", 1.0)))
    except InvalidParamsError as exc:
        raise InvalidConfigError(str(exc)) from exc
    grid_cfg = cfg.get("grid") or {}
    grid = build_grid(
        grid_cfg.get("mode", "axisym_1d"), ambient.n,
        int(grid_cfg.get("N", 128)),
        grid_cfg.get("N_psi"),
        int(grid_cfg.get("stencil_order", 4)),
    )
    flow_cfg = cfg.get("flow") or {}
    t_end = float(flow_cfg.get("t_end", 1.0))
    config = FlowConfig(
        t_end=t_end,
        cfl_safety=float(flow_cfg.get("cfl_safety", 0.2)),
        snapshot_interval=flow_cfg.get("snapshot_interval"),
        max_steps=int(flow_cfg.get("max_steps", 20_000_000)),
        f_min=float(flow_cfg.get("f_min", 1e-10)),
        dt_min=float(flow_cfg.get("dt_min", 1e-13)),
    )

    surf_cfg = cfg.get("initial_surface") or {}
    kind = surf_cfg.get("kind", "coordinate_sphere")
    base_s = float(surf_cfg.get("base_s", 4.0))
    if base_s <= ambient.s0:
        raise InvalidConfigError(
            f"base radius {base_s} must exceed the horizon {ambient.s0}"
        )
    if kind == "coordinate_sphere":
        surface = coordinate_sphere(grid, ambient, base_s, t_end=t_end)
    elif kind == "perturbed_sphere":
        pert = surf_cfg.get("perturbation") or {}
        surface = perturbed_sphere(
            grid, ambient, base_s,
            int(pert.get("mode_l", 2)), float(pert.get("amplitude", 0.1)),
            pert.get("target", "phi"), t_end=t_end,
        )
    elif kind == "custom_table":
        table = surf_cfg.get("table") or {}
        if "s_values" in table:
            surface = surface_from_s_values(
                grid, ambient, np.asarray(table["s_values"], dtype=float),
                t_end=t_end)
        elif "phi_values" in table:
            pm = default_phi_map(ambient, base_s * 0.5, base_s * 2.0, t_end)
            surface = surface_from_phi_values(
                grid, ambient, np.asarray(table["phi_values"], dtype=float), pm)
        else:
            raise InvalidConfigError("custom_table needs s_values or phi_values")
    else:
        raise InvalidConfigError(f"unknown initial surface kind {kind!r}")

    fields = geometry_fields(surface)
    if not fields.mean_convex:
        raise InvalidConfigError(
            f"initial surface is not mean convex (min H = {np.min(fields.H)})"
        )
    if star_shape_margin(surface) <= 0.0:
        raise InvalidConfigError("initial surface is not star-shaped")
    return surface, config, _effective_checks(cfg)


# ---------------------------------------------------------------------------
# Verdicts over a finished trace
# ---------------------------------------------------------------------------

def evaluate_verdicts(trace, checks: dict, ambient: AmbientParams) -> list:
    verdicts = []

    def add(name, ok, measured, tolerance):
        verdicts.append({
            "name": name, "pass": bool(ok),
            "measured": float(measured) if measured is not None else None,
            "tolerance": tolerance,
        })

    n, m = ambient.n, ambient.m
    t = trace.t

    if checks["monotonicity"]["enabled"]:
        rep = monotonicity_verdict(trace, checks["monotonicity"]["slack_rel"])
        add("monotonicity", rep["pass"], rep["measured"], rep["tolerance"])

    if checks["q_floor"]["enabled"]:
        qmin = float(np.min(trace.column("Q")))
        floor = q_floor(n)
        tol = checks["q_floor"]["tol"]
        add("q_floor", qmin >= floor - tol * floor, qmin - floor, tol)

    if checks["sandwich"]["enabled"]:
        grow = np.exp(t / (n - 1))
        lo = trace.meta["lambda_min0"] * grow
        hi = trace.meta["lambda_max0"] * grow
        smin = trace.column("lambda_tilde_min") * grow
        smax = trace.column("lambda_tilde_max") * grow
        tol = checks["sandwich"]["tol"]
        worst = max(float(np.max((lo - smin) / hi)), float(np.max((smax - hi) / hi)))
        add("sandwich", worst <= tol, worst, tol)

    if checks["chi_lower_bound"]["enabled"]:
        bound = trace.meta["chi_min0"] * np.exp(t / (n - 1))
        chi = trace.column("chi_min")
        tol = checks["chi_lower_bound"]["tol"]
        worst = float(np.max((bound - chi) / bound))
        add("chi_lower_bound", worst <= tol, worst, tol)

    if checks["area_growth"]["enabled"]:
        a = trace.column("area")
        drift = np.abs(a / (a[0] * np.exp(t)) - 1.0)
        tol = checks["area_growth"]["tol"]
        add("area_growth", float(np.max(drift)) <= tol, float(np.max(drift)), tol)

    if checks["flux_constancy"]["enabled"]:
        flux = trace.column("flux")
        target = m * (n - 2) * unit_sphere_area(n)
        tol = checks["flux_constancy"]["tol"]
        if m == 0.0:
            worst = float(np.max(np.abs(flux)))
        else:
            worst = float(np.max(np.abs(flux - target))) / target
        add("flux_constancy", worst <= tol, worst, tol)

    if checks["hexp_band"]["enabled"]:
        hex_min = float(np.min(trace.column("Hexp_min")))
        hex_max = float(np.max(trace.column("Hexp_max")))
        max_ratio = checks["hexp_band"]["max_ratio"]
        ok = hex_min > 0.0 and hex_max / hex_min <= max_ratio
        add("hexp_band", ok, hex_max / hex_min if hex_min > 0 else math.inf,
            max_ratio)

    if checks["gap_nonnegative"]["enabled"]:
        gap = trace.column("gap")
        tol = checks["gap_nonnegative"]["tol"]
        scale = max(1.0, float(np.max(np.abs(trace.column("fH_integral")))))
        worst = float(np.min(gap))
        add("gap_nonnegative", worst >= -tol * scale, worst, tol)

    if checks["decay_fit"]["enabled"]:
        try:
            diag = limit_diagnostics(trace)
            ok = (diag["grad_decay_rate"] is not None
                  and diag["grad_decay_rate"] > 0.0
                  and diag["grad_decay_r2"] >= checks["decay_fit"]["min_r2"])
            add("decay_fit", ok, diag["grad_decay_rate"],
                checks["decay_fit"]["min_r2"])
        except ImcflowError:
            add("decay_fit", False, None, checks["decay_fit"]["min_r2"])

    if checks["q_limit"]["enabled"]:
        excess = float(trace.records[-1].Q) - q_floor(n)
        tol = checks["q_limit"]["tol"]
        add("q_limit", excess < tol, excess, tol)

    return verdicts


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
        surface, config, checks = build_scenario(cfg)
    except (OSError, json.JSONDecodeError, ImcflowError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    t0 = time.perf_counter()
    trace = run(surface, config)
    elapsed = time.perf_counter() - t0

    out_dir = args.out or "."
    os.makedirs(out_dir, exist_ok=True)
    out_cfg = cfg.get("output") or {}
    csv_path = os.path.join(out_dir, out_cfg.get("trace_csv", "trace.csv"))
    report_path = os.path.join(out_dir, out_cfg.get("report_json", "report.json"))

    _atomic_write(csv_path, trace_to_csv(trace))

    # a broken run reports its failure; verdicts need a complete trace
    verdicts = ([] if trace.failed
                else evaluate_verdicts(trace, checks, surface.ambient))
    report = {
        "scenario": cfg.get("name", os.path.basename(args.config)),
        "effective_config": {
            "ambient": {"n": surface.ambient.n, "m": surface.ambient.m,
                        "s0": surface.ambient.s0},
            "grid": {"mode": surface.grid.mode.value,
                     "N": int(surface.grid.theta.size),
                     "stencil_order": surface.grid.stencil_order},
            "flow": {"t_end": config.t_end, "cfl_safety": config.cfl_safety,
                     "snapshot_interval": config.snapshot_interval,
                     "f_min": config.f_min, "dt_min": config.dt_min},
            "checks": checks,
            "seed": args.seed,
            "backend": BACKEND_NAME,
        },
        "verdicts": verdicts,
        "failed": trace.failed,
        "failure_reason": trace.failure_reason,
        "events": [list(e) for e in trace.events],
        "timings": {"flow_seconds": elapsed, "steps": trace.meta["steps"]},
    }
    _atomic_write(report_path, json.dumps(report, indent=2) + "\n")

    if not args.quiet:
        print(f"wrote {csv_path} ({len(trace.records)} snapshots, "
              f"{trace.meta['steps']} steps, {elapsed:.2f}s)")
        for v in verdicts:
            print(f"  [{'PASS' if v['pass'] else 'FAIL'}] {v['name']}: "
                  f"measured={v['measured']} tol={v['tolerance']}")
    if trace.failed:
        print(f"flow failed: {trace.failure_reason}", file=sys.stderr)
        return EXIT_BREAKDOWN
    return EXIT_OK if all(v["pass"] for v in verdicts) else EXIT_VERDICT


def _parse_list(text, cast):
    return [cast(x) for x in str(text).split(",") if x != ""]


def cmd_check_static(args) -> int:
    try:
        ns = _parse_list(args.n, int)
        ms = _parse_list(args.m, float)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for n in ns:
        for m in ms:
            try:
                params = AmbientParams(n, m)
            except InvalidParamsError as exc:
                print(f"config error: {exc}", file=sys.stderr)
                return EXIT_CONFIG
            lo = params.s0 + max(0.05 * max(params.s0, 1.0), 1e-3)
            s = lo * (100.0 ** rng.random(args.samples))
            static = np.max(static_residual(params, s)) + args.corruption
            scal = np.max(scalar_curvature_residual(params, s))
            harm = np.max(lapse_laplacian_residual(params, s))
            local = max(float(static), float(scal), float(harm))
            worst = max(worst, local)
            if not args.quiet:
                print(f"n={n} m={m}: static {float(static):.3e} "
                      f"scalar {float(scal):.3e} laplacian {float(harm):.3e}")
    print(f"worst residual: {worst:.3e} (tolerance {args.tol:.1e})")
    return EXIT_OK if worst < args.tol else EXIT_VERDICT


def random_admissible_surface(grid, ambient, rng, base_lo=3.0, base_hi=8.0,
                              amplitude=0.25, lmax=6):
    """Seeded random star-shaped mean-convex graph; shrinks the perturbation
    until admissible (mean convex and clear of the horizon)."""
    base = float(rng.uniform(base_lo, base_hi))
    coef = amplitude * rng.standard_normal(lmax) / (1.0 + np.arange(lmax)) ** 2
    x = np.cos(grid.theta)
    bump = np.zeros_like(grid.theta)
    for l, c in enumerate(coef, start=1):
        bump += c * eval_legendre(l, x)
    for _ in range(12):
        try:
            pad = float(np.max(np.abs(bump))) + 0.2
            pm = default_phi_map(ambient, base * math.exp(-pad),
                                 base * math.exp(pad))
            phi = pm.phi_of_s(base) + bump
            surface = surface_from_phi_values(grid, ambient, phi, pm)
            if geometry_fields(surface).mean_convex:
                return surface
        except ImcflowError:
            pass
        bump *= 0.5
    raise InvalidConfigError("could not build an admissible random surface")


def cmd_check_flux(args) -> int:
    try:
        ambient = AmbientParams(args.n, args.m)
        grid = build_grid("axisym_1d", args.n, args.N)
    except ImcflowError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    rng = np.random.default_rng(args.seed)
    target = ambient.m * (ambient.n - 2) * unit_sphere_area(ambient.n)
    worst = 0.0
    for _ in range(args.count):
        surface = random_admissible_surface(grid, ambient, rng)
        flux = flux_integral(surface)
        dev = abs(flux) if target == 0.0 else abs(flux - target) / target
        worst = max(worst, dev)
    kind = "absolute" if target == 0.0 else "relative"
    print(f"{args.count} surfaces, worst {kind} flux deviation: {worst:.3e} "
          f"(tolerance {args.tol:.1e})")
    return EXIT_OK if worst < args.tol else EXIT_VERDICT


def _sweep_row(task):
    n, m, s, l, eps, N, stencil_order = task
    ambient = AmbientParams(n, m)
    grid = build_grid("axisym_1d", n, N, stencil_order=stencil_order)
    if eps == 0.0:
        surface = coordinate_sphere(grid, ambient, s)
    else:
        surface = perturbed_sphere(grid, ambient, s, l, eps)
    return {
        "n": n, "m": m, "s": s, "l": l, "epsilon": eps,
        "area": area(surface),
        "fH_integral": weighted_mean_curvature_integral(surface),
        "Q": quantity_Q(surface),
        "gap": minkowski_gap(surface),
    }


def cmd_sweep(args) -> int:
    try:
        cfg = load_config(args.config)
        sweep = cfg.get("sweep") or {}
        eps_list = [float(x) for x in sweep.get("epsilon", [])]
        l_list = [int(x) for x in sweep.get("l", [2])]
        s_list = [float(x) for x in sweep.get("s", [4.0])]
        m_list = [float(x) for x in sweep.get("m", [1.0])]
        n_list = [int(x) for x in sweep.get("n", [3])]
        N = int((cfg.get("grid") or {}).get("N", 128))
        stencil_order = int((cfg.get("grid") or {}).get("stencil_order", 4))
        tol = float(sweep.get("tol", 1e-9))
        tasks = [
            (n, m, s, l, eps, N, stencil_order)
            for n in n_list for m in m_list for s in s_list
            for l in l_list for eps in eps_list
        ]
        if not tasks:
            raise InvalidConfigError("sweep grid is empty")
        for n, m, s, *_ in tasks:
            if s <= AmbientParams(n, m).s0:
                raise InvalidConfigError(
                    f"sweep radius {s} inside horizon for n={n}, m={m}"
                )
    except (OSError, json.JSONDecodeError, ImcflowError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    threads = args.threads or int(os.environ.get("IMCF_THREADS", "1"))
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_sweep_row, tasks))
    else:
        rows = [_sweep_row(t) for t in tasks]

    out_dir = args.out or "."
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir,
                            (cfg.get("output") or {}).get("sweep_csv", "sweep.csv"))
    cols = ("n", "m", "s", "l", "epsilon", "area", "fH_integral", "Q", "gap")
    lines = [",".join(cols)]
    for r in rows:
        lines.append(",".join(repr(float(r[c])) if isinstance(r[c], float)
                              else str(r[c]) for c in cols))
    _atomic_write(csv_path, "\n".join(lines) + "\n")

    scale = max(abs(r["fH_integral"]) for r in rows)
    bad_negative = [r for r in rows if r["gap"] < -tol * scale]
    bad_zero = [r for r in rows
                if r["epsilon"] != 0.0 and abs(r["gap"]) <= tol * scale]
    bad_sphere = [r for r in rows
                  if r["epsilon"] == 0.0 and abs(r["gap"]) > tol * scale]
    if not args.quiet:
        print(f"wrote {csv_path} ({len(rows)} rows); "
              f"min gap {min(r['gap'] for r in rows):.3e}")
    ok = not bad_negative and not bad_zero and not bad_sphere
    if not ok:
        for r in bad_negative:
            print(f"negative gap: {r}", file=sys.stderr)
        for r in bad_zero:
            print(f"unexpected equality off the sphere: {r}", file=sys.stderr)
        for r in bad_sphere:
            print(f"sphere row missed equality: {r}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_VERDICT


def cmd_version(args) -> int:
    print(f"imcflow {__version__} (kernel backend: {BACKEND_NAME})")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="imcflow",
        description="Inverse mean curvature flow in the Schwarzschild "
                    "background: runs, identity checks, and sweeps.",
    )
    parser.add_argument("--quiet", action="store_true",
                        help="suppress non-error output")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="integrate a scenario config")
    p_run.add_argument("--config", required=True, help="scenario JSON path")
    p_run.add_argument("--out", default=".", help="output directory")
    p_run.add_argument("--seed", type=int, default=0, help="randomization seed")
    p_run.add_argument("--threads", type=int, default=None)
    p_run.set_defaults(func=cmd_run)

    p_static = sub.add_parser("check-static",
                              help="background identity residuals")
    p_static.add_argument("--n", default="3,4,5",
                          help="comma list of dimensions")
    p_static.add_argument("--m", default="0.5,1,2", help="comma list of masses")
    p_static.add_argument("--samples", type=int, default=1000)
    p_static.add_argument("--tol", type=float, default=1e-12)
    p_static.add_argument("--seed", type=int, default=0)
    p_static.add_argument("--corruption", type=float, default=0.0,
                          help=argparse.SUPPRESS)  # detector self-test hook
    p_static.set_defaults(func=cmd_check_static)

    p_flux = sub.add_parser("check-flux", help="flux-constant identity")
    p_flux.add_argument("--n", type=int, default=3)
    p_flux.add_argument("--m", type=float, default=1.0)
    p_flux.add_argument("--N", type=int, default=256)
    p_flux.add_argument("--count", type=int, default=50)
    p_flux.add_argument("--tol", type=float, default=1e-8)
    p_flux.add_argument("--seed", type=int, default=0)
    p_flux.set_defaults(func=cmd_check_flux)

    p_sweep = sub.add_parser("sweep", help="gap evaluation over a grid")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--out", default=".")
    p_sweep.add_argument("--seed", type=int, default=0)
    p_sweep.add_argument("--threads", type=int, default=None)
    p_sweep.set_defaults(func=cmd_sweep)

    p_version = sub.add_parser("version", help="print version and backend")
    p_version.set_defaults(func=cmd_version)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FlowBreakdownError, TimestepUnderflowError) as exc:
        print(f"flow failure: {exc}", file=sys.stderr)
        return EXIT_BREAKDOWN
    except (InvalidConfigError, InvalidParamsError,
            HorizonViolationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
