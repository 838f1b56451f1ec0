"""Command line front end: one experiment per invocation, one report per run.

Usage:
    nfl <experiment-tag> --config <path> [--out <dir>] [--workers N]
    nfl replay --dir <report-dir> [--out <scratch-dir>]

Tags: validate, simulate, wave, fronts, regularity, envelope, squeeze.
Every run writes ``report.json`` plus CSV artifacts (and PNG figures) into the
output directory; the exit status is 0 iff every in-config assertion passed.
Runs are reproducible bit-for-bit from their persisted config.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import filecmp
import json
import os
import sys

import numpy as np

from . import envelope as env_mod
from . import plots
from .evolution import evolve, make_initial, write_trajectory
from .fronts import (check_bounded_width, extract_trace,
                     fit_propagation_bounds, interface_locations, write_trace)
from .ignition_bounds import (build_squeeze, residual_lattice,
                              select_parameters, select_shifts,
                              verify_squeeze, verify_subsolution,
                              verify_supersolution)
from .kernels import Kernel, validate_h1
from .reactions import (Heterogeneous, from_config as nl_from_config,
                        validate_family, validate_h2, validate_h3)
from .regularity import (centered_slope_profile, check_coefficient_bounds,
                         compute_regions, difference_fields, gamma_ratio,
                         identity_residual, remark_slope_bound, sup_abs_fx,
                         ux_profile)
from .waves import kpp_speed, solve_wave, solve_wave_kpp, write_wave


class ConfigError(ValueError):
    """Invalid configuration; the message carries the offending field path."""


def _need(cfg: dict, path: str, types, positive: bool = False):
    node = cfg
    for key in path.split("."):
        if not isinstance(node, dict) or key not in node:
            raise ConfigError(f"config-invalid: missing field {path}")
        node = node[key]
    if not isinstance(node, types):
        raise ConfigError(f"config-invalid: field {path} has wrong type")
    if positive and not node > 0:
        raise ConfigError(f"config-invalid: field {path} must be positive")
    return node


def kernel_from_config(cfg: dict) -> Kernel:
    family = _need(cfg, "kernel.family", str)
    if family == "gaussian":
        return Kernel.gaussian(_need(cfg, "kernel.sigma", (int, float),
                                     positive=True))
    if family == "bump":
        return Kernel.bump(_need(cfg, "kernel.radius", (int, float),
                                 positive=True))
    raise ConfigError(f"config-invalid: kernel.family {family!r} unknown")


def _grid(cfg: dict):
    dx = _need(cfg, "grid.dx", (int, float), positive=True)
    half = _need(cfg, "grid.half_width", (int, float), positive=True)
    center = cfg["grid"].get("center", 0.0)
    n = 2 * int(round(half / dx)) + 1
    x0 = center - (n - 1) // 2 * dx
    return x0, dx, n


def _initial(cfg: dict):
    x0, dx, n = _grid(cfg)
    prof = _need(cfg, "initial.profile", str)
    params = cfg["initial"].get("params", {})
    return make_initial(prof, x0, dx, n, **params)


def _simulate(cfg: dict, workers: int):
    kernel = kernel_from_config(cfg)
    nl = nl_from_config(cfg["nonlinearity"])
    state = _initial(cfg)
    dt = _need(cfg, "integrator.dt", (int, float), positive=True)
    t_end = _need(cfg, "integrator.t_end", (int, float), positive=True)
    stride = cfg["integrator"].get("snapshot_stride", 1)
    recenter = cfg["integrator"].get("recenter_level", None)
    traj = evolve(state, t_end, dt, nl, kernel, recenter_level=recenter,
                  snapshot_stride=stride)
    return kernel, nl, traj


def _parallel_trace(traj, levels, workers: int):
    """Per-snapshot interface extraction, partitioned across worker threads
    with order-preserving assembly (bit-identical for any worker count)."""
    from .fronts import FrontTrace
    levels = tuple(levels)
    if 0.5 not in levels:
        levels = levels + (0.5,)
    if workers <= 1:
        return extract_trace(traj.snapshots, levels)

    def one(snap):
        return [interface_locations(snap, lam) for lam in levels]

    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(one, traj.snapshots))
    return FrontTrace(
        times=traj.times,
        levels=levels,
        left={lam: np.asarray([r[j][0] for r in rows])
              for j, lam in enumerate(levels)},
        right={lam: np.asarray([r[j][1] for r in rows])
               for j, lam in enumerate(levels)},
        reference_level=0.5,
    )


def run_validate(cfg, out, workers):
    kernel = kernel_from_config(cfg)
    nl = nl_from_config(cfg["nonlinearity"])
    p = cfg.get("params", {})
    h1 = validate_h1(kernel)
    h2 = validate_h2(nl, p.get("theta1", 0.8), seed=cfg.get("seed", 0))
    h3 = validate_h3(nl, p.get("theta0", 0.2), p.get("kappa0", 1.0))
    reports = {"h1": h1, "h2": h2, "h3": bool(h3)}
    if not isinstance(nl, Heterogeneous):
        reports["family"] = validate_family(nl)
    ratios = [gamma_ratio(kernel, r, x_max=25.0 * max(kernel.scale, 1.0))
              for r in p.get("ratio_rates", [0.5, 0.25, 0.125])]
    reports["corner_ratio_gammas"] = {f"{r['rate']:g}": r["gamma"]
                                      for r in ratios}
    figures = [plots.plot_gamma_ratio(ratios, out)]
    assertions = [
        {"name": "kernel_hypotheses", "passed": h1["passed"]},
        {"name": "reaction_hypotheses", "passed": h2["passed"]},
        {"name": "low_state_slope_bound", "passed": bool(h3)},
    ]
    if "family" in reports:
        assertions.append({"name": "family_clauses",
                           "passed": reports["family"]["passed"]})
    return reports, assertions, figures


def run_simulate(cfg, out, workers):
    kernel, nl, traj = _simulate(cfg, workers)
    levels = cfg.get("params", {}).get("levels", [0.5])
    write_trajectory(traj, os.path.join(out, "trajectory"))
    figures = [plots.plot_snapshots(traj, out)]
    reports = {"snapshots": len(traj.snapshots), "shifts": len(traj.shifts)}
    lo = min(float(s.values.min()) for s in traj.snapshots)
    hi = max(float(s.values.max()) for s in traj.snapshots)
    assertions = [{"name": "range_preserved", "value": [lo, hi],
                   "tolerance": 1e-6,
                   "passed": lo >= -1e-6 and hi <= 1.0 + 1e-6}]
    first = traj.snapshots[0]
    if first.u_left > max(levels) and first.u_right < min(levels):
        trace = _parallel_trace(traj, levels, workers)
        write_trace(trace, os.path.join(out, "front_trace.csv"))
        figures.append(plots.plot_trace(trace, out))
    return reports, assertions, figures


def run_wave(cfg, out, workers):
    kernel = kernel_from_config(cfg)
    nl = nl_from_config(cfg["nonlinearity"])
    p = cfg.get("params", {})
    if getattr(nl, "family", None) == "kpp":
        rate = _need(cfg, "params.rate", (int, float), positive=True)
        prof = solve_wave_kpp(nl, kernel, rate)
        formula = kpp_speed(kernel, nl.amplitude, rate)
        extra = [{"name": "speed_matches_relation", "value": prof.speed,
                  "target": formula, "tolerance": 0.05,
                  "passed": abs(prof.speed - formula) <= 0.05 * formula},
                 {"name": "tail_rate_matches", "value": prof.decay_rate,
                  "target": rate, "tolerance": 0.05,
                  "passed": abs(prof.decay_rate - rate) <= 0.05 * rate}]
    else:
        prof = solve_wave(nl, kernel, lower_state=p.get("lower_state", 0.0))
        extra = []
    write_wave(prof, os.path.join(out, "wave.csv"))
    figures = [plots.plot_wave(prof, out)]
    reports = {"speed": prof.speed, "residual": prof.residual,
               "decay_rate": prof.decay_rate}
    assertions = [{"name": "profile_residual", "value": prof.residual,
                   "tolerance": 1e-4, "passed": prof.residual <= 1e-4},
                  {"name": "profile_monotone", "tolerance": 1e-10,
                   "passed": bool(np.all(np.diff(prof.values) <= 1e-10))}]
    return reports, assertions + extra, figures


def run_fronts(cfg, out, workers):
    kernel, nl, traj = _simulate(cfg, workers)
    p = cfg.get("params", {})
    levels = p.get("levels", [0.1, 0.5, 0.9])
    trace = _parallel_trace(traj, levels, workers)
    write_trace(trace, os.path.join(out, "front_trace.csv"))
    keep = trace.times >= p.get("fit_start", traj.times[0])
    fit = fit_propagation_bounds(trace.times[keep], trace.reference[keep])
    with open(os.path.join(out, "propagation_fit.json"), "w") as fh:
        json.dump(fit, fh, indent=1, sort_keys=True)
    band = p.get("width_band", [min(levels), max(levels)])
    width = check_bounded_width(trace, band[0], band[1])
    figures = [plots.plot_trace(trace, out), plots.plot_snapshots(traj, out)]
    reports = {"fit": fit, "bounded_width": width}
    assertions = [
        {"name": "front_advances", "value": fit["lower_speed"],
         "tolerance": 0.0, "passed": fit["lower_speed"] > 0.0},
        {"name": "bounds_certified", "tolerance": 1e-9,
         "passed": fit["certificate"]["passed"]},
    ]
    return reports, assertions, figures


def run_regularity(cfg, out, workers):
    kernel, nl, traj = _simulate(cfg, workers)
    if traj.shifts:
        raise ConfigError("config-invalid: integrator.recenter_level must be "
                          "null for regularity runs (fixed window needed)")
    p = cfg.get("params", {})
    theta0, theta1 = p.get("theta0", 0.2), p.get("theta1", 0.8)
    kappa0 = p.get("kappa0", 1.0)
    delta0 = p.get("delta0", 4 * traj.dx)
    stride = p.get("trace_stride", 8)
    trace = extract_trace(traj.snapshots[::stride],
                          [theta0, 0.5, theta1])
    keep = trace.times >= p.get("fit_start", traj.times[0])
    fit = fit_propagation_bounds(trace.times[keep], trace.reference[keep])
    ctx = compute_regions(trace, theta0, theta1, delta0)
    etas = [k * traj.dx for k in p.get("eta_cells", [1, 2, 4])]
    ladder = []
    coef_reports = []
    for eta in etas:
        df = difference_fields(traj, eta, nl, kernel)
        ladder.append({"eta": eta, "sup_v": float(np.abs(df.v).max()),
                       "identity_residual": identity_residual(df),
                       "coupling_sup": df.coupling_sup(),
                       "forcing_sup": df.forcing_sup()})
        coef_reports.append(check_coefficient_bounds(df, ctx, kappa0))
    t_eval = traj.times[-1]
    horizon = ctx.growth_time + 10.0 / kappa0
    x, ux = ux_profile(traj, t_eval, horizon, nl, kernel)
    xs, fd = centered_slope_profile(traj, t_eval)
    with open(os.path.join(out, "slope_comparison.csv"), "w") as fh:
        fh.write("x,ux_integral,ux_fd\n")
        for a, b, c in zip(x, ux, fd):
            fh.write(f"{float(a)!r},{float(b)!r},{float(c)!r}\n")
    mask = np.abs(fd) > 0.01
    rel = float((np.abs(ux - fd)[mask] / np.abs(fd)[mask]).max()) \
        if mask.any() else 0.0
    bound = remark_slope_bound(kernel.abs_derivative_l1(), sup_abs_fx(nl),
                               max(l["coupling_sup"] for l in ladder),
                               ctx.growth_time, kappa0)
    figures = [plots.plot_ux_comparison(x, ux, fd, out)]
    reports = {
        "fit": fit, "growth_time": ctx.growth_time,
        "growth_time_bound": ctx.growth_time_bound(fit["lower_speed"],
                                                   fit["lower_lag"]),
        "ladder": ladder,
        "coefficient_scans": coef_reports,
        "ux_rel_error": rel,
        "slope_sup": float(np.abs(ux).max()),
        "slope_sup_bound": bound,
    }
    assertions = [
        {"name": "growth_time_bounded", "value": ctx.growth_time,
         "tolerance": 1e-6,
         "passed": ctx.growth_time <= reports["growth_time_bound"] + 1e-6},
        {"name": "identity_residuals", "tolerance": 1e-3,
         "passed": all(l["identity_residual"] <= 1e-3 for l in ladder)},
        {"name": "coefficient_bounds", "tolerance": 1e-9,
         "passed": all(r["passed"] for r in coef_reports)},
        {"name": "ux_agrees_with_differences", "value": rel,
         "tolerance": 1e-2, "passed": rel <= 1e-2},
        {"name": "slope_sup_bound", "value": reports["slope_sup"],
         "bound": bound, "passed": reports["slope_sup"] <= bound},
    ]
    return reports, assertions, figures


def run_envelope(cfg, out, workers):
    kernel, nl, traj = _simulate(cfg, workers)
    p = cfg.get("params", {})
    trace = _parallel_trace(traj, p.get("levels", [0.5]), workers)
    keep = trace.times >= p.get("fit_start", traj.times[0])
    t, x = trace.times[keep], trace.reference[keep]
    fit = fit_propagation_bounds(t, x)
    params = env_mod.EnvelopeParams.from_fit(fit)
    cont = env_mod.continuous_modification(t, x, params, fit)
    fit2 = fit_propagation_bounds(t, cont["forward"])
    params2 = env_mod.EnvelopeParams.from_fit(
        fit2, step_offset=p.get("step_offset"),
        blend_width=p.get("blend_width"))
    env = env_mod.smooth_modification(t, cont["forward"], params2)
    report = env_mod.verify_envelope(env, t, cont["forward"])
    with open(os.path.join(out, "envelope.json"), "w") as fh:
        payload = json.loads(env.to_json())
        payload["verification"] = report
        json.dump(payload, fh, indent=1, sort_keys=True)
    write_trace(trace, os.path.join(out, "front_trace.csv"))
    figures = [plots.plot_envelope(t, x, env, out)]
    reports = {"fit": fit, "refit": fit2, "verification": report,
               "step1_sup": cont["sup_forward"],
               "step1_bound": cont["deviation_bound"]}
    assertions = [
        {"name": "step1_bound_holds", "value": cont["sup_forward"],
         "bound": cont["deviation_bound"],
         "passed": cont["sup_forward"] <= cont["deviation_bound"]},
        {"name": "envelope_certified", "tolerance": 1e-10,
         "passed": report["passed"]},
    ]
    return reports, assertions, figures


def run_squeeze(cfg, out, workers):
    kernel = kernel_from_config(cfg)
    nl = nl_from_config(cfg["nonlinearity"])
    p = cfg.get("params", {})
    if getattr(nl, "family", None) != "ignition":
        raise ConfigError("config-invalid: nonlinearity.family must be "
                          "ignition for squeeze runs")
    wave = solve_wave(nl, kernel)
    params = select_parameters(nl, wave, p.get("alpha0", 0.25), kernel)
    eps = p.get("eps", params.eps_cap)
    state = _initial(cfg)
    lo_s, hi_s = select_shifts(state, params, wave, eps)
    pair = build_squeeze(params, wave, nl, eps, lo_s, hi_s)
    sub = verify_subsolution(pair, kernel)
    sup = verify_supersolution(pair, kernel)
    dt = _need(cfg, "integrator.dt", (int, float), positive=True)
    t_end = _need(cfg, "integrator.t_end", (int, float), positive=True)
    traj = evolve(state, t_end, dt, nl, kernel,
                  snapshot_stride=cfg["integrator"].get("snapshot_stride", 10))
    squeeze = verify_squeeze(traj, pair)
    with open(os.path.join(out, "squeeze_params.json"), "w") as fh:
        fh.write(params.to_json())
    # residual heat map over a coarse lattice
    tt = np.arange(0.0, 5.0 / params.decay_rate, 2.0 / params.decay_rate / 10)
    zz = np.arange(-params.l1 - 8.0, params.l2 + 8.0, 0.2)
    res = residual_lattice(pair, kernel, -1, tt, zz)
    with open(os.path.join(out, "squeeze_residual.csv"), "w") as fh:
        fh.write("t,x,residual\n")
        for i, ti in enumerate(tt):
            for j, zj in enumerate(zz):
                fh.write(f"{float(ti)!r},{float(zj)!r},{float(res[i, j])!r}\n")
    figures = [plots.plot_residual_heatmap(tt, zz, res, out),
               plots.plot_wave(wave, out)]
    reports = {"params": json.loads(params.to_json()),
               "subsolution": sub, "supersolution": sup, "squeeze": squeeze}
    assertions = [
        {"name": "selection_conditions", "passed": params.passed},
        {"name": "subsolution_residual",
         "value": sub["max_perturbation_residual"], "tolerance": 1e-6,
         "passed": sub["passed"]},
        {"name": "supersolution_residual",
         "value": sup["max_perturbation_residual"], "tolerance": 1e-6,
         "passed": sup["passed"]},
        {"name": "solution_sandwiched", "tolerance": squeeze["tolerance"],
         "passed": squeeze["passed"]},
    ]
    return reports, assertions, figures


RUNNERS = {
    "validate": run_validate,
    "simulate": run_simulate,
    "wave": run_wave,
    "fronts": run_fronts,
    "regularity": run_regularity,
    "envelope": run_envelope,
    "squeeze": run_squeeze,
}


def run_experiment(cfg: dict, out_dir: str, workers: int = 1) -> dict:
    tag = cfg.get("experiment")
    if tag not in RUNNERS:
        raise ConfigError(f"config-invalid: experiment {tag!r} unknown")
    os.makedirs(out_dir, exist_ok=True)
    cfg_clean = {k: v for k, v in cfg.items() if k != "output_dir"}
    with open(os.path.join(out_dir, "config.json"), "w") as fh:
        json.dump(cfg_clean, fh, indent=1, sort_keys=True)
    reports, assertions, figures = RUNNERS[tag](cfg, out_dir, workers)
    report = {
        "experiment": tag,
        "config": cfg_clean,
        "workers": workers,
        "reports": reports,
        "assertions": assertions,
        "figures": figures,
        "passed": all(a["passed"] for a in assertions),
    }
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(report, fh, indent=1, sort_keys=True, default=_json_default)
    return report


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def replay(report_dir: str, out_dir: str) -> dict:
    """Re-run from the persisted config and diff numeric outputs at
    bit-identity."""
    cfg_path = os.path.join(report_dir, "config.json")
    report_path = os.path.join(report_dir, "report.json")
    if not os.path.exists(cfg_path) or not os.path.exists(report_path):
        raise FileNotFoundError("missing-artifacts: need config.json and "
                                "report.json in the report dir")
    with open(cfg_path) as fh:
        cfg = json.load(fh)
    with open(report_path) as fh:
        stored = json.load(fh)
    if stored.get("config") != cfg:
        return {"passed": False, "config_drift": True, "mismatches": []}
    run_experiment(cfg, out_dir, workers=stored.get("workers", 1))
    mismatches = []
    for root, _, files in os.walk(report_dir):
        rel_root = os.path.relpath(root, report_dir)
        for name in files:
            if not name.endswith((".csv", ".json")):
                continue
            rel = os.path.normpath(os.path.join(rel_root, name))
            new_path = os.path.join(out_dir, rel)
            old_path = os.path.join(root, name)
            if not os.path.exists(new_path) or \
                    not filecmp.cmp(old_path, new_path, shallow=False):
                mismatches.append(rel)
    return {"passed": not mismatches, "config_drift": False,
            "mismatches": mismatches}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nfl", description="Nonlocal front laboratory")
    parser.add_argument("experiment", choices=list(RUNNERS) + ["replay"])
    parser.add_argument("--config", help="path to the experiment config JSON")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--dir", default=None, help="report dir (replay)")
    parser.add_argument("--workers", type=int,
                        default=int(os.environ.get("NFL_WORKERS", "1")))
    args = parser.parse_args(argv)

    if args.experiment == "replay":
        if not args.dir:
            parser.error("replay needs --dir")
        out = args.out or (args.dir.rstrip("/") + "_replay")
        try:
            result = replay(args.dir, out)
        except FileNotFoundError as err:
            print(str(err), file=sys.stderr)
            return 2
        print(json.dumps(result, indent=1))
        return 0 if result["passed"] else 1

    if not args.config:
        parser.error("experiment runs need --config")
    try:
        with open(args.config) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as err:
        print(f"config-invalid: {err}", file=sys.stderr)
        return 2
    out = args.out or cfg.get("output_dir") or "nfl_out"
    if cfg.get("experiment") != args.experiment:
        cfg["experiment"] = args.experiment
    try:
        report = run_experiment(cfg, out, workers=max(1, args.workers))
    except (ConfigError, ValueError) as err:
        print(str(err), file=sys.stderr)
        return 2
    for a in report["assertions"]:
        status = "PASS" if a["passed"] else "FAIL"
        print(f"[{status}] {a['name']}")
    if not report["passed"]:
        first = next(a for a in report["assertions"] if not a["passed"])
        print(f"experiment-failed: first failing assertion {first['name']}",
              file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
