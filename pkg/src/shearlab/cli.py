"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 numerical blow-up, 4 I/O
failure. Every file-writing mode emits a manifest naming its outputs; each
output names its manifest back (CSV comment line / JSON key).
"""

import argparse
import json
import os
import sys
import time

import numpy as np

from .config import RunConfig, load_config, ConfigError, config_dict
from .manifest import (atomic_write_text, atomic_write_json, write_manifest,
                       load_manifest, manifest_config)
from .spectral import make_grid
from .dynamics import SimState, make_initial_data, BlowupError
from .runs import run_single, run_decomposition
from .multipliers import (build_params, check_dissipation_lower_bound,
                          check_derivative_bounds, sample_symbol_points)
from .diagnostics import (fit_decay_rate, decay_envelopes, toy_growth_product,
                          ck_functionals, weighted_norm, forcing_norm,
                          last_efoldings_window, run_inequality_suite,
                          DiagnosticsRecord)
from .threshold import ScanConfig, run_scan

EXIT_OK, EXIT_CONFIG, EXIT_BLOWUP, EXIT_IO = 0, 2, 3, 4


def _out_dir(args):
    d = args.output_dir or os.environ.get("SHEARLAB_OUTDIR", ".")
    os.makedirs(d, exist_ok=True)
    return d


def _simulate(cfg: RunConfig, out_dir):
    t0 = time.perf_counter()
    grid = make_grid(cfg.grid_nx, cfg.grid_ny, cfg.ly, cfg.dealias_fraction)
    omega0, theta0 = make_initial_data(grid, cfg.seed, cfg.resolved_amp_omega(),
                                       cfg.resolved_amp_theta(), m=cfg.m)
    state0 = SimState(0.0, omega0, theta0, "full")
    params = build_params(cfg.nu, cfg.mu, cfg.l_max)
    hook = None
    if cfg.weighted_energies:
        def hook(state):
            ck = ck_functionals(state, params, cfg.m, cfg.m1)
            return {
                "energy_m_omega": weighted_norm(state.omega, cfg.m, params,
                                                with_m=True) ** 2,
                "energy_m_theta_neq": weighted_norm(
                    state.theta.project_nonzero(), cfg.m, params, with_m=True,
                    extra_x_weight="angle_dx") ** 2,
                "ck_omega": ck["ck_omega"],
                "ck_theta": ck["ck_theta"],
            }
    record, final = run_single(state0, cfg.nu, cfg.resolved_horizon(),
                               kappa=cfg.resolved_kappa(), dt_max=cfg.dt_max,
                               c_adv=cfg.c_adv, output_every=cfg.output_every,
                               linear=cfg.linear, record_hook=hook)
    name = cfg.output_name
    manifest_name = f"manifest_{name}.json"
    csv_path = os.path.join(out_dir, f"{name}.csv")
    record.to_csv(csv_path, manifest_name=manifest_name)
    summary = {
        "manifest": manifest_name,
        "nu": cfg.nu, "eps0": cfg.eps0, "delta0": params.delta0,
        "c_mu": params.c_mu, "c1_mu": params.c1_mu,
        "envelope_slope": -params.delta0 * cfg.nu ** (1.0 / 3.0),
        "healthy": record.healthy,
    }
    if cfg.weighted_energies:
        from .diagnostics import smallest_energy_coupling
        k_req, feasible = smallest_energy_coupling(record, cfg.nu)
        summary["energy_coupling_K"] = {"smallest_K": k_req, "feasible": feasible}
    if cfg.envelopes:
        summary["envelopes"] = decay_envelopes(record, cfg.nu, cfg.eps0,
                                                 params.delta0)
    om = record.series("omega_neq_l2")
    if np.any(om > 0):
        try:
            window = last_efoldings_window(record.times, om)
            fit = fit_decay_rate(record.times, om, window)
            summary["omega_neq_fit"] = {"rate": fit.rate, "r_squared": fit.r_squared,
                                        "window": list(fit.window),
                                        "prefactor": fit.prefactor}
        except ValueError:
            pass
    summary_path = os.path.join(out_dir, f"{name}_summary.json")
    atomic_write_json(summary_path, summary)
    write_manifest(out_dir, name, cfg, [csv_path, summary_path],
                   time.perf_counter() - t0)
    return EXIT_OK


def _decompose(cfg: RunConfig, out_dir):
    t0 = time.perf_counter()
    grid = make_grid(cfg.grid_nx, cfg.grid_ny, cfg.ly, cfg.dealias_fraction)
    omega0, theta0 = make_initial_data(grid, cfg.seed, cfg.resolved_amp_omega(),
                                       cfg.resolved_amp_theta(), m=cfg.m)

    def hook(full, inter, err):
        return {"forcing_norm_n": forcing_norm(inter, cfg.n)}

    record, _ = run_decomposition(omega0, theta0, cfg.nu, cfg.resolved_horizon(),
                                  kappa=cfg.resolved_kappa(), dt=cfg.dt_max,
                                  output_every=cfg.output_every, record_hook=hook)
    name = cfg.output_name
    manifest_name = f"manifest_{name}.json"
    csv_path = os.path.join(out_dir, f"{name}.csv")
    record.to_csv(csv_path, manifest_name=manifest_name)
    summary = {
        "manifest": manifest_name,
        "nu": cfg.nu,
        "max_decomp_rel_omega": float(np.max(record.series("decomp_rel_omega"))),
        "max_decomp_rel_theta": float(np.max(record.series("decomp_rel_theta"))),
        "sup_forcing_weighted": float(np.max(
            record.series("forcing_norm_n") * (record.times ** 2 + 1.0)
            / (cfg.eps0 ** 2 * cfg.nu))),
    }
    summary_path = os.path.join(out_dir, f"{name}_summary.json")
    atomic_write_json(summary_path, summary)
    write_manifest(out_dir, name, cfg, [csv_path, summary_path],
                   time.perf_counter() - t0)
    return EXIT_OK


def _scan(cfg: RunConfig, out_dir):
    t0 = time.perf_counter()
    scan_cfg = ScanConfig(nu_list=list(cfg.nu_list), amp_base=cfg.amp_base,
                          alpha=cfg.alpha, beta=cfg.beta, gamma=cfg.gamma,
                          seeds=tuple(cfg.seeds), grid_nx=cfg.grid_nx,
                          grid_ny=cfg.grid_ny, ly=cfg.ly,
                          horizon_factor=cfg.horizon_factor, dt_max=cfg.dt_max,
                          output_every=cfg.output_every, m=cfg.m,
                          workers=cfg.workers)
    result = run_scan(scan_cfg)
    name = cfg.output_name
    manifest_name = f"manifest_{name}.json"
    csv_path = os.path.join(out_dir, f"{name}_cells.csv")
    cols = ["nu", "amp_scale", "seed", "amp_omega", "amp_theta",
            "amplification_omega", "amplification_theta",
            "final_over_initial_neq", "classification", "C1", "C2", "C3"]
    lines = [f"# manifest: {manifest_name}", ",".join(cols)]
    for c in result["cells"]:
        row = dict(c)
        row.update(c.get("envelopes", {}))
        lines.append(",".join(str(row.get(k, "")) for k in cols))
    atomic_write_text(csv_path, "\n".join(lines) + "\n")
    json_path = os.path.join(out_dir, f"{name}_scan.json")
    atomic_write_json(json_path, {"manifest": manifest_name,
                                  "note": result["config_note"],
                                  "config": config_dict(cfg),
                                  "cells": result["cells"]})
    write_manifest(out_dir, name, cfg, [csv_path, json_path],
                   time.perf_counter() - t0)
    return EXIT_OK


def _check_multipliers(cfg: RunConfig, out_dir):
    t0 = time.perf_counter()
    params = build_params(cfg.nu, cfg.mu, cfg.l_max)
    sample = sample_symbol_points(params, cfg.samples, seed=cfg.seed)
    rep = check_dissipation_lower_bound(params, sample)
    rep["derivative_bounds"] = check_derivative_bounds(params, sample)
    name = cfg.output_name
    rep["manifest"] = f"manifest_{name}.json"
    path = os.path.join(out_dir, f"{name}_multipliers.json")
    atomic_write_json(path, rep)
    write_manifest(out_dir, name, cfg, [path], time.perf_counter() - t0)
    print(json.dumps({"min_slack": rep["min_slack"], "delta0": rep["delta0"],
                      "passed": rep["passed"]}))
    return EXIT_OK if rep["passed"] else EXIT_BLOWUP


def _lemma_suite(cfg: RunConfig, out_dir):
    t0 = time.perf_counter()
    grid = make_grid(cfg.grid_nx, cfg.grid_ny, cfg.ly)
    params = build_params(cfg.nu, cfg.mu, cfg.l_max)
    rep = run_inequality_suite(grid, params, n_members=cfg.members, seed=cfg.seed)
    name = cfg.output_name
    blob = {"manifest": f"manifest_{name}.json", "suites": rep}
    path = os.path.join(out_dir, f"{name}_suite.json")
    atomic_write_json(path, blob)
    write_manifest(out_dir, name, cfg, [path], time.perf_counter() - t0)
    print(json.dumps(rep))
    return EXIT_OK


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="shearlab")
    sub = p.add_subparsers(dest="cmd", required=True)
    for mode in ("simulate", "decompose", "scan", "lemma-suite"):
        sp = sub.add_parser(mode)
        sp.add_argument("--config", required=False)
        sp.add_argument("--replay", help="manifest JSON to reproduce")
        sp.add_argument("--output-dir", default=None)
    cm = sub.add_parser("check-multipliers")
    cm.add_argument("--nu", type=float)
    cm.add_argument("--mu", type=float, default=2.0 / 3.0)
    cm.add_argument("--samples", type=int, default=100000)
    cm.add_argument("--seed", type=int, default=0)
    cm.add_argument("--l-max", type=int, default=200)
    cm.add_argument("--output-name", default="check")
    cm.add_argument("--replay", help="manifest JSON to reproduce")
    cm.add_argument("--output-dir", default=None)
    tm = sub.add_parser("toy-model")
    tm.add_argument("--eta", type=float, required=True)
    fd = sub.add_parser("fit-decay")
    fd.add_argument("--csv", required=True)
    fd.add_argument("--column", default="omega_neq_l2")
    fd.add_argument("--t-lo", type=float, default=None)
    fd.add_argument("--t-hi", type=float, default=None)
    args = p.parse_args(argv)

    try:
        if args.cmd == "toy-model":
            print(repr(toy_growth_product(args.eta)))
            return EXIT_OK
        if args.cmd == "fit-decay":
            rec = DiagnosticsRecord.from_csv(args.csv)
            vals = rec.series(args.column)
            lo = args.t_lo if args.t_lo is not None else rec.times[0]
            hi = args.t_hi if args.t_hi is not None else rec.times[-1]
            fit = fit_decay_rate(rec.times, vals, (lo, hi))
            print(json.dumps({"rate": fit.rate, "r_squared": fit.r_squared,
                              "prefactor": fit.prefactor,
                              "window": list(fit.window)}))
            return EXIT_OK
        if args.cmd == "check-multipliers":
            if getattr(args, "replay", None):
                cfg = manifest_config(load_manifest(args.replay))
            elif args.nu is not None:
                cfg = RunConfig(mode="check-multipliers", nu=args.nu, mu=args.mu,
                                samples=args.samples, seed=args.seed,
                                l_max=args.l_max,
                                output_name=args.output_name).validate()
            else:
                raise ConfigError("check-multipliers needs --nu or --replay")
            return _check_multipliers(cfg, _out_dir(args))

        if getattr(args, "replay", None):
            cfg = manifest_config(load_manifest(args.replay))
        elif args.config:
            cfg = load_config(args.config)
        else:
            raise ConfigError(f"{args.cmd} needs --config or --replay")
        out_dir = _out_dir(args)
        if args.cmd == "simulate":
            cfg.mode = "simulate"
            cfg.validate()
            return _simulate(cfg, out_dir)
        if args.cmd == "decompose":
            cfg.mode = "decompose"
            cfg.validate()
            return _decompose(cfg, out_dir)
        if args.cmd == "scan":
            cfg.mode = "scan"
            cfg.validate()
            return _scan(cfg, out_dir)
        if args.cmd == "lemma-suite":
            cfg.mode = "lemma-suite"
            cfg.validate()
            return _lemma_suite(cfg, out_dir)
        raise ConfigError(f"unhandled command {args.cmd}")
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except BlowupError as e:
        print(f"numerical blow-up: {e}", file=sys.stderr)
        return EXIT_BLOWUP
    except OSError as e:
        print(f"i/o failure: {e}", file=sys.stderr)
        return EXIT_IO


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
