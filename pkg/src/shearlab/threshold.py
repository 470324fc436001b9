"""Stability-threshold laboratory: amplitude sweeps, classification, exponent fits.

The decay theory proves only the stable side (initial vorticity ~ nu^(1/3),
temperature ~ nu^(2/3) stay small and decay); the classifications below are
operational definitions, labeled as such in output metadata, not claims of
proved instability.
"""

import numpy as np
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as _field

from .spectral import make_grid
from .dynamics import SimState, make_initial_data, BlowupError
from .runs import run_single
from .diagnostics import decay_envelopes


@dataclass
class ScanConfig:
    nu_list: list
    amp_base: float = 0.05           # amplitude law prefactor a
    alpha: float = 1.0 / 3.0         # A_omega = a nu^alpha
    beta: float = 2.0 / 3.0          # A_theta = a nu^beta
    gamma: float = 10.0              # stability threshold
    seeds: tuple = (0,)
    grid_nx: int = 128
    grid_ny: int = 256
    ly: float = 16.0 * np.pi
    horizon_factor: float = 5.0      # horizon = factor * nu^(-1/3)
    dt_max: float = 0.01
    output_every: float = 1.0
    m: int = 6
    workers: int = 1
    classification_note: str = _field(
        default="operational: the stable side is the proved regime; "
                "'transient'/'unstable' labels are measurement conventions")

    def __post_init__(self):
        if any(not (0.0 < nu <= 1.0) for nu in self.nu_list):
            raise ValueError("viscosities must lie in (0, 1]")
        if self.gamma <= 1.0:
            raise ValueError("Gamma must exceed 1")

    def horizon(self, nu):
        return self.horizon_factor * nu ** (-1.0 / 3.0)


def run_cell(nu, amp_omega, amp_theta, seed, grid=None, horizon=None,
             delta0=0.0, eps0=None, m=6, dt_max=0.01, output_every=1.0,
             kappa=None, c_adv=0.5):
    """One full simulation; returns the cell record with amplification data.

    Amplification is sup_t ||omega_neq(t)|| / ||omega_neq(0)|| (and the theta
    analog). A numerical blow-up marks the cell unstable-by-divergence with
    the blow-up time recorded.
    """
    if grid is None:
        grid = make_grid(128, 256, 16.0 * np.pi)
    if horizon is None:
        horizon = 5.0 * nu ** (-1.0 / 3.0)
    omega0, theta0 = make_initial_data(grid, seed, amp_omega, amp_theta, m=m)
    state0 = SimState(0.0, omega0, theta0, "full")
    cell = {
        "nu": nu, "amp_omega": amp_omega, "amp_theta": amp_theta, "seed": seed,
        "horizon": horizon, "grid": [grid.nx, grid.ny], "ly": grid.ly, "m": m,
    }
    try:
        record, final = run_single(state0, nu, horizon, kappa=kappa, dt_max=dt_max,
                                   c_adv=c_adv, output_every=output_every)
    except BlowupError as e:
        cell.update({"status": "blowup", "blowup_time": e.t,
                     "amplification_omega": float("inf"),
                     "amplification_theta": float("inf"),
                     "final_over_initial_neq": float("inf")})
        return cell
    om = record.series("omega_neq_l2")
    th = record.series("theta_neq_l2")
    cell["status"] = "ok"
    cell["amplification_omega"] = float(np.max(om) / om[0]) if om[0] > 0 else 1.0
    cell["amplification_theta"] = float(np.max(th) / th[0]) if th[0] > 0 else 1.0
    e_init = om[0] ** 2 + th[0] ** 2
    e_final = om[-1] ** 2 + th[-1] ** 2
    cell["final_over_initial_neq"] = float(e_final / e_init) if e_init > 0 else 0.0
    cell["max_wrap_frac"] = float(np.max(record.series("wrap_frac")))
    if eps0 is not None and delta0 > 0.0:
        cell["envelopes"] = decay_envelopes(record, nu, eps0, delta0)
    cell["record"] = record
    return cell


def classify(cell, gamma=10.0):
    """stable / transient / unstable by amplification and terminal energy."""
    if cell["status"] == "blowup" or not np.isfinite(cell["amplification_omega"]):
        return "unstable"
    amp = max(cell["amplification_omega"], cell["amplification_theta"])
    if amp <= gamma and cell["final_over_initial_neq"] < 1.0:
        return "stable"
    if amp > gamma ** 2:
        return "unstable"
    return "transient"


_PARAM_CACHE = {}


def _delta0_for(nu, mu=2.0 / 3.0):
    key = (nu, mu)
    if key not in _PARAM_CACHE:
        from .multipliers import build_params
        _PARAM_CACHE[key] = build_params(nu, mu)
    return _PARAM_CACHE[key].delta0


def _cell_job(args):
    cfg, nu, amp_scale, seed = args
    amp_om = amp_scale * nu ** cfg.alpha
    amp_th = amp_scale * nu ** cfg.beta
    grid = make_grid(cfg.grid_nx, cfg.grid_ny, cfg.ly)
    cell = run_cell(nu, amp_om, amp_th, seed, grid=grid, horizon=cfg.horizon(nu),
                    delta0=_delta0_for(nu), eps0=amp_scale, m=cfg.m,
                    dt_max=cfg.dt_max, output_every=cfg.output_every)
    cell.pop("record", None)
    cell["amp_scale"] = amp_scale
    cell["classification"] = classify(cell, cfg.gamma)
    return cell


def find_stability_boundary(cfg: ScanConfig, nu, cell_fn=None, tol_factor=1.1,
                            scale_lo=None, scale_hi=None, max_iters=24):
    """Bisect in the amplitude prefactor for the largest stable scale at one nu.

    cell_fn(cfg, nu, scale, seed) -> classification, injectable for synthetic
    oracles. Returns (scale_star, n_runs) or raises if no bracket exists in
    the scanned range.
    """
    if cell_fn is None:
        def cell_fn(cfg, nu, scale, seed):
            return _cell_job((cfg, nu, scale, seed))["classification"]
    seed = cfg.seeds[0]
    lo = scale_lo if scale_lo is not None else cfg.amp_base
    hi = scale_hi if scale_hi is not None else cfg.amp_base
    runs = 0
    while cell_fn(cfg, nu, lo, seed) != "stable":
        lo /= 2.0
        runs += 1
        if lo < 1e-8 or runs > max_iters:
            raise RuntimeError(f"no stable amplitude found down to {lo} at nu={nu}")
    while cell_fn(cfg, nu, hi, seed) == "stable":
        hi *= 2.0
        runs += 1
        if hi > 1e8 or runs > max_iters:
            raise RuntimeError(f"no unstable amplitude found up to {hi} at nu={nu}")
    while hi / lo > tol_factor and runs < max_iters:
        mid = np.sqrt(lo * hi)
        if cell_fn(cfg, nu, mid, seed) == "stable":
            lo = mid
        else:
            hi = mid
        runs += 1
    return float(np.sqrt(lo * hi)), runs


def fit_exponents(boundaries):
    """Regress log(boundary amplitude) on log(nu); slope estimates the exponent.

    boundaries: list of (nu, amp_star). Returns (exponent, stderr, details).
    """
    if len(boundaries) < 3:
        raise ValueError("need boundaries at >= 3 viscosities for a regression")
    nus = np.array([b[0] for b in boundaries], dtype=float)
    amps = np.array([b[1] for b in boundaries], dtype=float)
    if np.any(amps <= 0.0):
        raise ValueError("non-positive boundary amplitude")
    x = np.log(nus)
    y = np.log(amps)
    n = x.size
    coef = np.polyfit(x, y, 1)
    slope = float(coef[0])
    resid = y - np.polyval(coef, x)
    dof = max(1, n - 2)
    sxx = float(np.sum((x - x.mean()) ** 2))
    stderr = float(np.sqrt(np.sum(resid ** 2) / dof / sxx))
    return slope, stderr, {"n": n, "intercept": float(coef[1]),
                           "residual_rms": float(np.sqrt(np.mean(resid ** 2)))}


def _boundaries_from_cells(cells):
    """Per-nu geometric-mean boundary between the last stable and first
    non-stable amplitude scale, where the scan ladder brackets one."""
    out = []
    for nu in sorted({c["nu"] for c in cells}):
        ladder = sorted((c for c in cells if c["nu"] == nu),
                        key=lambda c: c["amp_scale"])
        stable = [c["amp_scale"] for c in ladder if c["classification"] == "stable"]
        other = [c["amp_scale"] for c in ladder if c["classification"] != "stable"]
        if stable and other and min(other) > max(stable):
            out.append((nu, float(np.sqrt(max(stable) * min(other)))))
    return out


def run_scan(cfg: ScanConfig, amp_scales=None):
    """Grid scan over (nu, amplitude scale, seed); deterministic merge order.

    When the amplitude ladder brackets the stability boundary at three or
    more viscosities, the result carries the exponent regression as well.
    """
    if amp_scales is None:
        amp_scales = [cfg.amp_base]
    jobs = [(cfg, nu, s, seed)
            for nu in cfg.nu_list for s in amp_scales for seed in cfg.seeds]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            cells = list(ex.map(_cell_job, jobs))
    else:
        cells = [_cell_job(j) for j in jobs]
    cells.sort(key=lambda c: (c["nu"], c["amp_scale"], c["seed"]))
    result = {"config_note": cfg.classification_note, "cells": cells}
    boundaries = _boundaries_from_cells(cells)
    if len(boundaries) >= 3:
        slope, stderr, info = fit_exponents(boundaries)
        result["boundaries"] = [[nu, amp] for nu, amp in boundaries]
        result["exponent_fit"] = {"slope": slope, "stderr": stderr, **info}
    return result
