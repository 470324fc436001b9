"""Weighted norms, energy/dissipation functionals, decay fits, and inequality suites.

Norm conventions: discrete L2 sums over retained modes stand in for the
continuum integrals, with the eta-lattice sum (spacing pi/Ly) replacing the
unbounded-frequency integral. Empirical-constant suites never assert an
absolute constant, only finiteness and stability under grid refinement.
"""

import functools
import numpy as np
from dataclasses import dataclass, field as _field

from .spectral import (SpectralField, batch_ifft, batch_fft, inner_product)
from .multipliers import mult_m, upsilon
from .dynamics import velocity_from_vorticity, interior_forcing_coeffs


# ---------------------------------------------------------------------------
# symbol helpers (cached per (params, t, grid))
# ---------------------------------------------------------------------------

@functools.lru_cache(maxsize=8)
def _cached_sqrt_m(params, t, grid):
    k, eta = grid.wavenumbers()
    xi = eta - t * k
    kk = np.broadcast_to(k, grid.shape)
    return np.sqrt(mult_m(params, t, kk, xi))


@functools.lru_cache(maxsize=8)
def _cached_upsilon(params, t, grid):
    k, eta = grid.wavenumbers()
    xi = eta - t * k
    kk = np.broadcast_to(k, grid.shape)
    return upsilon(params, t, kk, xi)


def sqrt_m_weight(params, t, grid):
    """Per-mode sqrt(M(t, k, xi)) at lab frequency xi = eta - t*k."""
    return _cached_sqrt_m(params, float(t), grid)


def upsilon_weight(params, t, grid):
    return _cached_upsilon(params, float(t), grid)


_X_WEIGHTS = ("none", "abs_dx_1_3", "angle_dx", "angle_dx_1_3", "dx")


def x_weight_array(grid, kind, power=1.0):
    """x-direction weight column: none, |Dx|^(1/3), <dx>^power, <dx>^(1/3), or Dx."""
    k = grid.kx[:, None]
    if kind == "none":
        return np.ones_like(k)
    if kind == "abs_dx_1_3":
        return np.abs(k) ** (1.0 / 3.0)
    if kind == "angle_dx":
        return (1.0 + k ** 2) ** (0.5 * power)
    if kind == "angle_dx_1_3":
        return (1.0 + k ** 2) ** (1.0 / 6.0)
    if kind == "dx":
        return np.abs(k)
    raise ValueError(f"unknown x-weight {kind!r}; expected one of {_X_WEIGHTS}")


def lam_weight(grid, m):
    k, eta = grid.wavenumbers()
    return (1.0 + k ** 2 + eta ** 2) ** (0.5 * m)


def weighted_norm(field: SpectralField, m, params=None, with_m=False,
                  extra_x_weight="none", t=None):
    """Parseval norm with weight [sqrt(M)] * Lambda_t^m * X(k) at xi = eta - t k."""
    if t is None:
        t = field.frame_time
    g = field.grid
    w = lam_weight(g, m) * x_weight_array(g, extra_x_weight)
    if with_m:
        if params is None:
            raise ValueError("with_m requires multiplier params")
        w = w * sqrt_m_weight(params, t, g)
    return field.weighted_l2(w)


# ---------------------------------------------------------------------------
# records and fits
# ---------------------------------------------------------------------------

@dataclass
class DiagnosticsRecord:
    """Column-oriented time series; first column is always t."""

    columns: list
    rows: list = _field(default_factory=list)
    healthy: bool = True

    def append(self, row):
        if list(row.keys()) != self.columns:
            missing = set(self.columns) ^ set(row.keys())
            raise ValueError(f"row keys do not match columns: {missing}")
        if self.rows and row["t"] <= self.rows[-1]["t"]:
            raise ValueError("times must be strictly increasing")
        self.rows.append(dict(row))

    @property
    def times(self):
        return np.array([r["t"] for r in self.rows])

    def series(self, name):
        return np.array([r[name] for r in self.rows])

    def to_csv(self, path, manifest_name=""):
        with open(path, "w") as f:
            if manifest_name:
                f.write(f"# manifest: {manifest_name}\n")
            f.write(",".join(self.columns) + "\n")
            for r in self.rows:
                f.write(",".join(repr(float(r[c])) for c in self.columns) + "\n")

    @classmethod
    def from_csv(cls, path):
        with open(path) as f:
            lines = [ln.strip() for ln in f if ln.strip() and not ln.startswith("#")]
        cols = lines[0].split(",")
        rec = cls(columns=cols)
        for ln in lines[1:]:
            rec.append(dict(zip(cols, map(float, ln.split(",")))))
        return rec


@dataclass
class FitResult:
    rate: float
    prefactor: float
    r_squared: float
    window: tuple

    def __post_init__(self):
        if not (0.0 <= self.r_squared <= 1.0 + 1e-12):
            raise ValueError("r_squared outside [0, 1]")


def fit_decay_rate(times, values, window) -> FitResult:
    """Least squares of log(value) against t on [window[0], window[1]]."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    lo, hi = window
    sel = (times >= lo) & (times <= hi)
    if np.count_nonzero(sel) < 2:
        raise ValueError("window holds fewer than two samples")
    if np.any(values[sel] <= 0.0):
        raise ValueError("non-positive values inside fit window")
    x = times[sel]
    y = np.log(values[sel])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else max(0.0, 1.0 - float(np.sum(resid ** 2)) / ss_tot)
    return FitResult(rate=float(-slope), prefactor=float(np.exp(intercept)),
                     r_squared=min(r2, 1.0), window=(float(lo), float(hi)))


def last_efoldings_window(times, values, n_efold=3.0, floor=1e-120):
    """Window covering the trailing n_efold e-foldings of a decaying series."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    ok = values > floor * np.max(values)
    if not np.any(ok):
        raise ValueError("series has no usable positive samples")
    i_hi = int(np.nonzero(ok)[0][-1])
    target = values[i_hi] * np.exp(n_efold)
    before = np.nonzero(ok & (values >= target) & (times <= times[i_hi]))[0]
    i_lo = int(before[-1]) if before.size else int(np.nonzero(ok)[0][0])
    if i_lo >= i_hi:
        i_lo = max(0, i_hi - 2)
    return float(times[i_lo]), float(times[i_hi])


# ---------------------------------------------------------------------------
# decay-statement diagnostics
# ---------------------------------------------------------------------------

def base_norms(state, params_rate=0.0):
    """Plain L2 norms of the decomposition the decay statements quantify."""
    om, th = state.omega, state.theta
    v = velocity_from_vorticity(om, state.t)
    u1n = v.u1.project_nonzero()
    return {
        "omega0_l2": om.project_zero().l2_norm(),
        "theta0_l2": th.project_zero().l2_norm(),
        "omega_neq_l2": om.project_nonzero().l2_norm(),
        "theta_neq_l2": th.project_nonzero().l2_norm(),
        "u1_neq_l2": u1n.l2_norm(),
        "u2_l2": v.u2.l2_norm(),
    }


def decay_envelopes(record: DiagnosticsRecord, nu, eps0, delta0):
    """Fitted envelope constants of the three decay statements.

    C1: zero modes;  C2: velocity with inviscid-damping weights;
    C3: nonzero modes with the enhanced-dissipation factor. Degenerate 0/0
    entries contribute 0.
    """
    if not record.rows:
        raise ValueError("empty record")
    t = record.times
    scale = eps0 * nu ** (1.0 / 3.0)
    if scale == 0.0:
        return {"C1": 0.0, "C2": 0.0, "C3": 0.0}
    grow = np.exp(delta0 * nu ** (1.0 / 3.0) * t)
    c1 = (record.series("omega0_l2")
          + nu ** (-1.0 / 3.0) * record.series("theta0_l2")) / scale
    c2 = (record.series("u1_neq_l2") + (1.0 + t) * record.series("u2_l2")) \
        * (1.0 + t) * grow / scale
    c3 = (record.series("omega_neq_l2")
          + nu ** (-1.0 / 3.0) * record.series("theta_neq_l2")) * grow / scale
    return {"C1": float(np.max(c1)), "C2": float(np.max(c2)), "C3": float(np.max(c3))}


def inviscid_damping_ratios(omega_neq: SpectralField, t=None, b=2.0, b1=1.0):
    """Damping ratios r1, r2 of the velocity against the shifted vorticity norm.

    r1 = (1+t)   ||Lambda^b1 u1_neq|| / ||Lambda^(b+b1) omega_neq||
    r2 = (1+t)^2 ||Lambda^b1 u2||     / ||Lambda^(b+b1) omega_neq||
    Returns (r1, r2, ok); zero denominator reports (0, 0, False).
    """
    if b < 2.0 or b1 <= 0.0:
        raise ValueError("need b >= 2 and b1 > 0")
    if t is None:
        t = omega_neq.frame_time
    om = omega_neq.project_nonzero()
    denom = weighted_norm(om, b + b1)
    if denom == 0.0:
        return 0.0, 0.0, False
    v = velocity_from_vorticity(om, t)
    r1 = (1.0 + t) * weighted_norm(v.u1.project_nonzero(), b1) / denom
    r2 = (1.0 + t) ** 2 * weighted_norm(v.u2, b1) / denom
    return float(r1), float(r2), True


def ck_functionals(state, params, m, m1=1.0):
    """Dissipation functionals CK(omega) and CK(theta) for one system state.

    Interior (and full) states use prefactor delta0/2 and the <dx>^m1 weight
    on theta; error states use delta0/4, the <dx>^(1/3) weight, and carry an
    extra Upsilon term on the theta side.
    """
    g = state.grid
    t = state.t
    is_error = state.system_tag == "error"
    pref = 0.25 * params.delta0 if is_error else 0.5 * params.delta0
    k, eta = g.wavenumbers()
    xi = eta - t * k
    sm = sqrt_m_weight(params, t, g)
    ups = upsilon_weight(params, t, g)
    lam_m = lam_weight(g, m)
    grad = np.sqrt(k ** 2 + xi ** 2)
    abs13 = np.broadcast_to(np.abs(k) ** (1.0 / 3.0), g.shape)
    k2 = k ** 2 + xi ** 2
    k2 = np.where(k2 > 0.0, k2, 1.0)
    vel2_sym = np.abs(k) / np.sqrt(k2)      # grad (-Lap)^(-1) dx, the u2 term
    nu = params.nu

    om_w = sm * lam_m
    om_terms = {
        "visc": nu * state.omega.weighted_l2(grad * om_w) ** 2,
        "enh": nu ** (1.0 / 3.0) * state.omega.weighted_l2(abs13 * om_w) ** 2,
        "vel": state.omega.weighted_l2(vel2_sym * om_w) ** 2,
        "ups": state.omega.weighted_l2(np.sqrt(ups) * om_w) ** 2,
    }
    ck_om = pref * sum(om_terms.values())

    if is_error:
        xw = x_weight_array(g, "angle_dx_1_3")
    else:
        xw = x_weight_array(g, "angle_dx", power=m1)
    th_w = sm * lam_m * xw
    th_terms = {
        "visc": nu * state.theta.weighted_l2(grad * th_w) ** 2,
        "enh": nu ** (1.0 / 3.0) * state.theta.weighted_l2(abs13 * th_w) ** 2,
    }
    if is_error:
        th_terms["ups"] = state.theta.weighted_l2(np.sqrt(ups) * th_w) ** 2
    ck_th = pref * sum(th_terms.values())

    return {"ck_omega": float(ck_om), "ck_theta": float(ck_th),
            "omega_terms": {k_: float(v) for k_, v in om_terms.items()},
            "theta_terms": {k_: float(v) for k_, v in th_terms.items()},
            "prefactor": float(pref)}


def forcing_norm(interior_state, n):
    """||<dx> Lambda_t^n (u^i_neq . grad theta^i)||, the error-system source size."""
    f = interior_forcing_coeffs(interior_state)
    return weighted_norm(f, n, extra_x_weight="angle_dx")


def smallest_energy_coupling(record: DiagnosticsRecord, nu, t_min=None):
    """Smallest K with d/dt(E_omega + K nu^(-2/3) E_theta) + CK_omega
    + K nu^(-2/3) CK_theta <= 0 discretely on the recorded long-time rows.

    The statement leaves K as an unspecified large constant; this reports the
    empirical threshold instead of asserting a value. Returns (K, feasible):
    K = 0 means the inequality needs no theta help; feasible = False flags
    intervals no K can fix (positive omega-side with non-negative theta-side).
    """
    need = ("energy_m_omega", "energy_m_theta_neq", "ck_omega", "ck_theta")
    for c in need:
        if c not in record.columns:
            raise ValueError(f"record lacks column {c}; enable weighted energies")
    t = record.times
    if t_min is None:
        t_min = nu ** (-1.0 / 6.0)
    e_om = record.series("energy_m_omega")
    e_th = record.series("energy_m_theta_neq") * nu ** (-2.0 / 3.0)
    ck_om = record.series("ck_omega")
    ck_th = record.series("ck_theta") * nu ** (-2.0 / 3.0)
    dt = np.diff(t)
    sel = t[1:] >= t_min
    a = (np.diff(e_om) / dt + 0.5 * (ck_om[1:] + ck_om[:-1]))[sel]
    b = (np.diff(e_th) / dt + 0.5 * (ck_th[1:] + ck_th[:-1]))[sel]
    k_req = 0.0
    feasible = True
    for ai, bi in zip(a, b):
        if ai <= 0.0 and bi <= 0.0:
            continue
        if bi < 0.0:
            k_req = max(k_req, ai / (-bi))
        elif ai > 0.0:
            feasible = False
    return float(k_req), feasible


def toy_growth_product(eta):
    """Accumulated reaction growth exp(pi * sum_{k<=sqrt(eta)} k^(-5/3))."""
    if eta < 1.0:
        raise ValueError("eta must be >= 1")
    kmax = int(np.floor(np.sqrt(eta)))
    ks = np.arange(1, kmax + 1, dtype=float)
    return float(np.exp(np.pi * np.sum(ks ** (-5.0 / 3.0))))


# ---------------------------------------------------------------------------
# nonlinear-interaction inequality suites
# ---------------------------------------------------------------------------

def _product(a_coeffs, b_coeffs, grid):
    p = batch_ifft(np.stack([a_coeffs, b_coeffs]), grid)
    return batch_fft((p[0] * p[1])[None], grid)[0]


def _random_band_field(grid, rng, kband, jband, t):
    from .dynamics import _band_draw, _embed_band
    c = _embed_band(_band_draw(rng, kband, jband), grid)
    f = SpectralField(grid, c, t)
    n = f.l2_norm()
    if n > 0:
        f.coeffs /= n
    return f


def _suite_transport(grid, params, t, f, g_field, w, sm, ups):
    d, b = 4.0, 3.0
    lam_d = lam_weight(grid, d)
    v = velocity_from_vorticity(w, t)
    adv = _advection_coeffs(v, f, t)
    lhs = abs(inner_product(SpectralField(grid, adv * lam_d, t),
                            SpectralField(grid, f.coeffs * lam_d, t)))
    nfd = weighted_norm(f, d)
    rhs = (1.0 + t) * (weighted_norm(w, b) * nfd ** 2
                       + weighted_norm(w, d) * nfd * weighted_norm(f, b))
    return lhs, rhs


def _advection_coeffs(v, f, t):
    g = f.grid
    k, eta = g.wavenumbers()
    xi = eta - t * k
    p = batch_ifft(np.stack([v.u1.coeffs, v.u2.coeffs,
                             1j * k * f.coeffs, 1j * xi * f.coeffs]), g)
    return batch_fft((p[0] * p[2] + p[1] * p[3])[None], g)[0]


def _suite_reaction(grid, params, t, f, g_field, w, sm, ups):
    b = 3.0
    k, eta = grid.wavenumbers()
    xi = eta - t * k
    lam_b = lam_weight(grid, b)
    v = velocity_from_vorticity(w, t)
    prod = _product(v.u2.coeffs, 1j * xi * f.coeffs, grid)
    wgt = sm * lam_b
    lhs = abs(inner_product(SpectralField(grid, prod * wgt, t),
                            SpectralField(grid, g_field.coeffs * wgt, t)))
    grad = np.sqrt(k ** 2 + xi ** 2)
    nu = params.nu
    rhs = SpectralField(grid, v.u2.coeffs, t).weighted_l2(grad * wgt) * (
        nu ** (-1.0 / 3.0) * f.weighted_l2(wgt)
        * g_field.weighted_l2(np.sqrt(ups) * wgt)
        + nu ** (1.0 / 6.0) * f.weighted_l2(np.abs(xi) * lam_b)
        * g_field.weighted_l2(wgt))
    return lhs, rhs


def _commutator_coeffs(vel_coeffs, f, wgt, grid, t):
    """W(v df/dx) - v d/dx(W f) for a scalar velocity component v."""
    k = grid.kx[:, None]
    a = _product(vel_coeffs, 1j * k * f.coeffs, grid) * wgt
    b = _product(vel_coeffs, 1j * k * (wgt * f.coeffs), grid)
    return a - b


def _suite_zero_commutator(grid, params, t, f, g_field, w, sm, ups):
    b = 3.0
    lam_b = lam_weight(grid, b)
    wgt = sm * lam_b
    v = velocity_from_vorticity(w, t)
    v0 = np.zeros_like(v.u1.coeffs)
    v0[0, :] = v.u1.coeffs[0, :]
    comm = _commutator_coeffs(v0, f, wgt, grid, t)
    lhs = abs(inner_product(SpectralField(grid, comm, t),
                            SpectralField(grid, g_field.coeffs * wgt, t)))
    x13 = x_weight_array(grid, "abs_dx_1_3")
    rhs = weighted_norm(w, b) * f.weighted_l2(x13 * wgt) * g_field.weighted_l2(x13 * wgt)
    return lhs, rhs


def _suite_nonzero_commutator(grid, params, t, f, g_field, w, sm, ups):
    b = 3.0
    k, eta = grid.wavenumbers()
    xi = eta - t * k
    lam_b = lam_weight(grid, b)
    wgt = sm * lam_b
    v = velocity_from_vorticity(w, t)
    vn = v.u1.coeffs.copy()
    vn[0, :] = 0.0
    comm = _commutator_coeffs(vn, f, wgt, grid, t)
    lhs = abs(inner_product(SpectralField(grid, comm, t),
                            SpectralField(grid, f.coeffs * wgt, t)))
    x13 = x_weight_array(grid, "abs_dx_1_3")
    nf13 = f.weighted_l2(x13 * wgt)
    rhs = w.weighted_l2(wgt) * (nf13 ** 2
                                + params.nu ** (2.0 / 3.0)
                                * f.weighted_l2(np.abs(xi) * lam_b) * nf13)
    return lhs, rhs


def _suite_l1(grid, params, t, f, g_field, w, sm, ups):
    k, eta = grid.wavenumbers()
    xi = eta - t * k
    fn = f.project_nonzero()
    lhs = fn.spectral_l1()
    rhs = fn.weighted_l2(np.sqrt(k ** 2 + xi ** 2) * lam_weight(grid, 1.0)) / (1.0 + t)
    return lhs, rhs


_SUITES = {
    "transport": _suite_transport,
    "reaction": _suite_reaction,
    "zero_mode_commutator": _suite_zero_commutator,
    "nonzero_mode_commutator": _suite_nonzero_commutator,
    "l1": _suite_l1,
}
_LONG_TIME_ONLY = {"reaction", "nonzero_mode_commutator"}


def run_inequality_suite(grid, params, n_members=50, seed=1234, t_values=None,
                         kband=6, jband=8):
    """Max empirical LHS/RHS ratio of each interaction estimate on an ensemble.

    The reaction and nonzero-mode commutator suites only sample t >= nu^(-1/6)
    as their hypotheses require. Ratios are dimensionless; the pass criterion
    belongs to the caller (finiteness, refinement stability).
    """
    t0 = params.nu ** (-1.0 / 6.0)
    if t_values is None:
        t_values = (0.0, t0, 4.0 * t0)
    report = {name: {"max_ratio": 0.0, "arg_t": None} for name in _SUITES}
    for i in range(n_members):
        rng = np.random.default_rng((seed, i))
        for t in t_values:
            fields = [_random_band_field(grid, rng, kband, jband, t) for _ in range(3)]
            f, g_field, w = fields
            sm = sqrt_m_weight(params, t, grid)
            ups = upsilon_weight(params, t, grid)
            for name, fn in _SUITES.items():
                if name in _LONG_TIME_ONLY and t < t0:
                    continue
                lhs, rhs = fn(grid, params, t, f, g_field, w, sm, ups)
                if rhs == 0.0:
                    continue
                r = lhs / rhs
                if r > report[name]["max_ratio"]:
                    report[name] = {"max_ratio": float(r), "arg_t": float(t)}
    return report
