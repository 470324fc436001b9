"""Velocity reconstruction, nonlinear terms, and time integration.

Systems evolved in the sheared frame (see spectral.py for symbol
conventions):

  full      d/dt omega - nu Lap omega + u . grad omega = dx theta
            d/dt theta - kappa Lap theta + u . grad theta = 0

  interior  same vorticity equation driven by its own velocity, but the
            temperature is advected only by the zero-mode profile u1_0

  error     zero initial data; carries every cross term the interior
            equation dropped, including the forcing u^i_neq . grad theta^i

The stiff part (shear-tilted diffusion) is integrated exactly with the
closed-form factor exp(-nu * int (k^2 + (eta - s k)^2) ds). The remaining
terms advance with a 3-stage third-order explicit Runge-Kutta scheme whose
stage times increase monotonically, so every integrating factor applied is
a decay factor; with decreasing stage times the back-propagation factors
exp(+nu (eta - t k)^2 dt) overflow once t k is large.
"""

import numpy as np
import warnings

from .spectral import (Grid, SpectralField, zero_field, batch_ifft, batch_fft,
                       viscous_phase_increment, transform_to_spectral)
from dataclasses import dataclass


class BlowupError(RuntimeError):
    """Raised when a simulation produces non-finite fields."""

    def __init__(self, t, what="field"):
        super().__init__(f"non-finite {what} at t = {t:.6g}")
        self.t = t


@dataclass
class SimState:
    t: float
    omega: SpectralField
    theta: SpectralField
    system_tag: str = "full"  # full | interior | error

    def __post_init__(self):
        if self.system_tag not in ("full", "interior", "error"):
            raise ValueError(f"unknown system tag {self.system_tag!r}")

    @property
    def grid(self):
        return self.omega.grid

    def copy(self):
        return SimState(self.t, self.omega.copy(), self.theta.copy(), self.system_tag)

    def check_finite(self):
        if not (np.all(np.isfinite(self.omega.coeffs))
                and np.all(np.isfinite(self.theta.coeffs))):
            raise BlowupError(self.t, f"{self.system_tag} state")


@dataclass
class Velocity:
    """Lab-frame velocity components stored as sheared-frame coefficients."""

    u1: SpectralField
    u2: SpectralField

    @property
    def grid(self):
        return self.u1.grid

    def zero_mode_profile(self):
        """Physical y-profile of the horizontal zero-mode velocity u1_0."""
        col = self.u1.coeffs[0, :]
        return (np.fft.ifft(col) * col.size).real

    def max_speed(self):
        p = batch_ifft(np.stack([self.u1.coeffs, self.u2.coeffs]), self.grid)
        return float(np.max(np.abs(p)))

    def divergence_linf(self):
        """Max per-mode lab divergence i k u1 + i (eta - t k) u2; zero by construction."""
        g = self.grid
        k, eta = g.wavenumbers()
        t = self.u1.frame_time
        div = 1j * k * self.u1.coeffs + 1j * (eta - t * k) * self.u2.coeffs
        return float(np.max(np.abs(div)))


def _poisson_symbols(grid, t):
    k, eta = grid.wavenumbers()
    xi = eta - t * k
    k2 = k * k + xi * xi
    k2[0, 0] = 1.0  # only vanishing mode; psi gauge zeroes it below
    inv = 1.0 / k2
    inv[0, 0] = 0.0
    return k, xi, inv


def velocity_from_vorticity(omega: SpectralField, t=None) -> Velocity:
    """Streamfunction inversion: Lap psi = omega, u = (-dy psi, dx psi).

    The mean mode of psi is gauged to zero. Symbols use the lab Laplacian
    expressed in the sheared frame, so u is the instantaneous Biot-Savart
    velocity of the lab field.
    """
    if t is None:
        t = omega.frame_time
    g = omega.grid
    k, xi, inv = _poisson_symbols(g, t)
    psi = -omega.coeffs * inv
    u1 = SpectralField(g, -1j * xi * psi, t)
    u2 = SpectralField(g, 1j * k * psi, t)
    return Velocity(u1, u2)


def nonlinear_advection(v: Velocity, f: SpectralField, t=None) -> SpectralField:
    """Dealiased pseudospectral u . grad f with lab-frame derivative symbols."""
    if v.grid is not f.grid and v.grid != f.grid:
        raise ValueError("velocity and field live on different grids")
    if t is None:
        t = f.frame_time
    g = f.grid
    k, eta = g.wavenumbers()
    xi = eta - t * k
    stack = np.stack([v.u1.coeffs, v.u2.coeffs, 1j * k * f.coeffs, 1j * xi * f.coeffs])
    p = batch_ifft(stack, g)
    adv = p[0] * p[2] + p[1] * p[3]
    out = batch_fft(adv[None, :, :], g)[0]
    return SpectralField(g, out, t)


# ---------------------------------------------------------------------------
# Right-hand sides (non-stiff part only; diffusion is handled exactly)
# ---------------------------------------------------------------------------

_WORKSPACES = {}


def _workspace(grid, n):
    """Reusable complex stack for stage fields (one simulation per process)."""
    key = (grid.shape, n)
    buf = _WORKSPACES.get(key)
    if buf is None:
        buf = np.empty((n,) + grid.shape, dtype=complex)
        _WORKSPACES[key] = buf
    return buf


def _fill_velocity(buf1, buf2, om, inv, k, xi):
    """u1 = i*xi*inv*om, u2 = -i*k*inv*om (from psi = -om*inv)."""
    np.multiply(om, inv, out=buf2)
    np.multiply(buf2, xi, out=buf1)
    buf1 *= 1j
    buf2 *= k
    buf2 *= -1j


def _fill_grad(bufx, bufy, f, k, xi):
    np.multiply(f, k, out=bufx)
    bufx *= 1j
    np.multiply(f, xi, out=bufy)
    bufy *= 1j


def _rhs_full(arrays, t, grid, linear=False):
    om, th = arrays
    k, eta = grid.wavenumbers()
    buoy = 1j * k * th
    if linear:
        return [buoy, np.zeros_like(th)]
    xi = eta - t * k
    _, _, inv = _poisson_symbols(grid, t)
    s = _workspace(grid, 6)
    _fill_velocity(s[0], s[1], om, inv, k, xi)
    _fill_grad(s[2], s[3], om, k, xi)
    _fill_grad(s[4], s[5], th, k, xi)
    p = batch_ifft(s, grid)
    adv = batch_fft(np.stack([p[0] * p[2] + p[1] * p[3],
                              p[0] * p[4] + p[1] * p[5]]), grid)
    return [buoy - adv[0], -adv[1]]


def _rhs_interior(arrays, t, grid):
    om, th = arrays
    k, eta = grid.wavenumbers()
    xi = eta - t * k
    _, _, inv = _poisson_symbols(grid, t)
    s = _workspace(grid, 5)
    _fill_velocity(s[0], s[1], om, inv, k, xi)
    _fill_grad(s[2], s[3], om, k, xi)
    np.multiply(th, k, out=s[4])
    s[4] *= 1j
    u10 = (np.fft.ifft(s[0, 0, :]) * grid.ny).real  # zero-mode y-profile
    p = batch_ifft(s, grid)
    adv = batch_fft(np.stack([p[0] * p[2] + p[1] * p[3],
                              u10[None, :] * p[4]]), grid)
    return [1j * k * th - adv[0], -adv[1]]


def _rhs_pair(arrays, t, grid):
    """Coupled interior + error right-hand side; groups cross terms so that the
    sum of the two systems reproduces the full equations to rounding."""
    omi, thi, ome, the = arrays
    k, eta = grid.wavenumbers()
    xi = eta - t * k
    _, _, inv = _poisson_symbols(grid, t)
    s = _workspace(grid, 12)
    _fill_velocity(s[0], s[1], omi, inv, k, xi)
    _fill_velocity(s[2], s[3], ome, inv, k, xi)
    _fill_grad(s[4], s[5], omi, k, xi)
    _fill_grad(s[6], s[7], ome, k, xi)
    _fill_grad(s[8], s[9], thi, k, xi)
    _fill_grad(s[10], s[11], the, k, xi)
    u10i = (np.fft.ifft(s[0, 0, :]) * grid.ny).real
    p = batch_ifft(s, grid)
    (pu1i, pu2i, pu1e, pu2e,
     omix, omiy, omex, omey, thix, thiy, thex, they) = p
    pu1i_neq = pu1i - u10i[None, :]          # u2 has no zero mode
    u1t, u2t = pu1i + pu1e, pu2i + pu2e
    adv = batch_fft(np.stack([
        pu1i * omix + pu2i * omiy,                       # u^i . grad omega^i
        u10i[None, :] * thix,                            # u^{i,1}_0 dx theta^i
        u1t * omex + u2t * omey + pu1e * omix + pu2e * omiy,
        (pu1i_neq + pu1e) * thix + (pu2i + pu2e) * thiy
        + u1t * thex + u2t * they]), grid)
    return [1j * k * thi - adv[0], -adv[1], 1j * k * the - adv[2], -adv[3]]


def interior_forcing_coeffs(interior: SimState):
    """Spectral coefficients of u^i_neq . grad theta^i, the error-system source."""
    g = interior.grid
    t = interior.t
    k, eta = g.wavenumbers()
    xi = eta - t * k
    v = velocity_from_vorticity(interior.omega, t)
    u1 = v.u1.coeffs.copy()
    u1[0, :] = 0.0
    u2 = v.u2.coeffs.copy()
    u2[0, :] = 0.0
    th = interior.theta.coeffs
    p = batch_ifft(np.stack([u1, u2, 1j * k * th, 1j * xi * th]), g)
    out = batch_fft((p[0] * p[2] + p[1] * p[3])[None], g)[0]
    return SpectralField(g, out, t)


# ---------------------------------------------------------------------------
# Integrating-factor Runge-Kutta step (3 stages, order 3, increasing times)
# ---------------------------------------------------------------------------

def _if_rk3_step(arrays, diffusivities, rhs, t, dt, grid):
    """One step of the exact-diffusion RK3 scheme (c = 0, 1/3, 2/3).

    arrays: list of coefficient arrays; diffusivities: matching list of
    scalar diffusion coefficients; rhs(arrays, t) -> list of tendencies.
    """
    third = dt / 3.0
    j1 = viscous_phase_increment(grid, t, third)
    j2 = viscous_phase_increment(grid, t + third, third)
    j3 = viscous_phase_increment(grid, t + 2.0 * third, third)
    uniq = {}
    for d in diffusivities:
        if d not in uniq:
            uniq[d] = (np.exp(-d * j1), np.exp(-d * j2), np.exp(-d * j3))
    n1 = rhs(arrays, t)
    wa = [uniq[d][0] * (w + third * f) for w, d, f in zip(arrays, diffusivities, n1)]
    n2 = rhs(wa, t + third)
    # wb = E2 E1 w + (2 dt/3) E2 N2; every applied factor is a decay
    wb = [uniq[d][1] * (uniq[d][0] * w + 2.0 * third * f2)
          for w, d, f2 in zip(arrays, diffusivities, n2)]
    n3 = rhs(wb, t + 2.0 * third)
    out = [uniq[d][2] * uniq[d][1] * uniq[d][0] * (w + 0.25 * dt * f1)
           + 0.75 * dt * uniq[d][2] * f3
           for w, d, f1, f3 in zip(arrays, diffusivities, n1, n3)]
    return out


def _advance(state: SimState, rhs, diffs, dt, check=True) -> SimState:
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    g = state.grid
    arrays = [state.omega.coeffs, state.theta.coeffs]
    with np.errstate(invalid="ignore", over="ignore"):
        out = _if_rk3_step(arrays, diffs, rhs, state.t, dt, g)
    t1 = state.t + dt
    new = SimState(t1, SpectralField(g, out[0], t1), SpectralField(g, out[1], t1),
                   state.system_tag)
    if check:
        new.check_finite()
    return new


def step_full(state: SimState, nu, dt, kappa=None, linear=False) -> SimState:
    """Advance the full system by dt (exact diffusion + explicit RK3)."""
    if state.system_tag != "full":
        raise ValueError("step_full requires a state tagged 'full'")
    kappa = nu if kappa is None else kappa
    return _advance(state, lambda a, t: _rhs_full(a, t, state.grid, linear=linear),
                    [nu, kappa], dt)


def step_interior(state: SimState, nu, dt, kappa=None) -> SimState:
    if state.system_tag != "interior":
        raise ValueError("step_interior requires a state tagged 'interior'")
    kappa = nu if kappa is None else kappa
    return _advance(state, lambda a, t: _rhs_interior(a, t, state.grid), [nu, kappa], dt)


def step_pair(interior: SimState, error: SimState, nu, dt, kappa=None):
    """Co-step the quasi-linear pair through shared stages; returns both."""
    if interior.system_tag != "interior" or error.system_tag != "error":
        raise ValueError("step_pair requires (interior, error) tagged states")
    if abs(interior.t - error.t) > 1e-12 * max(1.0, abs(interior.t)):
        raise ValueError(f"time mismatch: interior at {interior.t}, error at {error.t}")
    kappa = nu if kappa is None else kappa
    g = interior.grid
    arrays = [interior.omega.coeffs, interior.theta.coeffs,
              error.omega.coeffs, error.theta.coeffs]
    with np.errstate(invalid="ignore", over="ignore"):
        out = _if_rk3_step(arrays, [nu, kappa, nu, kappa],
                           lambda a, t: _rhs_pair(a, t, g), interior.t, dt, g)
    t1 = interior.t + dt
    new_i = SimState(t1, SpectralField(g, out[0], t1), SpectralField(g, out[1], t1),
                     "interior")
    new_e = SimState(t1, SpectralField(g, out[2], t1), SpectralField(g, out[3], t1),
                     "error")
    new_i.check_finite()
    new_e.check_finite()
    return new_i, new_e


def step_error(state: SimState, interior: SimState, nu, dt, kappa=None) -> SimState:
    """Advance the error system against a co-evolving interior state.

    The interior is sub-stepped through the same stages internally; callers
    that also need the advanced interior should use step_pair directly.
    """
    return step_pair(interior, state, nu, dt, kappa=kappa)[1]


def suggest_dt(v: Velocity, t, c_adv=0.5, dt_max=0.01):
    """Advective step bound; shear and diffusion impose none (exact factor)."""
    g = v.grid
    kcut = np.max(np.abs(g.kx[g.dealias_mask.any(axis=1)]))
    jcut = np.max(np.abs(g.eta[g.dealias_mask.any(axis=0)]))
    p = batch_ifft(np.stack([v.u1.coeffs, v.u2.coeffs]), g)
    rate = np.max(np.abs(p[0])) * kcut + np.max(np.abs(p[1])) * (jcut + t * kcut)
    if rate <= 0.0:
        return dt_max
    return float(min(dt_max, c_adv / rate))


# ---------------------------------------------------------------------------
# Initial data
# ---------------------------------------------------------------------------

def _band_draw(rng, kband, jband):
    """Hermitian random coefficients on a fixed master band, grid-independent."""
    shape = (2 * kband + 1, 2 * jband + 1)
    c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    c_flip = np.conj(c[::-1, ::-1])
    c = 0.5 * (c + c_flip)
    c[kband, jband] = 0.0  # zero mean
    return c


def _embed_band(c, grid):
    out = np.zeros(grid.shape, dtype=complex)
    kband = (c.shape[0] - 1) // 2
    jband = (c.shape[1] - 1) // 2
    for i, k in enumerate(range(-kband, kband + 1)):
        for j, m in enumerate(range(-jband, jband + 1)):
            if abs(k) <= grid.nx // 3 and abs(m) <= grid.ny // 3:
                out[k % grid.nx, m % grid.ny] = c[i, j]
    return out


def make_initial_data(grid, seed, amp_omega, amp_theta, m=6, profile="gaussian",
                      kband=6, jband=10, envelope_factor=16.0):
    """Random band-limited, y-localized fields with exact norm calibration.

    The vorticity is rescaled so its Lambda_0^m norm equals amp_omega, the
    temperature so the <dx> Lambda_0^m norm equals amp_theta. The Gaussian
    envelope width Ly/envelope_factor keeps the data below 1e-10 outside
    |y| <= Ly/2, respecting the periodic truncation of the infinite channel.
    Deterministic in seed; a zero draw re-draws with an incremented sub-seed.
    The master band is drawn independently of the grid (so refinements see
    identical spectra); band modes a small grid cannot hold are dropped.
    """
    if amp_omega < 0.0 or amp_theta < 0.0:
        raise ValueError("amplitudes must be nonnegative")
    if profile != "gaussian":
        raise ValueError(f"unknown profile {profile!r}")
    _, yy = grid.mesh()
    sigma = grid.ly / envelope_factor
    envelope = np.exp(-0.5 * (yy / sigma) ** 2)
    env_col = np.fft.fft(envelope[0, :]) / grid.ny
    k, eta = grid.wavenumbers()
    lam_m = (1.0 + k ** 2 + eta ** 2) ** (0.5 * m)
    w_th = np.sqrt(1.0 + k ** 2) * lam_m

    def draw(sub, amp, weight):
        if amp == 0.0:
            return zero_field(grid)
        for attempt in range(8):
            rng = np.random.default_rng((seed, sub, attempt))
            c = _embed_band(_band_draw(rng, kband, jband), grid)
            phys = batch_ifft(c[None], grid)[0] * envelope
            f = transform_to_spectral(phys, grid, 0.0).dealias()
            # remove the mean with an envelope-shaped correction so the
            # field stays y-localized (a flat subtraction would not decay)
            f.coeffs[0, :] -= (f.coeffs[0, 0] / env_col[0]) * env_col
            f.dealias()
            cur = f.weighted_l2(weight)
            if cur > 0.0:
                if attempt:
                    warnings.warn(f"initial-data redraw: sub-seed {attempt}")
                f.coeffs *= amp / cur
                return f
        raise ValueError("could not draw nonzero initial data")

    return draw(0, amp_omega, lam_m), draw(1, amp_theta, w_th)


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(path, state: SimState, nu, kappa=None, seed=None, extra=None):
    g = state.grid
    meta = dict(extra or {})
    np.savez(path,
             omega=state.omega.coeffs, theta=state.theta.coeffs,
             t=np.float64(state.t), nu=np.float64(nu),
             kappa=np.float64(nu if kappa is None else kappa),
             seed=np.int64(-1 if seed is None else seed),
             tag=np.bytes_(state.system_tag.encode()),
             nx=np.int64(g.nx), ny=np.int64(g.ny), ly=np.float64(g.ly),
             dealias=np.float64(g.dealias_fraction),
             extra_keys=np.array(sorted(meta.keys()), dtype=object),
             **{f"extra_{k}": np.asarray(v) for k, v in meta.items()})


def load_checkpoint(path):
    with np.load(path, allow_pickle=True) as z:
        g = Grid(nx=int(z["nx"]), ny=int(z["ny"]), ly=float(z["ly"]),
                 dealias_fraction=float(z["dealias"]))
        t = float(z["t"])
        state = SimState(t, SpectralField(g, z["omega"].copy(), t),
                         SpectralField(g, z["theta"].copy(), t),
                         z["tag"].item().decode())
        meta = {"nu": float(z["nu"]), "kappa": float(z["kappa"]),
                "seed": int(z["seed"])}
        for k in z["extra_keys"]:
            meta[str(k)] = z[f"extra_{k}"]
    return state, meta
