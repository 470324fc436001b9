"""Strict plain-text configuration: `key = value` lines, JSON-style scalars.

Unknown keys are rejected with line context; no environment overrides except
the output directory (SHEARLAB_OUTDIR). Times are in shear units (the Couette
rate is 1), lengths in units of the x-period 2*pi.
"""

import json
import numpy as np
from dataclasses import dataclass, field as _field, asdict


class ConfigError(ValueError):
    pass


_MODES = ("simulate", "decompose", "scan", "check-multipliers", "toy-model",
          "fit-decay", "lemma-suite")


@dataclass
class RunConfig:
    mode: str = "simulate"
    # grid
    grid_nx: int = 128
    grid_ny: int = 256
    ly: float = 16.0 * np.pi
    dealias_fraction: float = 2.0 / 3.0
    # physics
    nu: float = 1e-3
    kappa: float = -1.0              # -1 means kappa = nu
    mu: float = 2.0 / 3.0
    m: int = 6
    n: int = 3
    m1: int = 1
    eps0: float = 0.05
    # initial data
    seed: int = 0
    amp_omega: float = -1.0          # -1 means eps0 * nu^(1/3)
    amp_theta: float = -1.0          # -1 means eps0 * nu^(2/3)
    # run control
    horizon: float = -1.0            # -1 means 5 * nu^(-1/3)
    dt_max: float = 0.01
    c_adv: float = 0.5
    output_every: float = 1.0
    linear: bool = False
    envelopes: bool = True
    weighted_energies: bool = False
    l_max: int = 200
    # scan
    nu_list: list = _field(default_factory=lambda: [1e-2, 3e-3, 1e-3])
    gamma: float = 10.0
    seeds: list = _field(default_factory=lambda: [0])
    workers: int = 1
    amp_base: float = 0.05
    alpha: float = 1.0 / 3.0
    beta: float = 2.0 / 3.0
    horizon_factor: float = 5.0
    # check-multipliers / lemma-suite
    samples: int = 100000
    members: int = 50
    # fit-decay
    csv: str = ""
    column: str = "omega_neq_l2"
    t_lo: float = -1.0
    t_hi: float = -1.0
    # toy-model
    eta: float = 1.0
    # misc
    output_name: str = "run"

    def resolved_kappa(self):
        return self.nu if self.kappa < 0 else self.kappa

    def resolved_amp_omega(self):
        return self.eps0 * self.nu ** (1.0 / 3.0) if self.amp_omega < 0 else self.amp_omega

    def resolved_amp_theta(self):
        return self.eps0 * self.nu ** (2.0 / 3.0) if self.amp_theta < 0 else self.amp_theta

    def resolved_horizon(self):
        return 5.0 * self.nu ** (-1.0 / 3.0) if self.horizon < 0 else self.horizon

    def validate(self):
        if self.mode not in _MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {_MODES}")
        if self.envelopes and self.mode in ("simulate", "decompose", "scan") \
                and self.m <= 5:
            raise ConfigError(f"m = {self.m} but decay-envelope diagnostics "
                              "require m > 5")
        if self.mode == "decompose" and not (2 < self.n <= self.m - 3):
            raise ConfigError(f"error-system diagnostics need 2 < n <= m - 3; "
                              f"got n = {self.n}, m = {self.m}")
        if not (0 < self.nu <= 1):
            raise ConfigError(f"nu must lie in (0, 1], got {self.nu}")
        if not (2.0 / 3.0 <= self.mu < 1.0):
            raise ConfigError(f"mu must lie in [2/3, 1), got {self.mu}")
        return self


_FIELD_TYPES = {f: t for f, t in RunConfig.__annotations__.items()}


def _coerce(key, raw, lineno):
    try:
        val = json.loads(raw)
    except json.JSONDecodeError:
        raise ConfigError(f"line {lineno}: cannot parse value {raw!r} for {key}")
    want = _FIELD_TYPES[key]
    if want is float and isinstance(val, (int, float)) and not isinstance(val, bool):
        return float(val)
    if want is int and isinstance(val, int) and not isinstance(val, bool):
        return val
    if want is bool and isinstance(val, bool):
        return val
    if want is str and isinstance(val, str):
        return val
    if want is list and isinstance(val, list):
        return val
    raise ConfigError(f"line {lineno}: {key} expects {want.__name__}, got {val!r}")


def loads_config(text) -> RunConfig:
    cfg = RunConfig()
    seen = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        setattr(cfg, key, _coerce(key, raw, lineno))
    return cfg.validate()


def load_config(path) -> RunConfig:
    with open(path) as f:
        return loads_config(f.read())


def dumps_config(cfg: RunConfig) -> str:
    lines = []
    for key in _FIELD_TYPES:
        lines.append(f"{key} = {json.dumps(getattr(cfg, key))}")
    return "\n".join(lines) + "\n"


def config_dict(cfg: RunConfig) -> dict:
    return asdict(cfg)
