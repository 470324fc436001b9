"""Pseudospectral laboratory for Couette-flow stability in 2D stratified shear flow."""

__version__ = "0.1.0"

from .spectral import (Grid, SpectralField, make_grid, lambda_t_symbol,
                       apply_lambda_power, grad_L, transform_to_physical,
                       transform_to_spectral, ShearSymbols)
from .multipliers import (MultiplierParams, build_params, select_delta0,
                          phi, phi_prime, m1, m2, m3, upsilon, mult_m,
                          check_dissipation_lower_bound, check_derivative_bounds,
                          lorentzian_convolution_identity, sample_symbol_points)
from .dynamics import (SimState, Velocity, velocity_from_vorticity,
                       nonlinear_advection, step_full, step_interior, step_pair,
                       step_error, make_initial_data, BlowupError,
                       save_checkpoint, load_checkpoint)
from .diagnostics import (DiagnosticsRecord, FitResult, weighted_norm,
                          ck_functionals, decay_envelopes, fit_decay_rate,
                          inviscid_damping_ratios, run_inequality_suite,
                          toy_growth_product, forcing_norm)
from .threshold import (ScanConfig, run_cell, classify, run_scan,
                        find_stability_boundary, fit_exponents)
from .config import RunConfig, load_config, loads_config, dumps_config, ConfigError
