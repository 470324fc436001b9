import numpy as np
import pytest

from shearlab.spectral import make_grid, zero_field
from shearlab.dynamics import SimState, make_initial_data
from shearlab.diagnostics import (weighted_norm, sqrt_m_weight, lam_weight,
                                  DiagnosticsRecord, FitResult,
                                  fit_decay_rate, last_efoldings_window,
                                  decay_envelopes, inviscid_damping_ratios,
                                  ck_functionals, toy_growth_product, forcing_norm,
                                  run_inequality_suite)
from shearlab.runs import run_single
from conftest import random_real_field


class TestWeightedNorm:
    def test_plain_l2(self, grid32):
        f = random_real_field(grid32, 1)
        assert np.isclose(weighted_norm(f, 0.0), f.l2_norm(), rtol=1e-14)

    def test_m_weight_ordering(self, grid32, params_cache):
        p = params_cache(1e-2)
        for seed in range(3):
            f = random_real_field(grid32, seed, t=2.0)
            plain = weighted_norm(f, 3.0)
            weighted = weighted_norm(f, 3.0, p, with_m=True)
            assert plain <= weighted * (1.0 + 1e-12)

    def test_nonzero_mode_exponential_bound(self, grid32, params_cache):
        p = params_cache(1e-2)
        t = 10.0
        f = random_real_field(grid32, 4, t=t).project_nonzero()
        lhs = np.exp(0.5 * p.rate * t) * weighted_norm(f, 2.0, t=t)
        rhs = weighted_norm(f, 2.0, p, with_m=True, t=t)
        assert lhs <= rhs * (1.0 + 1e-12)

    def test_dy_bound_empirical_constant(self, grid32, params_cache):
        # ||Dy Lambda^d f|| <= C nu^(-1/3) ||sqrt(M) Lambda^(d+1) f||
        p = params_cache(1e-2)
        t = 3.0
        k, eta = grid32.wavenumbers()
        xi = eta - t * k
        best = 0.0
        for seed in range(3):
            f = random_real_field(grid32, 10 + seed, t=t)
            lhs = f.weighted_l2(np.abs(xi) * lam_weight(grid32, 2.0))
            rhs = p.nu ** (-1.0 / 3.0) * weighted_norm(f, 3.0, p, with_m=True, t=t)
            best = max(best, lhs / rhs)
        assert np.isfinite(best) and best < 50.0

    def test_unknown_weight_rejected(self, grid32):
        f = random_real_field(grid32, 1)
        with pytest.raises(ValueError):
            weighted_norm(f, 0.0, extra_x_weight="bogus")


class TestCk:
    def test_zero_field(self, grid32, params_cache):
        p = params_cache(1e-2)
        st = SimState(1.0, zero_field(grid32, 1.0), zero_field(grid32, 1.0), "interior")
        ck = ck_functionals(st, p, m=3)
        assert ck["ck_omega"] == 0.0 and ck["ck_theta"] == 0.0

    def test_single_mode_closed_form(self, grid32, params_cache):
        from shearlab.multipliers import mult_m, upsilon
        p = params_cache(1e-2)
        t = 2.0
        ik, ie = 2, 3
        st = SimState(t, zero_field(grid32, t), zero_field(grid32, t), "interior")
        st.omega.coeffs[ik, ie] = 1.0
        k = grid32.kx[ik]
        eta = grid32.eta[ie]
        xi = eta - t * k
        measure = grid32.cell_measure
        mm = mult_m(p, t, k, xi)
        lam2m = (1.0 + k ** 2 + eta ** 2) ** 3.0  # m = 3
        ck = ck_functionals(st, p, m=3)
        pref = 0.5 * p.delta0
        expect_visc = p.nu * measure * (k ** 2 + xi ** 2) * mm * lam2m
        expect_enh = p.nu ** (1 / 3) * measure * np.abs(k) ** (2 / 3) * mm * lam2m
        expect_vel = measure * k ** 2 / (k ** 2 + xi ** 2) * mm * lam2m
        expect_ups = measure * upsilon(p, t, k, xi) * mm * lam2m
        assert np.isclose(ck["omega_terms"]["visc"], expect_visc, rtol=1e-12)
        assert np.isclose(ck["omega_terms"]["enh"], expect_enh, rtol=1e-12)
        assert np.isclose(ck["omega_terms"]["vel"], expect_vel, rtol=1e-12)
        assert np.isclose(ck["omega_terms"]["ups"], expect_ups, rtol=1e-12)
        assert np.isclose(ck["ck_omega"],
                          pref * (expect_visc + expect_enh + expect_vel + expect_ups))

    def test_terms_nonnegative_and_error_prefactor(self, grid32, params_cache):
        p = params_cache(1e-2)
        om, th = make_initial_data(grid32, 3, 0.2, 0.1, m=3, kband=4, jband=4,
                                   envelope_factor=8)
        st = SimState(0.0, om, th, "error")
        ck = ck_functionals(st, p, m=3)
        assert all(v >= 0.0 for v in ck["omega_terms"].values())
        assert all(v >= 0.0 for v in ck["theta_terms"].values())
        assert "ups" in ck["theta_terms"]
        assert np.isclose(ck["prefactor"], 0.25 * p.delta0)


class TestFits:
    def test_pure_exponential(self):
        t = np.linspace(0, 5, 100)
        fit = fit_decay_rate(t, np.exp(-3.0 * t), (0.0, 5.0))
        assert np.isclose(fit.rate, 3.0, atol=1e-12)
        assert np.isclose(fit.r_squared, 1.0, atol=1e-12)

    def test_modulated_exponential(self):
        t = np.linspace(0, 40, 800)
        vals = np.exp(-3.0 * t) * (2.0 + np.sin(t))
        fit = fit_decay_rate(t, vals, (0.0, 40.0))
        assert abs(fit.rate - 3.0) < 0.1

    def test_constant_series(self):
        t = np.linspace(0, 5, 50)
        fit = fit_decay_rate(t, np.full(50, 2.5), (0.0, 5.0))
        assert abs(fit.rate) < 1e-12

    def test_rejects_nonpositive(self):
        t = np.linspace(0, 1, 10)
        v = np.ones(10)
        v[4] = 0.0
        with pytest.raises(ValueError):
            fit_decay_rate(t, v, (0.0, 1.0))

    def test_recovery_over_three_efoldings(self):
        rng = np.random.default_rng(0)
        t = np.linspace(0, 10, 400)
        rate = 0.55
        vals = np.exp(-rate * t) * (1.0 + 0.01 * rng.standard_normal(t.size))
        lo, hi = last_efoldings_window(t, vals, 3.0)
        fit = fit_decay_rate(t, vals, (lo, hi))
        assert abs(fit.rate - rate) / rate < 0.01

    def test_window_helper_with_underflow(self):
        t = np.linspace(0, 100, 101)
        vals = np.exp(-t)
        vals[60:] = 0.0
        lo, hi = last_efoldings_window(t, vals, 3.0)
        assert hi <= t[59] and hi - lo >= 2.9


class TestEnvelopes:
    def test_degenerate_zero_run(self, grid32):
        st = SimState(0.0, zero_field(grid32), zero_field(grid32), "full")
        rec, _ = run_single(st, 1e-2, 3.0, output_every=1.0)
        env = decay_envelopes(rec, 1e-2, 0.05, 5e-3)
        assert env == {"C1": 0.0, "C2": 0.0, "C3": 0.0}

    def test_linear_run_constants_order_one(self, params_cache):
        p = params_cache(1e-2)
        g = make_grid(64, 128, 16 * np.pi)
        eps0 = 0.05
        om0, _ = make_initial_data(g, 2, eps0 * 1e-2 ** (1 / 3), 0.0, m=6)
        st = SimState(0.0, om0, zero_field(g), "full")
        rec, _ = run_single(st, 1e-2, 25.0, linear=True, output_every=1.0)
        env = decay_envelopes(rec, 1e-2, eps0, p.delta0)
        assert 0.0 < env["C2"] < 100.0
        assert 0.0 < env["C3"] < 100.0

    def test_empty_record_rejected(self):
        rec = DiagnosticsRecord(columns=["t"])
        with pytest.raises(ValueError):
            decay_envelopes(rec, 1e-2, 0.05, 5e-3)


class TestInviscidDamping:
    def test_bounded_over_time(self, grid32):
        rng_seeds = (0, 1)
        for t in (0.0, 5.0, 20.0):
            for seed in rng_seeds:
                f = random_real_field(grid32, seed, t=t, band="dealias")
                r1, r2, ok = inviscid_damping_ratios(f, t=t)
                assert ok
                assert r1 < 50.0 and r2 < 50.0

    def test_single_mode_closed_form(self, grid32):
        t = 4.0
        om = zero_field(grid32, t)
        ik = 1
        ie = int(np.rint(t / grid32.eta_spacing))  # eta = t*k -> xi_lab = 0
        om.coeffs[ik, ie] = 1.0
        r1, r2, ok = inviscid_damping_ratios(om, t=t, b=2.0, b1=1.0)
        k = grid32.kx[ik]
        eta = grid32.eta[ie]
        lam = np.sqrt(1 + k ** 2 + eta ** 2)
        # u1 = -i xi psi = 0 at xi = 0; u2 = ik psi, |psi| = 1/k^2
        assert np.isclose(r1, 0.0, atol=1e-14)
        expect_r2 = (1 + t) ** 2 * lam * (1.0 / abs(k)) / lam ** 3
        assert np.isclose(r2, expect_r2, rtol=1e-12)

    def test_zero_mode_only(self, grid32):
        om = zero_field(grid32)
        om.coeffs[0, 3] = 1.0
        r1, r2, ok = inviscid_damping_ratios(om)
        assert (r1, r2, ok) == (0.0, 0.0, False)

    def test_parameter_validation(self, grid32):
        f = random_real_field(grid32, 0)
        with pytest.raises(ValueError):
            inviscid_damping_ratios(f, b=1.0)


class TestToyModel:
    def test_unit_value(self):
        assert abs(toy_growth_product(1.0) - np.exp(np.pi)) < 1e-12

    def test_bounded_by_e_3pi(self):
        for eta in (1.0, 1e2, 1e6):
            assert toy_growth_product(eta) < np.exp(3 * np.pi)

    def test_monotone(self):
        vals = [toy_growth_product(e) for e in (1.0, 10.0, 1e3, 1e5)]
        assert all(b >= a for a, b in zip(vals, vals[1:]))

    def test_domain(self):
        with pytest.raises(ValueError):
            toy_growth_product(0.5)


class TestForcingNorm:
    def test_zero_without_nonzero_vorticity(self, grid32):
        st = SimState(0.0, zero_field(grid32), zero_field(grid32), "interior")
        st.theta.coeffs[0, 2] = 1.0
        assert forcing_norm(st, 3) == 0.0

    def test_x_independent_theta_structure(self, grid32):
        # only the u2 dy(theta) piece survives, and it is positive
        om, _ = make_initial_data(grid32, 6, 0.5, 0.0, m=3, kband=4, jband=4,
                                  envelope_factor=8)
        st = SimState(0.0, om, zero_field(grid32), "interior")
        st.theta.coeffs[0, 2] = 0.3
        st.theta.coeffs[0, -2 % grid32.ny] = 0.3
        assert forcing_norm(st, 3) > 0.0


class TestInequalitySuite:
    def test_report_finite(self, params_cache):
        p = params_cache(1e-2)
        g = make_grid(32, 32, 2 * np.pi)
        rep = run_inequality_suite(g, p, n_members=4, seed=5, kband=4, jband=4)
        for name, entry in rep.items():
            assert np.isfinite(entry["max_ratio"]), name
            assert entry["max_ratio"] > 0.0, name

    def test_zero_velocity_commutators(self, grid32, params_cache):
        from shearlab.diagnostics import (_suite_zero_commutator,
                                          _suite_nonzero_commutator,
                                          _suite_transport, sqrt_m_weight,
                                          upsilon_weight)
        p = params_cache(1e-2)
        t = 1.0
        f = random_real_field(grid32, 0, t=t, band="dealias")
        g_field = random_real_field(grid32, 1, t=t, band="dealias")
        w = zero_field(grid32, t)
        sm = sqrt_m_weight(p, t, grid32)
        ups = upsilon_weight(p, t, grid32)
        for fn in (_suite_transport, _suite_zero_commutator,
                   _suite_nonzero_commutator):
            lhs, rhs = fn(grid32, p, t, f, g_field, w, sm, ups)
            assert lhs == 0.0

    def test_l1_single_mode_closed_form(self, grid32, params_cache):
        from shearlab.diagnostics import _suite_l1
        p = params_cache(1e-2)
        t = 3.0
        f = zero_field(grid32, t)
        ik, ie = 2, 5
        f.coeffs[ik, ie] = 2.0
        lhs, rhs = _suite_l1(grid32, p, t, f, None, None, None, None)
        k = grid32.kx[ik]
        eta = grid32.eta[ie]
        xi = eta - t * k
        lam = np.sqrt(1 + k ** 2 + eta ** 2)
        assert np.isclose(lhs, 2 * np.pi * 2.0, rtol=1e-14)
        expect_rhs = np.sqrt(grid32.cell_measure * (k ** 2 + xi ** 2) * lam ** 2 * 4.0) \
            / (1 + t)
        assert np.isclose(rhs, expect_rhs, rtol=1e-12)


class TestEnergyCoupling:
    def _record(self, e_om, e_th, ck_om, ck_th):
        from shearlab.diagnostics import DiagnosticsRecord
        rec = DiagnosticsRecord(columns=["t", "energy_m_omega",
                                         "energy_m_theta_neq", "ck_omega",
                                         "ck_theta"])
        for i in range(len(e_om)):
            rec.append({"t": float(i), "energy_m_omega": e_om[i],
                        "energy_m_theta_neq": e_th[i], "ck_omega": ck_om[i],
                        "ck_theta": ck_th[i]})
        return rec

    def test_hand_computed_threshold(self):
        from shearlab.diagnostics import smallest_energy_coupling
        rec = self._record([1.0, 1.1, 0.9], [1.0, 0.5, 0.3],
                           [0.0, 0.0, 0.0], [0.0, 0.0, 0.0])
        k, feasible = smallest_energy_coupling(rec, 1.0, t_min=0.0)
        assert feasible and np.isclose(k, 0.1 / 0.5)

    def test_infeasible_interval_flagged(self):
        from shearlab.diagnostics import smallest_energy_coupling
        rec = self._record([1.0, 1.1], [1.0, 1.2], [0.0, 0.0], [0.0, 0.0])
        k, feasible = smallest_energy_coupling(rec, 1.0, t_min=0.0)
        assert not feasible

    def test_decaying_run_needs_no_help(self):
        from shearlab.diagnostics import smallest_energy_coupling
        rec = self._record([1.0, 0.8, 0.6], [1.0, 0.9, 0.8],
                           [0.1, 0.1, 0.1], [0.05, 0.05, 0.05])
        k, feasible = smallest_energy_coupling(rec, 1.0, t_min=0.0)
        assert feasible and k == 0.0

    def test_missing_columns_rejected(self):
        from shearlab.diagnostics import smallest_energy_coupling, DiagnosticsRecord
        rec = DiagnosticsRecord(columns=["t"])
        with pytest.raises(ValueError, match="weighted energies"):
            smallest_energy_coupling(rec, 1.0)


class TestRecord:
    def test_strictly_increasing_times(self):
        rec = DiagnosticsRecord(columns=["t", "a"])
        rec.append({"t": 0.0, "a": 1.0})
        with pytest.raises(ValueError):
            rec.append({"t": 0.0, "a": 2.0})

    def test_column_mismatch(self):
        rec = DiagnosticsRecord(columns=["t", "a"])
        with pytest.raises(ValueError):
            rec.append({"t": 0.0, "b": 1.0})

    def test_csv_round_trip(self, tmp_path):
        rec = DiagnosticsRecord(columns=["t", "a"])
        rec.append({"t": 0.0, "a": 1.2345678901234567})
        rec.append({"t": 1.0, "a": 2.0e-300})
        path = tmp_path / "r.csv"
        rec.to_csv(path, manifest_name="m.json")
        back = DiagnosticsRecord.from_csv(path)
        assert back.columns == rec.columns
        assert np.array_equal(back.series("a"), rec.series("a"))

    def test_fit_result_validation(self):
        with pytest.raises(ValueError):
            FitResult(rate=1.0, prefactor=1.0, r_squared=1.5, window=(0, 1))
