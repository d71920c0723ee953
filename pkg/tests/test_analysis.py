"""Tests for analytic error estimates, blockade closed forms, sweeps and the leakage study."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import darkgate.analysis as analysis
from darkgate.analysis import (
    DEFAULT_BTAU_GRID,
    ErrorBudget,
    LeakageCase,
    adiabatic_phase,
    analytic_error,
    blockade_eigenvalues,
    blockade_error_budget,
    blockade_propagation,
    blockade_square_solution,
    leakage_case_from_params,
    leakage_cases,
    leakage_study,
    load_leakage_data,
    magic_rabi,
    optimal_rabi,
    split_pulse_phase,
    square_residual_average,
    sweep_btau,
    weak_drive_phase,
)
from darkgate.config import GateConfig
from darkgate.hamiltonians import build_h2_blockade
from darkgate.pulses import PulseEnvelope, PulseShape, make_pulse, make_shifted_gaussian, make_square

TWO_PI = 2 * math.pi


class TestAnalyticError:
    def test_eta(self):
        b = analytic_error(1e-6, 1.0, 0.10472)
        assert b.eta == pytest.approx(37.5, abs=0.1)

    def test_btau_1e6(self):
        B = 1.0
        b = analytic_error(B / 1e6, B, 0.10472 * B)
        assert b.total == pytest.approx(3.75e-5, rel=5e-3)

    def test_components_sum(self):
        b = analytic_error(0.01, 2.0, 0.3)
        assert b.total == pytest.approx(b.decay_control + b.decay_target + b.decay_ryry)
        assert min(b.decay_control, b.decay_target, b.decay_ryry, b.rotation, b.phase) >= 0
        assert b.lower_bound == pytest.approx(0.01)

    def test_formula(self):
        g, B, om = 0.02, 3.0, 0.4
        expected = math.pi * g / 4 * (5 / om + om / (4 * B**2))
        assert analytic_error(g, B, om).total == pytest.approx(expected, rel=1e-14)

    def test_minimum(self):
        g, B = 1e-3, 1.0
        grid = np.linspace(0.5, 10.0, 9501)
        totals = [analytic_error(g, B, om).total for om in grid]
        best = grid[int(np.argmin(totals))]
        assert best == pytest.approx(optimal_rabi(B), abs=grid[1] - grid[0])
        assert min(totals) == pytest.approx(math.sqrt(5) * math.pi * g / (4 * B), rel=1e-6)

    @pytest.mark.parametrize("args", [(0.0, 1.0, 1.0), (1.0, -1.0, 1.0), (1.0, 1.0, 0.0)])
    def test_rejects_non_positive(self, args):
        with pytest.raises(ValueError):
            analytic_error(*args)


class TestBlockadeBudget:
    def test_average_matches_exchange_formula(self):
        g, B, om = 1e-4, 10.0, 1.0
        avg = blockade_error_budget(g, B, om)["average"]
        assert avg.total == pytest.approx(analytic_error(g, B, om).total, rel=1e-12)

    def test_rows(self):
        rows = blockade_error_budget(1e-4, 10.0, 1.0, square=True, delta_B=0.1)
        assert rows["00"].total == 0.0
        assert rows["01"].decay_target == pytest.approx(math.pi * 1e-4)
        assert rows["11"].rotation == pytest.approx(1 / 200)
        assert rows["11"].phase == pytest.approx(math.pi * 0.1 / 100)
        assert rows["10"].rotation == 0.0

    def test_budget_total(self):
        b = ErrorBudget(1, 2, 3, 4, 5)
        assert b.total == 15


class TestBlockadeClosedForm:
    def test_resonant_two_pi(self):
        c1, cr = blockade_square_solution(1.0, 0.0, TWO_PI)
        assert c1 == pytest.approx(-1.0, abs=1e-15) and abs(cr) < 1e-15

    def test_magic_point(self):
        bsh = 5.0
        om = magic_rabi(bsh)
        c1, cr = blockade_square_solution(om, bsh, TWO_PI / om)
        assert abs(cr) < 1e-14
        # c1 = exp(-1j * phi): the state acquires phi = sqrt(3) pi.
        assert (-np.angle(c1) - math.sqrt(3) * math.pi) % TWO_PI == pytest.approx(0.0, abs=1e-12)

    def test_eigenvalues(self):
        lm, lp = blockade_eigenvalues(1.0, 2.0)
        bar = math.sqrt(5)
        assert (lm, lp) == (pytest.approx(0.5 * (2 - bar)), pytest.approx(0.5 * (2 + bar)))

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.01, 10.0), st.floats(0.0, 10.0), st.floats(0.0, 20.0), st.floats(-math.pi, math.pi))
    def test_normalised(self, om, bsh, t, phase):
        c1, cr = blockade_square_solution(om, bsh, t, laser_phase=phase)
        assert abs(c1) ** 2 + abs(cr) ** 2 == pytest.approx(1.0, abs=1e-13)

    @settings(max_examples=20, deadline=None)
    @given(st.floats(0.1, 5.0), st.floats(0.0, 5.0))
    def test_satisfies_schrodinger(self, om, bsh):
        H = build_h2_blockade(om, bsh).entries
        t = np.linspace(0.1, 10.0, 400)
        dt = 1e-5
        c = np.array(blockade_square_solution(om, bsh, t))
        deriv = (np.array(blockade_square_solution(om, bsh, t + dt)) - np.array(blockade_square_solution(om, bsh, t - dt))) / (2 * dt)
        rhs = -1j * (H @ c)
        scale = np.abs(rhs).max()
        assert np.abs(deriv - rhs).max() <= 1e-6 * scale

    def test_laser_phase(self):
        _, cr0 = blockade_square_solution(1.0, 0.5, 1.3)
        _, cr = blockade_square_solution(1.0, 0.5, 1.3, laser_phase=0.7)
        assert cr == pytest.approx(cr0 * np.exp(0.7j))

    def test_square_residual_average(self):
        bsh = 10.0
        om = 0.1 * bsh
        bar = math.hypot(bsh, om)
        assert square_residual_average(om, bsh, TWO_PI / om) == pytest.approx(om**2 / (2 * bar**2), rel=1e-3)


class TestMagicRabi:
    def test_k1(self):
        assert magic_rabi(3.0, 1) == pytest.approx(3.0 / math.sqrt(3))

    def test_k2(self):
        assert magic_rabi(3.0, 2) == pytest.approx(3.0 / math.sqrt(15))

    @pytest.mark.parametrize("k", [0, -1, 1.5])
    def test_invalid_k(self, k):
        with pytest.raises(ValueError):
            magic_rabi(1.0, k)

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_propagated_residual(self, k):
        bsh = 2.0
        om = magic_rabi(bsh, k)
        res = blockade_propagation(om, bsh, TWO_PI / om, tol=1e-12, samples=2)
        assert abs(res.final_state.amplitudes[1]) <= 1e-10


class TestAdiabaticPhase:
    def test_zero_drive(self):
        off = PulseEnvelope(PulseShape.SINE, 1.0, 0.0, 0.0)
        assert adiabatic_phase(off, 3.0) == 0.0

    def test_weak_drive_limit(self):
        pulse = make_shifted_gaussian(1.0, 0.2, TWO_PI)
        bsh = pulse.peak / 0.05
        assert adiabatic_phase(pulse, bsh) == pytest.approx(weak_drive_phase(pulse, bsh), rel=1e-2)

    def test_negative(self):
        assert adiabatic_phase(make_shifted_gaussian(1.0, 0.2, TWO_PI), 50.0) < 0

    def test_sensitivity_scaling(self):
        # d(phi)/dB = int Omega^2 dt / (4 B^2) in the weak-drive limit; for a square 2 pi pulse
        # of Rabi frequency Omega this is pi Omega / (2 B^2).
        T = 1.0
        pulse = make_square(T, TWO_PI)
        om = TWO_PI / T
        for bsh in (40 * om, 80 * om):
            d = 1e-4 * bsh
            slope = (adiabatic_phase(pulse, bsh + d) - adiabatic_phase(pulse, bsh - d)) / (2 * d)
            assert slope == pytest.approx(math.pi * om / (2 * bsh**2), rel=0.01)

    def test_matches_propagation(self):
        T = 1.0
        pulse = make_shifted_gaussian(T, 0.2 * T, TWO_PI)
        bsh = 10 * pulse.peak
        from darkgate.propagator import propagate
        from darkgate.quantum_core import H2_BASIS, StateVector

        drive = build_h2_blockade(1.0, 0.0).entries
        static = build_h2_blockade(0.0, bsh).entries
        res = propagate(lambda t: static + pulse(t) * drive, StateVector.basis_state(H2_BASIS, ("r", "1")),
                        0.0, T, tol=1e-12)
        phi_num = -np.angle(res.final_state.amplitudes[0])
        assert phi_num == pytest.approx(adiabatic_phase(pulse, bsh), rel=1e-2)

    def test_split_phase(self):
        cfg = GateConfig(interaction="blockade")
        half = make_pulse(cfg.target_shape, cfg.target_duration / 2, math.pi, cfg.sigma_ratio)
        assert split_pulse_phase(cfg) == pytest.approx(2 * adiabatic_phase(half, cfg.B))


class TestSweep:
    def test_default_grid(self):
        assert len(DEFAULT_BTAU_GRID) == 13
        assert DEFAULT_BTAU_GRID[0] == pytest.approx(1e3) and DEFAULT_BTAU_GRID[-1] == pytest.approx(1e7)

    def test_empty_grid(self):
        assert sweep_btau(GateConfig(), [], ["gaussian"]) == []

    def test_unsorted_grid(self):
        with pytest.raises(ValueError):
            sweep_btau(GateConfig(), [1e5, 1e4], ["gaussian"])

    def test_monotone_and_references(self):
        grid = [1e3, 1e4, 1e5, 1e6, 1e7]
        rows = sweep_btau(GateConfig(), grid, ["gaussian"])
        E = [r.E_simulated for r in rows]
        assert all(b < a for a, b in zip(E, E[1:]))
        for r in rows:
            assert r.E_simulated == 1.0 - r.F
            assert r.E_analytic == pytest.approx(37.5 / r.btau, rel=1e-3)
            assert r.E_analytic_dashed - r.E_analytic == pytest.approx(0.10472**2 / 16)

    def test_order_stable_in_parallel(self):
        grid = [1e4, 1e6]
        serial = sweep_btau(GateConfig(), grid, ["square", "gaussian"])
        parallel = sweep_btau(GateConfig(), grid, ["square", "gaussian"], jobs=2)
        assert serial == parallel
        assert [(r.pulse_shape, r.btau) for r in serial] == [
            ("square", 1e4), ("square", 1e6), ("gaussian", 1e4), ("gaussian", 1e6)]

    def test_failure_recorded(self, monkeypatch):
        import darkgate.protocol as protocol

        def fail(cfg):
            if cfg.btau > 1e5:
                raise RuntimeError("diverged")
            return real(cfg)

        real = protocol.run_gate
        monkeypatch.setattr(protocol, "run_gate", fail)
        rows = sweep_btau(GateConfig(), [1e4, 1e6], ["gaussian"])
        assert rows[0].notes == "" and math.isfinite(rows[0].F)
        assert "diverged" in rows[1].notes and math.isnan(rows[1].F)


class TestLeakageData:
    def test_round_trip_published(self):
        data = load_leakage_data()
        by_case = {c["case"]: c for c in data["cases"]}
        assert [by_case[k]["C3_GHz_um3"] for k in range(1, 6)] == [-64.4, 65.3, -51.4, -68.2, -33.0]
        assert [by_case[k]["btau_1e6_300K"] for k in range(1, 6)] == [6.5, 6.8, 4.7, 7.1, 2.7]
        assert [by_case[k]["btau_1e6_4K"] for k in range(1, 6)] == [32.6, 35.5, 23.1, 38.5, 10.7]
        assert [by_case[k]["stark_field_V_per_m"] for k in range(1, 6)] == [15.4, 5.36, 20.1, 14.2, 34.7]
        assert [by_case[k]["missing_population"] for k in range(1, 6)] == [1.4e-5, 1.7e-6, 5.5e-5, 9.5e-6, 6.4e-6]
        assert by_case[2]["r_c"] == "112s1/2 1/2"

    def test_cases(self):
        cases = leakage_cases()
        assert sorted(cases) == [1, 2, 3, 4, 5]
        c = cases[2]
        assert (c.b_rr_ratio, c.delta_rr_mhz, c.b_ab_ratio, c.delta_ab_mhz) == (0.66, -259.0, -2.17, 1990.0)
        assert c.duration == pytest.approx(TWO_PI / (0.1 * TWO_PI * 350.0))

    def test_dispersive_flags(self):
        cases = leakage_cases()
        flags = {k: cases[k].is_dispersive() for k in cases}
        assert flags == {1: (False, False), 2: (True, True), 3: (True, False), 4: (False, False), 5: (True, True)}

    def test_version_check(self, tmp_path):
        path = tmp_path / "cases.json"
        path.write_text(json.dumps({"version": 2, "cases": []}))
        with pytest.raises(ValueError, match="version"):
            leakage_cases(path)

    def test_params_file(self, tmp_path):
        path = tmp_path / "case.json"
        path.write_text(json.dumps({"b_rr_ratio": 0.66, "delta_rr_mhz": -259.0, "b_ab_ratio": -2.17,
                                    "delta_ab_mhz": 1990.0}))
        case = leakage_case_from_params(path)
        assert case == LeakageCase(0, 0.66, -259.0, -2.17, 1990.0)


class TestLeakageStudy:
    @pytest.mark.parametrize("case, published", [(2, 1.7e-6), (4, 9.5e-6), (5, 6.4e-6)])
    def test_published_cases(self, case, published):
        p = leakage_study(leakage_cases()[case])
        assert published / 2 <= p <= published * 2

    def test_three_state_floor(self):
        p = leakage_study(LeakageCase(0, 0.0, 100.0, 0.0, 100.0))
        assert 0.0 <= p <= 6e-6

    def test_gauge_of_coupling_signs(self):
        base = leakage_cases()[4]
        flipped = LeakageCase(4, -base.b_rr_ratio, base.delta_rr_mhz, -base.b_ab_ratio, base.delta_ab_mhz)
        assert leakage_study(flipped) == pytest.approx(leakage_study(base), rel=1e-6)

    def test_flipped_relative_defect_sign(self):
        # Cases 1 and 3 land on their published values only with the opposite relative
        # sign between the two leakage defects; cases 2 and 4 then move far away.
        import dataclasses

        cases = leakage_cases()
        flipped = {k: leakage_study(dataclasses.replace(c, delta_ab_mhz=-c.delta_ab_mhz)) for k, c in cases.items()}
        for k in (1, 3):
            assert cases[k].expected / 2 <= flipped[k] <= cases[k].expected * 2
        for k in (2, 4):
            assert flipped[k] > 10 * cases[k].expected
