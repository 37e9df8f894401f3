"""Solver tests: closed-form oracles (RC decay, exponential leakage,
charge conservation) and the solver's structural guarantees (event
alignment, determinism, rail bounds, singular detection)."""

import io
import math

import numpy as np
import pytest

from memcell_sim.circuit import (Capacitor, ConvergenceError, LeakageSink,
                                 MosSwitch, Netlist, OpAmpBlock, Resistor,
                                 SingularNodeError, StepPolicy, VSource,
                                 run_transient, step)
from memcell_sim.device import MosBias, drain_current
from memcell_sim.leak import LeakModel, half_life_conductance
from memcell_sim.memcell import default_switch_params
from memcell_sim.waveform import PwlWaveform, constant, pulse, pwl_eval


class TestPwl:
    def test_midpoint_interpolation(self):
        w = PwlWaveform(((0, 0), (1, 2)))
        assert pwl_eval(w, 0.5) == 1.0

    def test_clamped_after_last(self):
        w = PwlWaveform(((0, 0), (1, 2)))
        assert pwl_eval(w, 5.0) == 2.0
        assert pwl_eval(w, -1.0) == 0.0

    def test_flat_top_pulse_interior(self):
        w = PwlWaveform(((0, 0), (1e-9, 3), (41e-9, 3), (42e-9, 0)))
        assert pwl_eval(w, 20e-9) == 3.0

    def test_times_must_increase(self):
        with pytest.raises(ValueError):
            PwlWaveform(((0, 0), (0, 1)))

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            PwlWaveform(())


def _switch(gate):
    return MosSwitch(default_switch_params(), gate, a=1, b=2)


class TestStep:
    def test_isolated_capacitor_holds_charge(self):
        net = Netlist(("gnd", "n1"), (Capacitor(1e-12, a=1),), (0.0, 1.0))
        for dt in (1e-9, 1e-6, 1e-3, 10.0):
            out = step(net, [0.0, 1.0], 0.0, dt)
            assert out[1] == pytest.approx(1.0, abs=1e-12)

    def test_rc_decay_against_closed_form(self):
        # C = 1 pF in parallel with 40 Mohm, stepped to t = tau
        net = Netlist(("gnd", "n1"),
                      (Capacitor(1e-12, a=1), Resistor(40e6, a=1)),
                      (0.0, 1.0))
        tau = 40e-6
        dt = tau / 1000
        state = np.array([0.0, 1.0])
        t = 0.0
        for _ in range(1000):
            state = step(net, state, t, dt)
            t += dt
        assert state[1] == pytest.approx(math.exp(-1.0), abs=1e-3)

    def test_opamp_output_clamps_at_rail(self):
        net = Netlist(("gnd", "vin", "vout"),
                      (VSource(constant(1.0), node=1),
                       OpAmpBlock(r0=500.0, r1=1700.0, rail=2.5,
                                  input=1, output=2)),
                      (0.0, 0.0, 0.0))
        out = step(net, [0.0, 0.0, 0.0], 0.0, 1e-9)
        assert out[2] == pytest.approx(2.5, abs=1e-9)

    def test_opamp_linear_gain(self):
        net = Netlist(("gnd", "vin", "vout"),
                      (VSource(constant(0.25), node=1),
                       OpAmpBlock(r0=500.0, r1=1700.0, rail=2.5,
                                  input=1, output=2)),
                      (0.0, 0.0, 0.0))
        out = step(net, [0.0, 0.0, 0.0], 0.0, 1e-9)
        assert out[2] == pytest.approx(4.4 * 0.25, rel=1e-9)

    def test_floating_node_is_hard_error(self):
        # node 2 sits behind an off switch with no capacitor
        net = Netlist(("gnd", "n1", "n2"),
                      (Capacitor(1e-12, a=1), _switch(constant(0.0))),
                      (0.0, 1.0, 0.0))
        with pytest.raises(SingularNodeError):
            step(net, [0.0, 1.0, 0.0], 0.0, 1e-9)

    def test_node_isolated_by_off_switch_keeps_capacitor_state(self):
        net = Netlist(("gnd", "n1", "n2"),
                      (Capacitor(1e-12, a=1), Capacitor(1e-12, a=2),
                       _switch(constant(0.0))),
                      (0.0, 1.0, 0.7))
        out = step(net, [0.0, 1.0, 0.7], 0.0, 1e-3)
        assert out[1] == pytest.approx(1.0, abs=1e-12)
        assert out[2] == pytest.approx(0.7, abs=1e-12)

    def test_convergence_failure_reports_time(self):
        net = Netlist(("gnd", "n1"),
                      (Capacitor(1e-12, a=1), Resistor(1e3, a=1)),
                      (0.0, 1.0))
        with pytest.raises(ConvergenceError) as exc:
            step(net, [0.0, 1.0], 0.5, 1e-6, max_newton=1)
        assert exc.value.time == pytest.approx(0.5 + 1e-6)

    def test_bad_step_arguments(self):
        net = Netlist(("gnd", "n1"), (Capacitor(1e-12, a=1),), (0.0, 0.0))
        with pytest.raises(ValueError):
            step(net, [0.0, 0.0], 0.0, -1e-9)
        with pytest.raises(ValueError):
            step(net, [0.0, 0.0], 0.0, 1e-9, tol=0.0)


class TestRunTransient:
    def test_charge_sharing_halves_equal_caps(self):
        gate = pulse(100e-9, 300e-9, 3.0)
        net = Netlist(("gnd", "a", "b"),
                      (Capacitor(1e-12, a=1), Capacitor(1e-12, a=2),
                       _switch(gate)),
                      (0.0, 1.0, 0.0))
        tr = run_transient(net, 1e-6)
        assert tr.voltages[-1][1] == pytest.approx(0.5, abs=0.005)
        assert tr.voltages[-1][2] == pytest.approx(0.5, abs=0.005)

    def test_charge_sharing_conserves_total(self):
        gate = pulse(100e-9, 300e-9, 3.0)
        net = Netlist(("gnd", "a", "b"),
                      (Capacitor(1e-12, a=1), Capacitor(1e-12, a=2),
                       _switch(gate)),
                      (0.0, 1.2, 0.3))
        tr = run_transient(net, 1e-6)
        assert tr.voltages[-1][1] == pytest.approx(0.75, abs=0.0075)
        assert tr.voltages[-1][2] == pytest.approx(0.75, abs=0.0075)
        q0 = 1e-12 * (1.2 + 0.3)
        q1 = 1e-12 * (tr.voltages[-1][1] + tr.voltages[-1][2])
        assert abs(q1 - q0) <= 0.005 * q0

    def test_linear_leak_halves_in_one_half_life(self):
        leak = half_life_conductance(1e-12, 0.040)
        net = Netlist(("gnd", "n1"),
                      (Capacitor(1e-12, a=1), LeakageSink(leak, node=1)),
                      (0.0, 1.0))
        tr = run_transient(net, 0.040)
        assert tr.at("n1", 0.040) == pytest.approx(0.5, abs=1e-3)

    def test_grid_refinement_stays_within_tolerance(self):
        leak = half_life_conductance(1e-12, 0.040)
        net = Netlist(("gnd", "n1"),
                      (Capacitor(1e-12, a=1), LeakageSink(leak, node=1)),
                      (0.0, 1.0))
        coarse = run_transient(net, 0.040, StepPolicy(dt_coarse=100e-6))
        fine = run_transient(net, 0.040, StepPolicy(dt_coarse=50e-6))
        assert abs(coarse.at("n1", 0.040) - fine.at("n1", 0.040)) < 1e-3

    def test_event_alignment(self):
        gate = pulse(100e-9, 300e-9, 3.0)
        vsrc = PwlWaveform(((0.0, 0.0), (50e-9, 1.0), (600e-9, 1.0),
                            (650e-9, 0.0)))
        net = Netlist(("gnd", "a", "b"),
                      (VSource(vsrc, node=1), Capacitor(1e-12, a=2),
                       _switch(gate)),
                      (0.0, 0.0, 0.0))
        tr = run_transient(net, 1e-6)
        times = set(tr.times.tolist())
        for w in (gate, vsrc):
            for t in w.times:
                assert t in times

    def test_determinism(self):
        gate = pulse(100e-9, 300e-9, 3.0)
        net = Netlist(("gnd", "a", "b"),
                      (Capacitor(1e-12, a=1), Capacitor(1e-12, a=2),
                       _switch(gate)),
                      (0.0, 1.0, 0.0))
        a = run_transient(net, 1e-6)
        b = run_transient(net, 1e-6)
        assert np.array_equal(a.times, b.times)
        assert np.array_equal(a.voltages, b.voltages)

    def test_rail_bound_on_opamp_node(self):
        vin = PwlWaveform(((0.0, 0.0), (1e-6, 2.0)))
        net = Netlist(("gnd", "vin", "vout"),
                      (VSource(vin, node=1),
                       OpAmpBlock(r0=500.0, r1=1700.0, rail=2.5,
                                  input=1, output=2)),
                      (0.0, 0.0, 0.0))
        tr = run_transient(net, 1e-6, StepPolicy(dt_fine=5e-9))
        assert tr.column("vout").max() <= 2.5 + 1e-3
        assert tr.column("vout").min() >= -2.5 - 1e-3

    def test_finite_gbw_lags_first_order(self):
        # closed-loop corner = gbw/gain; after one time constant the
        # output reaches 1 - 1/e of the step
        gbw = 44e6
        gain = 4.4
        net = Netlist(("gnd", "vin", "vout"),
                      (VSource(constant(0.25), node=1),
                       OpAmpBlock(r0=500.0, r1=1700.0, rail=2.5,
                                  input=1, output=2, gbw=gbw)),
                      (0.0, 0.25, 0.0))
        tau = gain / (2 * math.pi * gbw)
        tr = run_transient(net, tau, StepPolicy(dt_fine=tau / 2000,
                                                dt_coarse=tau / 2000,
                                                window=1e-12))
        expect = gain * 0.25 * (1 - math.exp(-1.0))
        assert tr.voltages[-1][2] == pytest.approx(expect, rel=5e-3)


class TestSwitchStamp:
    def test_matches_device_current_both_orientations(self):
        p = default_switch_params()
        gate = constant(3.0)
        sw = MosSwitch(p, gate, a=1, b=2)
        net = Netlist(("gnd", "a", "b"),
                      (Capacitor(1e-12, a=1), Capacitor(1e-12, a=2), sw),
                      (0.0, 0.0, 0.0))
        from memcell_sim.circuit import _switch_current
        for va, vb in [(1.0, 0.2), (0.2, 1.0), (0.7, 0.7), (2.0, 0.0)]:
            i, _, _ = _switch_current(p, 3.0, va, vb)
            hi, lo = max(va, vb), min(va, vb)
            ref = drain_current(p, MosBias(vgs=3.0 - lo, vds=hi - lo,
                                           vsb=max(lo, 0.0)))
            assert i == pytest.approx(ref if va >= vb else -ref, rel=1e-12)

    def test_derivatives_match_finite_differences(self):
        from memcell_sim.circuit import _switch_current
        p = default_switch_params()
        h = 1e-7
        for va, vb in [(1.0, 0.2), (0.2, 1.0), (2.9, 2.0), (0.5, 0.45)]:
            _, da, db = _switch_current(p, 3.0, va, vb)
            fa = (_switch_current(p, 3.0, va + h, vb)[0]
                  - _switch_current(p, 3.0, va - h, vb)[0]) / (2 * h)
            fb = (_switch_current(p, 3.0, va, vb + h)[0]
                  - _switch_current(p, 3.0, va, vb - h)[0]) / (2 * h)
            assert da == pytest.approx(fa, rel=1e-4, abs=1e-12)
            assert db == pytest.approx(fb, rel=1e-4, abs=1e-12)


class TestNetlistValidation:
    def test_terminal_out_of_range(self):
        with pytest.raises(ValueError):
            Netlist(("gnd", "a"), (Capacitor(1e-12, a=5),), (0.0, 0.0))

    def test_no_path_to_ground(self):
        with pytest.raises(ValueError):
            Netlist(("gnd", "a", "b"),
                    (Capacitor(1e-12, a=1), Resistor(1e3, a=2, b=2)),
                    (0.0, 0.0, 0.0))

    def test_duplicate_names(self):
        with pytest.raises(ValueError):
            Netlist(("gnd", "a", "a"),
                    (Capacitor(1e-12, a=1), Capacitor(1e-12, a=2)),
                    (0.0, 0.0, 0.0))

    def test_element_field_validation(self):
        with pytest.raises(ValueError):
            Capacitor(-1e-12, a=1)
        with pytest.raises(ValueError):
            Resistor(0.0, a=1)
        with pytest.raises(ValueError):
            OpAmpBlock(r0=500, r1=1700, rail=0.0, input=1, output=2)


class TestTraceExport:
    def test_csv_full_precision_round_trip(self):
        net = Netlist(("gnd", "n1"),
                      (Capacitor(1e-12, a=1), Resistor(40e6, a=1)),
                      (0.0, 1.0))
        tr = run_transient(net, 1e-6, StepPolicy(dt_coarse=1e-7))
        buf = io.StringIO()
        tr.to_csv(buf)
        lines = buf.getvalue().strip().splitlines()
        assert lines[0] == "time,n1"
        assert len(lines) == 1 + len(tr.times)
        for i in (1, len(lines) // 2, len(lines) - 1):
            t_str, v_str = lines[i].split(",")
            k = i - 1
            assert float(t_str) == tr.times[k]
            assert float(v_str) == tr.voltages[k][1]
