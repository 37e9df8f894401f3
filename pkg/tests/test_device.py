"""Transistor-model tests: frozen hand-computed values plus the model's
structural identities (region continuity, monotonicity, small-signal and
noise consistency)."""

import math

import numpy as np
import pytest

from memcell_sim.constants import SILICON
from memcell_sim.device import (MosBias, MosParams, NoiseParams,
                                ProcessDoping, RegionError, default_params,
                                drain_current, noise, process_parameters,
                                small_signal, threshold_voltage)


def betafet(beta=1e-3, vt0=0.5, gamma=0.4, phi2=0.7, lam=0.0, polarity="nmos"):
    return MosParams.from_beta(beta, vt0=vt0, gamma=gamma, phi_f_abs2=phi2,
                               lam=lam, polarity=polarity)


class TestThresholdVoltage:
    def test_zero_bias_collapses_to_vt0(self):
        assert threshold_voltage(betafet(), 0.0) == 0.5

    def test_body_effect_values(self):
        # hand evaluation: VT = 0.5 + 0.4*(sqrt(0.7+vsb) - sqrt(0.7))
        assert threshold_voltage(betafet(), 1.0) == pytest.approx(
            0.6868721818, abs=1e-9)
        assert threshold_voltage(betafet(), 2.0) == pytest.approx(
            0.8226030584, abs=1e-9)

    def test_strictly_increasing_in_vsb(self):
        p = betafet()
        vts = [threshold_voltage(p, v) for v in np.linspace(0, 3, 40)]
        assert all(b > a for a, b in zip(vts, vts[1:]))

    def test_constant_when_gamma_zero(self):
        p = betafet(gamma=0.0)
        assert {threshold_voltage(p, v) for v in (0.0, 0.5, 2.5)} == {0.5}

    def test_negative_vsb_rejected(self):
        with pytest.raises(ValueError):
            threshold_voltage(betafet(), -0.1)


class TestProcessParameters:
    def test_intrinsic_substrate_gives_zero_phi(self):
        d = ProcessDoping(n_sub=SILICON.ni_300k, n_gate=1e20, temperature=300.0)
        pp = process_parameters(d, tox=5e-7)
        assert pp.phi_f_substrate == 0.0

    def test_phi_f_substrate_1e17(self):
        # -(kT/q)*ln(1e17/1.45e10) with kT/q ~ 0.02586 V; the quoted
        # value -0.4071 was derived with kT/q rounded to 0.02585
        d = ProcessDoping(n_sub=1e17, n_gate=1e20, temperature=300.0)
        pp = process_parameters(d, tox=5e-7)
        assert pp.phi_f_substrate == pytest.approx(-0.4072277, abs=1e-6)
        assert pp.phi_f_substrate == pytest.approx(-0.4071, abs=2.5e-4)

    def test_gamma_1e17_5nm(self):
        # sqrt(2*eps_si*q*1e17)/Cox with Cox = 6.906e-7 F/cm^2
        d = ProcessDoping(n_sub=1e17, n_gate=1e20)
        pp = process_parameters(d, tox=5e-7)
        assert pp.gamma == pytest.approx(0.2638, abs=1e-4)

    def test_chain_is_consistent(self):
        d = ProcessDoping(n_sub=1e17, n_gate=1e20, n_ss=1e10)
        pp = process_parameters(d, tox=5e-7)
        cox = SILICON.eps_ox / 5e-7
        assert pp.phi_ms == pp.phi_f_substrate - pp.phi_f_gate
        assert pp.q_ss == pytest.approx(SILICON.q_electron * 1e10)
        assert pp.v_fb == pytest.approx(pp.phi_ms - pp.q_ss / cox)
        phi2 = abs(2 * pp.phi_f_substrate)
        expect_vt0 = pp.v_fb + phi2 + math.sqrt(
            2 * SILICON.q_electron * SILICON.eps_si * 1e17 * phi2) / cox
        assert pp.vt0 == pytest.approx(expect_vt0, rel=1e-12)

    def test_invalid_doping_rejected(self):
        with pytest.raises(ValueError):
            ProcessDoping(n_sub=-1e17, n_gate=1e20)
        with pytest.raises(ValueError):
            ProcessDoping(n_sub=1e17, n_gate=1e20, temperature=0.0)


class TestDrainCurrent:
    def test_cutoff(self):
        assert drain_current(betafet(), MosBias(vgs=0.4, vds=1.0)) == 0.0

    def test_saturation_value(self):
        # (beta/2)*(vgs-VT)^2 = 0.5e-3*0.25
        i = drain_current(betafet(), MosBias(vgs=1.0, vds=1.0))
        assert i == pytest.approx(125e-6, rel=1e-12)

    def test_triode_value(self):
        # beta*(0.45)*(0.1)
        i = drain_current(betafet(), MosBias(vgs=1.0, vds=0.1))
        assert i == pytest.approx(45e-6, rel=1e-12)

    @pytest.mark.parametrize("lam", [0.0, 0.04])
    @pytest.mark.parametrize("vgs", [0.8, 1.2, 2.0])
    def test_region_boundary_continuity(self, lam, vgs):
        p = betafet(lam=lam)
        vt = threshold_voltage(p, 0.0)
        vov = vgs - vt
        lin = p.beta * (vov - 0.5 * vov) * vov * (1 + lam * vov)
        sat = 0.5 * p.beta * vov * vov * (1 + lam * vov)
        i = drain_current(p, MosBias(vgs=vgs, vds=vov))
        assert abs(lin - sat) <= 1e-15 * max(1.0, i)
        assert abs(i - sat) <= 1e-15 * max(1.0, i)

    @pytest.mark.parametrize("lam", [0.0, 0.04])
    def test_monotone_in_vds(self, lam):
        p = betafet(lam=lam)
        vds = np.linspace(0.0, 2.5, 120)
        i = [drain_current(p, MosBias(1.2, v, 0.3)) for v in vds]
        assert all(b >= a for a, b in zip(i, i[1:]))

    def test_monotone_in_vgs(self):
        p = betafet(lam=0.04)
        vgs = np.linspace(0.0, 2.5, 120)
        i = [drain_current(p, MosBias(v, 1.0, 0.3)) for v in vgs]
        assert all(b >= a for a, b in zip(i, i[1:]))

    def test_pmos_sign_symmetry(self):
        n = betafet()
        p = betafet(polarity="pmos")
        for vgs, vds in [(1.0, 1.0), (1.0, 0.1), (0.4, 1.0)]:
            i_n = drain_current(n, MosBias(vgs, vds, 0.0))
            i_p = drain_current(p, MosBias(-vgs, -vds, 0.0))
            assert i_p == -i_n


class TestSmallSignal:
    def test_gm_value(self):
        ss = small_signal(betafet(), MosBias(1.0, 1.0))
        assert ss.gm == pytest.approx(0.5e-3, rel=1e-12)

    def test_rds_value_uses_lam_free_current(self):
        ss = small_signal(betafet(lam=0.04), MosBias(1.0, 1.0))
        assert ss.rds == pytest.approx(200e3, rel=1e-12)

    def test_rds_infinite_without_lam(self):
        assert small_signal(betafet(), MosBias(1.0, 1.0)).rds == math.inf

    def test_vdsat_equals_overdrive(self):
        ss = small_signal(betafet(), MosBias(1.0, 1.0))
        assert ss.vdsat == pytest.approx(0.5, rel=1e-12)

    def test_gm_squared_identity(self):
        p = betafet()
        for vgs in (0.8, 1.0, 1.7):
            ss = small_signal(p, MosBias(vgs, 2.0))
            assert ss.gm ** 2 == pytest.approx(2 * p.beta * ss.id, rel=1e-9)

    def test_gm_matches_finite_difference(self):
        p = betafet()
        b = MosBias(1.0, 1.0)
        h = 1e-6
        fd = (drain_current(p, MosBias(1.0 + h, 1.0))
              - drain_current(p, MosBias(1.0 - h, 1.0))) / (2 * h)
        assert small_signal(p, b).gm == pytest.approx(fd, rel=1e-4)

    def test_region_error_outside_saturation(self):
        with pytest.raises(RegionError):
            small_signal(betafet(), MosBias(1.0, 0.2))
        with pytest.raises(RegionError):
            small_signal(betafet(), MosBias(0.3, 1.0))


class TestNoise:
    def test_thermal_value(self):
        # 8kT*gm/3 at 300 K with gm = 0.5 mS
        r = noise(0.5e-3, 125e-6, betafet(), NoiseParams())
        assert r.in_sq == pytest.approx(5.524e-24, rel=1e-4)

    def test_eta_scales_thermal(self):
        r = noise(0.5e-3, 125e-6, betafet(), NoiseParams(eta=0.2))
        assert r.in_sq == pytest.approx(6.6288e-24, rel=1e-4)

    def test_input_referred_thermal(self):
        r = noise(0.5e-3, 125e-6, betafet(), NoiseParams())
        assert r.veq_sq == pytest.approx(2.2096e-17, rel=1e-4)

    def test_increasing_in_temperature(self):
        p = betafet()
        vals = [noise(0.5e-3, 125e-6, p, NoiseParams(), temperature=t).in_sq
                for t in (250.0, 300.0, 350.0)]
        assert vals[0] < vals[1] < vals[2]

    def test_flicker_decreasing_in_frequency(self):
        p = betafet()
        vals = [noise(0.5e-3, 125e-6, p, NoiseParams(kf=1e-24, freq=f)).in_sq
                for f in (1e2, 1e4, 1e6)]
        assert vals[0] > vals[1] > vals[2]

    def test_input_referral_identity(self):
        # with a consistent (gm, id) pair the two algebraic forms agree
        p = betafet()
        ss = small_signal(p, MosBias(1.0, 1.0))
        r = noise(ss.gm, ss.id, p, NoiseParams(kf=1e-24, freq=1e3, eta=0.1))
        assert r.veq_sq * ss.gm ** 2 == pytest.approx(r.in_sq, rel=1e-12)

    def test_gm_must_be_positive(self):
        with pytest.raises(ValueError):
            noise(0.0, 0.0, betafet(), NoiseParams())


class TestParamValidation:
    def test_from_beta_reproduces_beta(self):
        p = MosParams.from_beta(3.3e-4, vt0=0.4)
        assert p.beta == pytest.approx(3.3e-4, rel=1e-12)

    def test_bad_fields_rejected(self):
        with pytest.raises(ValueError):
            MosParams(mu0=-1, tox=5e-7, w_eff=1e-4, l_eff=1e-4, vt0=0.5)
        with pytest.raises(ValueError):
            MosParams(mu0=460, tox=5e-7, w_eff=1e-4, l_eff=1e-4, vt0=0.5,
                      gamma=-0.1)
        with pytest.raises(ValueError):
            MosParams(mu0=460, tox=5e-7, w_eff=1e-4, l_eff=1e-4, vt0=0.5,
                      polarity="cmos")
