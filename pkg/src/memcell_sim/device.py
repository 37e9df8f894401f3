"""Square-law (level-1) MOS transistor model.

Pure functions evaluating the large-signal I-V characteristic with body
effect and channel-length modulation, the process-parameter chain from
doping to threshold voltage, the saturation small-signal quantities, and
the thermal + flicker noise of the channel.

Conventions: NMOS equations are written directly; PMOS devices are
evaluated by sign symmetry (all terminal voltages negated, current
negated). Below threshold the channel current is defined as exactly
zero; storage-node loss is modeled separately by leakage elements in the
circuit layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .constants import SILICON, DeviceConstants

NMOS = "nmos"
PMOS = "pmos"


class RegionError(ValueError):
    """Device is biased outside the operating region an operation requires."""


@dataclass(frozen=True)
class MosParams:
    """Process and geometry description of one transistor.

    Geometry in cm; mu0 in cm^2/V-s. ``phi_f_abs2`` is the quantity
    2*|phi_F| in volts; ``lam`` is the channel-length modulation
    coefficient in 1/V.
    """

    mu0: float
    tox: float
    w_eff: float
    l_eff: float
    vt0: float
    gamma: float = 0.0
    phi_f_abs2: float = 0.7
    lam: float = 0.0
    polarity: str = NMOS

    def __post_init__(self):
        for name in ("mu0", "tox", "w_eff", "l_eff", "phi_f_abs2"):
            if getattr(self, name) <= 0:
                raise ValueError(f"MosParams.{name} must be strictly positive")
        if self.gamma < 0:
            raise ValueError("MosParams.gamma must be >= 0")
        if self.lam < 0:
            raise ValueError("MosParams.lam must be >= 0")
        if self.polarity not in (NMOS, PMOS):
            raise ValueError(f"MosParams.polarity must be {NMOS!r} or {PMOS!r}")

    @property
    def cox(self) -> float:
        """Gate-oxide capacitance per unit area, F/cm^2."""
        return SILICON.eps_ox / self.tox

    @property
    def beta(self) -> float:
        """Transconductance parameter mu0*Cox*W/L, A/V^2."""
        return self.mu0 * self.cox * self.w_eff / self.l_eff

    @classmethod
    def from_beta(cls, beta: float, vt0: float, gamma: float = 0.0,
                  phi_f_abs2: float = 0.7, lam: float = 0.0,
                  polarity: str = NMOS, w_over_l: float = 3.0,
                  tox: float = 5e-7, l_eff: float = 2.5e-5) -> "MosParams":
        """Build params backing a target beta with plausible 0.25 um geometry.

        Solves for mu0 given the oxide and aspect ratio so ``params.beta``
        reproduces ``beta`` exactly.
        """
        if beta <= 0:
            raise ValueError("beta must be strictly positive")
        cox = SILICON.eps_ox / tox
        mu0 = beta / (cox * w_over_l)
        return cls(mu0=mu0, tox=tox, w_eff=w_over_l * l_eff, l_eff=l_eff,
                   vt0=vt0, gamma=gamma, phi_f_abs2=phi_f_abs2, lam=lam,
                   polarity=polarity)


@dataclass(frozen=True)
class ProcessDoping:
    """Substrate/gate doping and surface-state density for one process."""

    n_sub: float                  # cm^-3
    n_gate: float                 # cm^-3
    n_ss: float = 0.0             # cm^-2
    temperature: float = 300.0    # K

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("ProcessDoping.temperature must be > 0")
        if self.n_sub <= 0 or self.n_gate <= 0:
            raise ValueError("doping concentrations must be > 0")
        if self.n_ss < 0:
            raise ValueError("ProcessDoping.n_ss must be >= 0")


@dataclass(frozen=True)
class MosBias:
    """Terminal voltages of one transistor: gate-source, drain-source,
    source-bulk."""

    vgs: float
    vds: float
    vsb: float = 0.0


@dataclass(frozen=True)
class NoiseParams:
    """Noise-evaluation inputs: flicker coefficient KF (F-A), eta =
    g_mbs/g_m, bandwidth delta_f (Hz) at center frequency freq (Hz)."""

    kf: float = 0.0
    eta: float = 0.0
    delta_f: float = 1.0
    freq: float = 1.0

    def __post_init__(self):
        if self.kf < 0 or self.eta < 0:
            raise ValueError("kf and eta must be >= 0")
        if self.delta_f <= 0 or self.freq <= 0:
            raise ValueError("delta_f and freq must be > 0")


@dataclass(frozen=True)
class ProcessParameters:
    """Derived electrical parameters of a doped MOS structure.

    Every intermediate of the doping -> VT0 chain is kept so each step
    can be checked independently.
    """

    phi_f_substrate: float   # V
    phi_f_gate: float        # V
    phi_ms: float            # V
    q_ss: float              # C/cm^2
    v_fb: float              # V
    gamma: float             # V^1/2
    vt0: float               # V


@dataclass(frozen=True)
class SmallSignal:
    """Saturation small-signal operating point."""

    gm: float      # S
    rds: float     # ohm, +inf when lam == 0
    vdsat: float   # V
    id: float      # A, saturation current without channel-length modulation


@dataclass(frozen=True)
class NoiseResult:
    in_sq: float    # A^2, mean-square channel noise current in delta_f
    veq_sq: float   # V^2, equivalent input noise voltage in delta_f


def threshold_voltage(p: MosParams, vsb: float) -> float:
    """Threshold voltage at source-bulk reverse bias vsb (>= 0).

    VT = VT0 + gamma*(sqrt(2|phi_F| + vsb) - sqrt(2|phi_F|)); collapses
    to VT0 at vsb = 0.
    """
    if vsb < 0:
        raise ValueError("vsb must be >= 0 (source-bulk junction reverse biased)")
    arg = p.phi_f_abs2 + vsb
    if arg < 0:
        raise ValueError("2|phi_F| + vsb must be >= 0")
    return p.vt0 + p.gamma * (math.sqrt(arg) - math.sqrt(p.phi_f_abs2))


def process_parameters(d: ProcessDoping, tox: float,
                       consts: DeviceConstants = SILICON) -> ProcessParameters:
    """Evaluate the doping -> flatband -> threshold chain for an NMOS
    structure with an n+ doped gate.

    Surface potentials carry the sign convention phi_F = -(kT/q)*ln(N/ni).
    """
    if tox <= 0:
        raise ValueError("tox must be strictly positive")
    ni = consts.ni_300k
    if d.n_sub / ni <= 0 or d.n_gate / ni <= 0:
        raise ValueError("logarithm argument must be positive")
    kt_q = consts.thermal_voltage(d.temperature)
    cox = consts.eps_ox / tox

    phi_sub = -kt_q * math.log(d.n_sub / ni)
    phi_gate = -kt_q * math.log(d.n_gate / ni)
    phi_ms = phi_sub - phi_gate
    q_ss = consts.q_electron * d.n_ss
    v_fb = phi_ms - q_ss / cox
    gamma = math.sqrt(2.0 * consts.eps_si * consts.q_electron * d.n_sub) / cox
    phi2 = abs(2.0 * phi_sub)
    vt0 = v_fb + phi2 + math.sqrt(
        2.0 * consts.q_electron * consts.eps_si * d.n_sub * phi2) / cox
    return ProcessParameters(phi_f_substrate=phi_sub, phi_f_gate=phi_gate,
                             phi_ms=phi_ms, q_ss=q_ss, v_fb=v_fb,
                             gamma=gamma, vt0=vt0)


def _nmos_current(p: MosParams, vgs: float, vds: float, vsb: float) -> float:
    if vsb < 0:
        raise ValueError("vsb must be >= 0 for an NMOS device")
    vt = threshold_voltage(p, vsb)
    vov = vgs - vt
    if vov <= 0.0:
        return 0.0
    beta = p.beta
    if vds < vov:
        return beta * (vov - 0.5 * vds) * vds * (1.0 + p.lam * vds)
    return 0.5 * beta * vov * vov * (1.0 + p.lam * vds)


def drain_current(p: MosParams, b: MosBias) -> float:
    """Large-signal drain current.

    Zero in cutoff (vgs <= VT); triode expression below vds = vgs - VT;
    square-law saturation with (1 + lam*vds) above it. The two branches
    agree exactly at the region boundary.
    """
    if p.polarity == PMOS:
        return -_nmos_current(p, -b.vgs, -b.vds, -b.vsb)
    return _nmos_current(p, b.vgs, b.vds, b.vsb)


def small_signal(p: MosParams, b: MosBias) -> SmallSignal:
    """Saturation small-signal quantities gm, rds and vdsat.

    The chain uses the lam-free saturation current ID = beta/2*(vgs-VT)^2,
    so gm = sqrt(2*beta*ID) = beta*(vgs-VT) and vdsat = sqrt(2*ID/beta) =
    vgs - VT hold as identities; rds = 1/(lam*ID), reported as +inf for
    lam = 0.
    """
    if p.polarity == PMOS:
        vgs, vds, vsb = -b.vgs, -b.vds, -b.vsb
    else:
        vgs, vds, vsb = b.vgs, b.vds, b.vsb
    vt = threshold_voltage(p, vsb)
    vov = vgs - vt
    if vov <= 0.0 or vds < vov:
        raise RegionError(
            f"device not saturated: vds={vds:g}, vgs-VT={vov:g}")
    beta = p.beta
    i_sat = 0.5 * beta * vov * vov
    gm = math.sqrt(2.0 * beta * i_sat)
    rds = math.inf if p.lam == 0.0 else 1.0 / (p.lam * i_sat)
    vdsat = math.sqrt(2.0 * i_sat / beta)
    return SmallSignal(gm=gm, rds=rds, vdsat=vdsat, id=i_sat)


def noise(gm: float, id: float, p: MosParams, n: NoiseParams,
          consts: DeviceConstants = SILICON,
          temperature: float = 300.0) -> NoiseResult:
    """Mean-square channel noise current and its input-referred voltage.

    in_sq = [8kT*gm*(1+eta)/3 + KF*ID/(f*Cox*L^2)] * delta_f.  The
    input-referred form divides the thermal term by gm^2 and rewrites the
    flicker term as KF/(2*f*Cox*W*L*K') with K' = mu0*Cox; the two forms
    coincide when gm^2 = 2*beta*ID.
    """
    if gm <= 0:
        raise ValueError("gm must be strictly positive")
    kt = consts.boltzmann_k * temperature
    thermal = 8.0 * kt * gm * (1.0 + n.eta) / 3.0
    flicker = n.kf * id / (n.freq * p.cox * p.l_eff ** 2)
    in_sq = (thermal + flicker) * n.delta_f
    kprime = p.mu0 * p.cox
    veq_sq = (8.0 * kt * (1.0 + n.eta) / (3.0 * gm)
              + n.kf / (2.0 * n.freq * p.cox * p.w_eff * p.l_eff * kprime)
              ) * n.delta_f
    return NoiseResult(in_sq=in_sq, veq_sq=veq_sq)


def default_params(lam: float = 0.0, polarity: str = NMOS) -> MosParams:
    """Characterization defaults: VT0 = 0.5 V, beta = 1e-3 A/V^2,
    gamma = 0.4 V^1/2, 2|phi_F| = 0.7 V."""
    return MosParams.from_beta(1e-3, vt0=0.5, gamma=0.4, phi_f_abs2=0.7,
                               lam=lam, polarity=polarity)
