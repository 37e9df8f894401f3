"""Analog memory cell: topology builder, control scheduling, and storage
simulation.

The cell stores a voltage on a primary capacitor behind an NMOS write
switch. A transfer switch shares the stored charge onto an equal
secondary capacitor (halving the voltage), a discharge switch keeps the
secondary empty between uses, and an op amp re-amplifies the shared
voltage so a refresh switch can write it back to the primary node every
refresh period. Storage quality is limited by the leakage law on both
storage nodes.

Two simulation paths are provided: the full transient (every switching
edge resolved) and a fast behavioral path that applies the closed-form
per-cycle map retention -> share -> amplify.
"""

from __future__ import annotations

import enum
import functools
import warnings
from dataclasses import dataclass, field

import numpy as np

from .circuit import (Capacitor, LeakageSink, MosSwitch, Netlist, OpAmpBlock,
                      StepPolicy, Trace, VSource, run_transient)
from .device import MosParams, threshold_voltage
from .leak import LeakModel, retention
from .waveform import PwlWaveform, constant, pulse

EDGE = 1e-9           # control-line rise/fall time
MAX_SUPPLY = 3.3      # process limit on any rail or control level
CANONICAL_VIN_MAX = 2.0
MIN_WRITE_PULSE = 40e-9

# Bundled leakage calibration against the reference gain/storage tables;
# regenerate with `memcell-sim calibrate`. Values are per-node (1 pF).
DEFAULT_LEAK = LeakModel(g0=1.84895254263413e-11, g1=1.4408807539430785e-12)


class ConfigError(ValueError):
    """A cell-configuration invariant is violated; names the field."""


class ScheduleError(ValueError):
    """Requested control timing cannot fit the refresh period."""


class NonCanonicalConfigWarning(UserWarning):
    """Configuration departs from the equal-capacitor storage scheme."""


class Stage(enum.Enum):
    """Build stages of the cell, from bare write path to the full
    self-refreshing loop."""

    WRITE_ONLY = "write_only"
    WITH_TRANSFER = "with_transfer"
    WITH_DISCHARGE = "with_discharge"
    FULL = "full"


def default_switch_params() -> MosParams:
    """Cell switch sizing shared by the five switches.

    A narrow, longer-than-minimum device: strong enough that a 40 ns
    write pulse completes (>= 99 % of target), weak enough that the
    40 ns minimum is binding at reduced pulse widths.
    """
    return MosParams(mu0=460.0, tox=5e-7, w_eff=0.25e-4, l_eff=0.662e-4,
                     vt0=0.5, gamma=0.4, phi_f_abs2=0.7, lam=0.0)


@dataclass(frozen=True)
class PulseWidths:
    """Control pulse widths (seconds). ``vin_window`` is how long the
    input level is held and must exceed the write pulse."""

    write: float = 40e-9
    vin_window: float = 42e-9
    transfer: float = 100e-9
    amplify: float = 500e-9
    refresh: float = 200e-9
    guard: float = 10e-9


@dataclass(frozen=True)
class CellConfig:
    """Component values and timing of one memory cell."""

    c_primary: float = 1e-12
    c_secondary: float = 1e-12
    r0: float = 500.0
    r1: float = 1700.0
    supply_rail: float = 2.5
    control_high: float = 3.0
    switch_params: MosParams = field(default_factory=default_switch_params)
    leak: LeakModel = DEFAULT_LEAK
    pulse: PulseWidths = PulseWidths()
    refresh_period: float = 0.040
    storage_time: float = 0.120
    frame_rate: float = 25.0
    opamp_gbw: float | None = None

    def __post_init__(self):
        def need(cond, fieldname, why):
            if not cond:
                raise ConfigError(f"{fieldname}: {why}")

        need(self.c_primary > 0, "c_primary", "must be > 0")
        need(self.c_secondary > 0, "c_secondary", "must be > 0")
        need(self.r0 > 0, "r0", "must be > 0")
        need(self.r1 > 0, "r1", "must be > 0")
        need(self.supply_rail > 0, "supply_rail", "must be > 0")
        need(0 < self.control_high <= MAX_SUPPLY, "control_high",
             f"must be in (0, {MAX_SUPPLY}] V")
        need(self.pulse.write >= MIN_WRITE_PULSE, "pulse.write",
             f"must be >= {MIN_WRITE_PULSE:g} s")
        need(self.pulse.vin_window > self.pulse.write, "pulse.vin_window",
             "must exceed the write pulse")
        for name in ("transfer", "amplify", "refresh", "guard"):
            need(getattr(self.pulse, name) > 0, f"pulse.{name}", "must be > 0")
        need(self.refresh_period > 0, "refresh_period", "must be > 0")
        need(self.storage_time >= self.refresh_period, "storage_time",
             "must be >= refresh_period")
        need(self.frame_rate > 0, "frame_rate", "must be > 0")
        if self.opamp_gbw is not None:
            need(self.opamp_gbw > 0, "opamp_gbw", "must be > 0 when set")

    @property
    def gain(self) -> float:
        return 1.0 + self.r1 / self.r0

    @property
    def is_canonical(self) -> bool:
        """Equal storage capacitors, so charge sharing halves the voltage."""
        return self.c_primary == self.c_secondary

    @property
    def n_refresh_cycles(self) -> int:
        return int(self.storage_time / self.refresh_period + 1e-9)


@dataclass(frozen=True)
class ControlSchedule:
    """One waveform per control line of the cell."""

    v_in: PwlWaveform
    v_write: PwlWaveform
    v_transfer: PwlWaveform
    v_discharge: PwlWaveform
    v_amplify: PwlWaveform
    v_refresh: PwlWaveform
    readout_times: tuple = ()

    def lines(self):
        return {"v_in": self.v_in, "v_write": self.v_write,
                "v_transfer": self.v_transfer, "v_discharge": self.v_discharge,
                "v_amplify": self.v_amplify, "v_refresh": self.v_refresh}


@dataclass(frozen=True)
class BurstTiming:
    """Offsets of one refresh burst relative to its start time."""

    discharge_off: float
    transfer_on: float
    transfer_off: float
    amplify_on: float
    refresh_on: float
    refresh_off: float
    amplify_off: float
    discharge_on: float
    end: float


def _burst_timing(p: PulseWidths) -> BurstTiming:
    e, g = EDGE, p.guard
    discharge_off = e
    transfer_on = discharge_off + g + e
    transfer_off = transfer_on + p.transfer
    amplify_on = transfer_off + e + g + e
    refresh_on = amplify_on + g + e
    refresh_off = refresh_on + p.refresh
    amplify_off = amplify_on + p.amplify
    discharge_on = amplify_off + e + g + e
    if refresh_off + e + g > amplify_off:
        raise ScheduleError(
            "refresh pulse plus guards does not fit inside the amplify window")
    return BurstTiming(discharge_off, transfer_on, transfer_off, amplify_on,
                       refresh_on, refresh_off, amplify_off, discharge_on,
                       end=discharge_on + e)


def default_schedule(cfg: CellConfig, vin: float) -> ControlSchedule:
    """Write-then-refresh control schedule for storing ``vin``.

    The input is written in the first nanoseconds; refresh bursts run at
    every multiple of the refresh period, the last one serving as the
    final read. Each burst releases the discharge switch, pulses
    transfer, opens the amplify window with the refresh pulse inside it,
    then re-asserts discharge.
    """
    if vin < 0:
        raise ValueError("vin must be >= 0 (single-ended NMOS cell)")
    if vin > CANONICAL_VIN_MAX:
        warnings.warn(
            f"vin={vin:g} V exceeds the canonical {CANONICAL_VIN_MAX:g} V "
            "input range; the write switch will clip it",
            NonCanonicalConfigWarning, stacklevel=2)
    h = cfg.control_high
    p = cfg.pulse
    bt = _burst_timing(p)
    if bt.end >= cfg.refresh_period:
        raise ScheduleError(
            f"burst span {bt.end:g} s does not fit the refresh period "
            f"{cfg.refresh_period:g} s")
    n = cfg.n_refresh_cycles
    burst_starts = [k * cfg.refresh_period for k in range(1, n + 1)]

    v_write = pulse(0.0, p.write, h, edge=EDGE)
    if vin > 0:
        v_in = pulse(0.0, p.vin_window, vin, edge=EDGE)
    else:
        v_in = constant(0.0)

    tr_pts, am_pts, rf_pts = [(0.0, 0.0)], [(0.0, 0.0)], [(0.0, 0.0)]
    dis_pts = [(0.0, h)]
    readouts = []
    for t0 in burst_starts:
        dis_pts += [(t0, h), (t0 + bt.discharge_off, 0.0),
                    (t0 + bt.discharge_on, 0.0), (t0 + bt.discharge_on + EDGE, h)]
        tr_pts += [(t0 + bt.transfer_on - EDGE, 0.0), (t0 + bt.transfer_on, h),
                   (t0 + bt.transfer_off, h), (t0 + bt.transfer_off + EDGE, 0.0)]
        am_pts += [(t0 + bt.amplify_on - EDGE, 0.0), (t0 + bt.amplify_on, h),
                   (t0 + bt.amplify_off, h), (t0 + bt.amplify_off + EDGE, 0.0)]
        rf_pts += [(t0 + bt.refresh_on - EDGE, 0.0), (t0 + bt.refresh_on, h),
                   (t0 + bt.refresh_off, h), (t0 + bt.refresh_off + EDGE, 0.0)]
        readouts.append(t0 + bt.amplify_off)
    return ControlSchedule(
        v_in=v_in, v_write=v_write,
        v_transfer=PwlWaveform(tuple(tr_pts)),
        v_discharge=PwlWaveform(tuple(dis_pts)),
        v_amplify=PwlWaveform(tuple(am_pts)),
        v_refresh=PwlWaveform(tuple(rf_pts)),
        readout_times=tuple(readouts))


def quiescent_schedule() -> ControlSchedule:
    """All control lines held low; useful for structural inspection."""
    z = constant(0.0)
    return ControlSchedule(v_in=z, v_write=z, v_transfer=z, v_discharge=z,
                           v_amplify=z, v_refresh=z)


def build_cell(cfg: CellConfig, stage: Stage,
               schedule: ControlSchedule | None = None) -> Netlist:
    """Assemble the netlist for the requested build stage.

    WRITE_ONLY is the bare write switch and primary capacitor;
    WITH_TRANSFER adds the transfer switch and secondary capacitor;
    WITH_DISCHARGE adds the grounding switch on the secondary node; FULL
    adds the amplify switch, the op-amp block and the refresh switch back
    to the primary node. Leakage sinks hang on every storage node
    present.
    """
    if schedule is None:
        schedule = quiescent_schedule()
    if not cfg.is_canonical:
        warnings.warn(
            f"c_primary={cfg.c_primary:g} != c_secondary={cfg.c_secondary:g}: "
            "charge sharing will not halve the stored voltage",
            NonCanonicalConfigWarning, stacklevel=2)
    sw = cfg.switch_params
    names = ["gnd", "v_in", "v_primary"]
    elements = [
        VSource(schedule.v_in, node=1),
        MosSwitch(sw, schedule.v_write, a=1, b=2),
        Capacitor(cfg.c_primary, a=2),
        LeakageSink(cfg.leak, node=2),
    ]
    if stage is not Stage.WRITE_ONLY:
        names.append("v_secondary")
        elements += [
            MosSwitch(sw, schedule.v_transfer, a=2, b=3),
            Capacitor(cfg.c_secondary, a=3),
            LeakageSink(cfg.leak, node=3),
        ]
    if stage in (Stage.WITH_DISCHARGE, Stage.FULL):
        elements.append(MosSwitch(sw, schedule.v_discharge, a=3, b=0))
    if stage is Stage.FULL:
        names += ["v_amp_in", "v_out"]
        elements += [
            MosSwitch(sw, schedule.v_amplify, a=3, b=4),
            OpAmpBlock(r0=cfg.r0, r1=cfg.r1, rail=cfg.supply_rail,
                       input=4, output=5, gbw=cfg.opamp_gbw),
            MosSwitch(sw, schedule.v_refresh, a=5, b=2),
        ]
    return Netlist(names=tuple(names), elements=tuple(elements),
                   initial=(0.0,) * len(names))


@dataclass(frozen=True)
class CellTrace:
    """Full transient of a cell run plus the sampled readout events."""

    trace: Trace
    readouts: tuple          # ((time, v_out), ...)

    @property
    def v_primary(self) -> np.ndarray:
        return self.trace.column("v_primary")

    @property
    def v_secondary(self) -> np.ndarray:
        return self.trace.column("v_secondary")

    @property
    def v_out(self) -> np.ndarray:
        return self.trace.column("v_out")

    @property
    def times(self) -> np.ndarray:
        return self.trace.times

    @property
    def final_readout(self) -> float:
        if not self.readouts:
            raise ValueError("no readout events in this run")
        return self.readouts[-1][1]

    def readouts_to_csv(self, path) -> None:
        lines = ["time,readout_volts"]
        lines += [f"{t:.17g},{v:.17g}" for t, v in self.readouts]
        text = "\n".join(lines) + "\n"
        if hasattr(path, "write"):
            path.write(text)
        else:
            with open(path, "w") as fh:
                fh.write(text)


def simulate_cell(cfg: CellConfig, vin: float,
                  policy: StepPolicy | None = None) -> CellTrace:
    """Full transient of the complete cell storing ``vin`` through every
    refresh burst; readouts are the op-amp output at the end of each
    amplify window."""
    schedule = default_schedule(cfg, vin)
    netlist = build_cell(cfg, Stage.FULL, schedule)
    bt = _burst_timing(cfg.pulse)
    last_burst_start = schedule.readout_times[-1] - bt.amplify_off
    t_stop = last_burst_start + bt.end + EDGE
    trace = run_transient(netlist, t_stop, policy or StepPolicy())
    readouts = tuple((t, float(trace.at("v_out", t)))
                     for t in schedule.readout_times)
    return CellTrace(trace=trace, readouts=readouts)


@functools.lru_cache(maxsize=64)
def pass_gate_limit(params: MosParams, gate_high: float) -> float:
    """Highest voltage an NMOS pass switch can charge its output to:
    the fixed point of v = gate_high - VT(v)."""
    lo, hi = 0.0, gate_high
    if gate_high - threshold_voltage(params, 0.0) <= 0:
        return 0.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if mid + threshold_voltage(params, mid) < gate_high:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _store_map(leak: LeakModel, cfg: CellConfig, v, n_cycles: int):
    """Vectorized refresh map: per cycle, hold for one refresh period,
    share onto the discharged secondary, amplify and write back through
    the refresh pass gate."""
    share = cfg.c_primary / (cfg.c_primary + cfg.c_secondary)
    limit = pass_gate_limit(cfg.switch_params, cfg.control_high)
    v = np.minimum(np.asarray(v, dtype=float), limit)
    for _ in range(n_cycles):
        shared = retention(leak, cfg.c_primary, v, cfg.refresh_period) * share
        amplified = np.clip(cfg.gain * shared, -cfg.supply_rail, cfg.supply_rail)
        v = np.minimum(amplified, limit)
    return v


def behavioral_store(cfg: CellConfig, vin: float, n_cycles: int) -> float:
    """Fast closed-form storage estimate: readout after n_cycles refresh
    periods (3 cycles corresponds to the 120 ms storage target)."""
    if vin < 0:
        raise ValueError("vin must be >= 0")
    if n_cycles < 0:
        raise ValueError("n_cycles must be >= 0")
    return float(_store_map(cfg.leak, cfg, vin, n_cycles))
