"""Fixed-topology circuit representation and implicit transient solver.

Circuits are node lists (node 0 is ground) populated by two-terminal
elements plus behavioral op-amp blocks and ground-referenced sources.
The transient solve is a first-order implicit (backward-difference)
integration: at each step the nodal equations are solved by damped
Newton iteration with voltage-step limiting. Capacitor currents are
discretized implicitly, which conserves the total charge of capacitor
groups joined by switches to rounding precision regardless of step size.

Step sizes follow a multi-rate policy: fine steps near control-waveform
breakpoints where switching transients live, coarse steps through the
millisecond hold phases. Every breakpoint time is hit exactly, so traces
always contain samples at control edges.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field

import numpy as np

from .device import MosParams, NMOS, threshold_voltage
from .leak import LeakModel
from .waveform import PwlWaveform, pwl_eval

__all__ = [
    "Capacitor", "Resistor", "MosSwitch", "LeakageSink", "OpAmpBlock",
    "VSource", "Netlist", "Trace", "StepPolicy", "step", "run_transient",
    "ConvergenceError", "SingularNodeError",
]


class ConvergenceError(RuntimeError):
    """Newton iteration failed to converge; usually the step is too large."""

    def __init__(self, message: str, time: float):
        super().__init__(f"{message} (t={time:.9g} s)")
        self.time = time


class SingularNodeError(RuntimeError):
    """A node has no capacitor and no conducting path: its voltage is
    undefined."""


@dataclass(frozen=True)
class Capacitor:
    c: float
    a: int
    b: int = 0

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError("capacitance must be strictly positive")


@dataclass(frozen=True)
class Resistor:
    r: float
    a: int
    b: int = 0

    def __post_init__(self):
        if self.r <= 0:
            raise ValueError("resistance must be strictly positive")


@dataclass(frozen=True)
class MosSwitch:
    """Pass transistor between nodes a and b, gate driven by a waveform,
    bulk grounded. The channel terminals are interchangeable: whichever
    sits lower acts as the source. Below threshold the channel carries
    exactly zero current."""

    params: MosParams
    gate: PwlWaveform
    a: int
    b: int

    def __post_init__(self):
        if self.params.polarity != NMOS:
            raise ValueError("MosSwitch supports NMOS switches only")


@dataclass(frozen=True)
class LeakageSink:
    """Nonlinear leakage from a node to ground, defined by a LeakModel."""

    model: LeakModel
    node: int


@dataclass(frozen=True)
class OpAmpBlock:
    """Non-inverting amplifier behavioral block.

    Drives its output node to clamp((1 + r1/r0)*v_in, -rail, +rail),
    either instantaneously (gbw=None) or through a first-order lag at the
    closed-loop corner gbw/gain. A small internal capacitance c_in keeps
    the input node defined when its driving switch is off.
    """

    r0: float
    r1: float
    rail: float
    input: int
    output: int
    gbw: float | None = None
    c_in: float = 1e-15

    def __post_init__(self):
        if self.r0 <= 0 or self.r1 <= 0:
            raise ValueError("r0 and r1 must be strictly positive")
        if self.rail <= 0:
            raise ValueError("rail must be strictly positive")
        if self.gbw is not None and self.gbw <= 0:
            raise ValueError("gbw must be strictly positive when finite")
        if self.c_in <= 0:
            raise ValueError("c_in must be strictly positive")

    @property
    def gain(self) -> float:
        return 1.0 + self.r1 / self.r0

    def target(self, v_in: float) -> float:
        return min(max(self.gain * v_in, -self.rail), self.rail)


@dataclass(frozen=True)
class VSource:
    """Ideal ground-referenced voltage source following a waveform."""

    wave: PwlWaveform
    node: int


ELEMENT_TYPES = (Capacitor, Resistor, MosSwitch, LeakageSink, OpAmpBlock,
                 VSource)


def _terminals(el):
    if isinstance(el, (Capacitor, Resistor, MosSwitch)):
        return (el.a, el.b)
    if isinstance(el, LeakageSink):
        return (el.node, 0)
    if isinstance(el, VSource):
        return (el.node, 0)
    if isinstance(el, OpAmpBlock):
        return (el.input, el.output)
    raise TypeError(f"unknown element {el!r}")


@dataclass(frozen=True)
class Netlist:
    """Immutable circuit: elements over nodes 0..n-1 with names and
    initial voltages. Node 0 is ground and must be named first."""

    names: tuple
    elements: tuple
    initial: tuple

    def __post_init__(self):
        names = tuple(self.names)
        elements = tuple(self.elements)
        initial = tuple(float(v) for v in self.initial)
        n = len(names)
        if n < 1:
            raise ValueError("netlist needs at least the ground node")
        if len(initial) != n:
            raise ValueError("one initial voltage per node required")
        if initial[0] != 0.0:
            raise ValueError("ground initial voltage must be 0")
        if len(set(names)) != n:
            raise ValueError("node names must be unique")
        for el in elements:
            if not isinstance(el, ELEMENT_TYPES):
                raise TypeError(f"unknown element {el!r}")
            for t in _terminals(el):
                if not (0 <= t < n):
                    raise ValueError(f"{type(el).__name__} terminal {t} out of range")
        # every node must reach ground through some element path
        parent = list(range(n))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for el in elements:
            a, b = _terminals(el)
            # op amp and ground-referenced elements anchor to ground
            if isinstance(el, (LeakageSink, VSource)):
                b = 0
            if isinstance(el, OpAmpBlock):
                parent[find(el.output)] = find(0)
                parent[find(el.input)] = find(0)   # internal c_in to ground
                continue
            parent[find(a)] = find(b)
        for i in range(n):
            if find(i) != find(0):
                raise ValueError(f"node {names[i]!r} has no path to ground")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "initial", initial)

    @property
    def n_nodes(self) -> int:
        return len(self.names)

    def node(self, name: str) -> int:
        return self.names.index(name)

    def with_initial(self, **volts) -> "Netlist":
        """Copy with initial voltages overridden by node name."""
        init = list(self.initial)
        for name, v in volts.items():
            init[self.node(name)] = float(v)
        return Netlist(self.names, self.elements, tuple(init))

    def waveforms(self):
        """All control waveforms referenced by the netlist."""
        out = []
        for el in self.elements:
            if isinstance(el, MosSwitch):
                out.append(el.gate)
            elif isinstance(el, VSource):
                out.append(el.wave)
        return out


@dataclass(frozen=True)
class StepPolicy:
    """Multi-rate step control: dt_fine within ``window`` of any control
    breakpoint, at most dt_coarse elsewhere."""

    dt_fine: float = 1e-9
    dt_coarse: float = 100e-6
    window: float = 1e-6
    tol: float = 1e-6
    max_newton: int = 50
    v_limit: float = 1.0

    def __post_init__(self):
        if min(self.dt_fine, self.dt_coarse, self.window, self.tol,
               self.v_limit) <= 0:
            raise ValueError("policy quantities must be strictly positive")
        if self.max_newton < 1:
            raise ValueError("max_newton must be >= 1")


def _switch_current(p: MosParams, vg: float, va: float, vb: float):
    """Channel current a->b of a grounded-bulk NMOS pass switch and its
    derivatives w.r.t. the terminal voltages."""
    if va >= vb:
        vd, vs, sign = va, vb, 1.0
    else:
        vd, vs, sign = vb, va, -1.0
    vsb = vs if vs > 0.0 else 0.0
    vt = threshold_voltage(p, vsb)
    vov = vg - vs - vt
    if vov <= 0.0:
        return 0.0, 0.0, 0.0
    beta = p.beta
    lam = p.lam
    vds = vd - vs
    dvt_dvs = p.gamma / (2.0 * math.sqrt(p.phi_f_abs2 + vsb)) if vs > 0.0 else 0.0
    dvov_dvs = -1.0 - dvt_dvs
    if vds < vov:
        i = beta * (vov - 0.5 * vds) * vds * (1.0 + lam * vds)
        di_dvds = beta * ((vov - vds) * (1.0 + lam * vds)
                          + (vov - 0.5 * vds) * vds * lam)
        di_dvov = beta * vds * (1.0 + lam * vds)
        di_dvd = di_dvds
        di_dvs = di_dvov * dvov_dvs - di_dvds
    else:
        i = 0.5 * beta * vov * vov * (1.0 + lam * vds)
        di_dvd = 0.5 * beta * vov * vov * lam
        di_dvs = beta * vov * (1.0 + lam * vds) * dvov_dvs - di_dvd
    if sign > 0:
        return i, di_dvd, di_dvs
    return -i, -di_dvs, -di_dvd


def _assemble(netlist: Netlist, x: np.ndarray, prev: np.ndarray,
              t_new: float, dt: float):
    """Residual F and Jacobian J of the implicit nodal system at t_new.

    KCL rows sum element currents leaving each node; source and op-amp
    output rows pin the node voltage to its defining equation instead.
    """
    n = netlist.n_nodes
    F = np.zeros(n)
    J = np.zeros((n, n))
    driven = np.zeros(n, dtype=bool)
    driven[0] = True

    # pass 1: mark driven nodes so KCL stamps can be skipped there
    for el in netlist.elements:
        if isinstance(el, VSource):
            driven[el.node] = True
        elif isinstance(el, OpAmpBlock):
            driven[el.output] = True

    def kcl(node, current, *dpairs):
        if driven[node]:
            return
        F[node] += current
        for col, d in dpairs:
            J[node, col] += d

    for el in netlist.elements:
        if isinstance(el, Capacitor):
            g = el.c / dt
            i = g * ((x[el.a] - x[el.b]) - (prev[el.a] - prev[el.b]))
            kcl(el.a, i, (el.a, g), (el.b, -g))
            kcl(el.b, -i, (el.a, -g), (el.b, g))
        elif isinstance(el, Resistor):
            g = 1.0 / el.r
            i = g * (x[el.a] - x[el.b])
            kcl(el.a, i, (el.a, g), (el.b, -g))
            kcl(el.b, -i, (el.a, -g), (el.b, g))
        elif isinstance(el, MosSwitch):
            vg = pwl_eval(el.gate, t_new)
            i, da, db = _switch_current(el.params, vg, x[el.a], x[el.b])
            kcl(el.a, i, (el.a, da), (el.b, db))
            kcl(el.b, -i, (el.a, -da), (el.b, -db))
        elif isinstance(el, LeakageSink):
            v = x[el.node]
            kcl(el.node, el.model.current(v), (el.node, el.model.conductance(v)))
        elif isinstance(el, VSource):
            F[el.node] = x[el.node] - pwl_eval(el.wave, t_new)
            J[el.node, :] = 0.0
            J[el.node, el.node] = 1.0
        elif isinstance(el, OpAmpBlock):
            # internal input capacitance keeps the input node defined
            g = el.c_in / dt
            kcl(el.input, g * (x[el.input] - prev[el.input]), (el.input, g))
            raw = el.gain * x[el.input]
            clamped = abs(raw) > el.rail
            target = el.target(x[el.input])
            m = el.output
            J[m, :] = 0.0
            if el.gbw is None:
                F[m] = x[m] - target
                J[m, m] = 1.0
                if not clamped:
                    J[m, el.input] = -el.gain
            else:
                wc = 2.0 * math.pi * el.gbw / el.gain
                F[m] = x[m] - prev[m] - dt * wc * (target - x[m])
                J[m, m] = 1.0 + dt * wc
                if not clamped:
                    J[m, el.input] = -dt * wc * el.gain
    return F, J, driven


def step(netlist: Netlist, state, t: float, dt: float, tol: float = 1e-6,
         max_newton: int = 50, v_limit: float = 1.0) -> np.ndarray:
    """Advance the nodal state from t to t+dt by one implicit step.

    Returns the new node-voltage vector. Raises ConvergenceError when the
    damped Newton iteration does not settle below ``tol`` within
    ``max_newton`` iterations, and SingularNodeError for nodes with no
    capacitor and no conducting path.
    """
    if dt <= 0:
        raise ValueError("dt must be strictly positive")
    if tol <= 0:
        raise ValueError("tol must be strictly positive")
    prev = np.asarray(state, dtype=float)
    if prev.shape != (netlist.n_nodes,):
        raise ValueError("state must hold one voltage per node")
    x = prev.copy()
    t_new = t + dt
    for _ in range(max_newton):
        F, J, _ = _assemble(netlist, x, prev, t_new, dt)
        sub = slice(1, netlist.n_nodes)
        Jr = J[sub, sub]
        zero_rows = np.where(~Jr.any(axis=1))[0]
        if zero_rows.size:
            name = netlist.names[int(zero_rows[0]) + 1]
            raise SingularNodeError(
                f"node {name!r} has no capacitor and no conducting path")
        try:
            dx = np.linalg.solve(Jr, -F[sub])
        except np.linalg.LinAlgError as exc:
            raise SingularNodeError(f"singular nodal system: {exc}") from exc
        err = float(np.max(np.abs(dx)))
        if err > v_limit:
            dx *= v_limit / err
        x[sub] += dx
        x[0] = 0.0
        if err < tol:
            return x
    raise ConvergenceError(
        f"Newton failed to converge below {tol:g} V in {max_newton} iterations; "
        f"reduce dt", t_new)


@dataclass
class Trace:
    """Sampled node voltages at every accepted solver step."""

    times: np.ndarray
    voltages: np.ndarray            # shape (n_samples, n_nodes)
    names: tuple

    def column(self, name: str) -> np.ndarray:
        return self.voltages[:, self.names.index(name)]

    def at(self, name: str, t) -> float:
        """Node voltage at time t, linearly interpolated between samples."""
        return np.interp(t, self.times, self.column(name))

    def to_csv(self, path) -> None:
        """Write `time,<node>,...` rows (ground column omitted) at full
        double precision."""
        cols = [n for n in self.names[1:]]
        lines = ["time," + ",".join(cols)]
        for i, t in enumerate(self.times):
            row = [f"{t:.17g}"]
            row += [f"{self.voltages[i, j]:.17g}" for j in range(1, len(self.names))]
            lines.append(",".join(row))
        text = "\n".join(lines) + "\n"
        if hasattr(path, "write"):
            path.write(text)
        else:
            with open(path, "w") as fh:
                fh.write(text)


def _event_times(netlist: Netlist):
    seen = set()
    for w in netlist.waveforms():
        seen.update(float(t) for t in w.times)
    return sorted(seen)


def run_transient(netlist: Netlist, t_stop: float,
                  policy: StepPolicy = StepPolicy()) -> Trace:
    """Integrate the netlist from 0 to t_stop under the multi-rate policy.

    A step boundary is forced at every waveform breakpoint (event
    alignment); fine steps are used within ``policy.window`` of any
    breakpoint. Identical inputs produce bit-identical traces.
    """
    if t_stop <= 0:
        raise ValueError("t_stop must be strictly positive")
    events = _event_times(netlist)
    state = np.array(netlist.initial, dtype=float)
    times = [0.0]
    samples = [state.copy()]
    t = 0.0
    while t < t_stop:
        i_next = bisect.bisect_right(events, t)
        d_next = events[i_next] - t if i_next < len(events) else math.inf
        d_prev = t - events[i_next - 1] if i_next > 0 else math.inf
        if min(d_next, d_prev) <= policy.window:
            dt = policy.dt_fine
        else:
            # stay out of the next fine window with coarse steps
            dt = min(policy.dt_coarse, d_next - policy.window)
        if dt < policy.dt_fine:
            dt = policy.dt_fine
        dt = min(dt, d_next, t_stop - t)
        state = step(netlist, state, t, dt, tol=policy.tol,
                     max_newton=policy.max_newton, v_limit=policy.v_limit)
        if dt == d_next:
            t = events[i_next]        # land exactly on the breakpoint
        elif dt == t_stop - t:
            t = t_stop
        else:
            t = t + dt
        times.append(t)
        samples.append(state.copy())
    return Trace(times=np.array(times), voltages=np.array(samples),
                 names=netlist.names)
