"""Piecewise-linear waveforms for control pulses and sources."""

from __future__ import annotations

import bisect
from dataclasses import dataclass


@dataclass(frozen=True)
class PwlWaveform:
    """Breakpoint-defined waveform: linear between breakpoints, clamped to
    the first/last value outside them. Breakpoint times must be strictly
    increasing."""

    breakpoints: tuple

    def __post_init__(self):
        pts = tuple((float(t), float(v)) for t, v in self.breakpoints)
        if not pts:
            raise ValueError("waveform needs at least one breakpoint")
        for (t0, _), (t1, _) in zip(pts, pts[1:]):
            if t1 <= t0:
                raise ValueError("breakpoint times must be strictly increasing")
        object.__setattr__(self, "breakpoints", pts)
        object.__setattr__(self, "_times", tuple(t for t, _ in pts))

    def __call__(self, t: float) -> float:
        return pwl_eval(self, t)

    @property
    def times(self) -> tuple:
        return self._times


def pwl_eval(w: PwlWaveform, t: float) -> float:
    """Value of the waveform at time t (clamped extrapolation)."""
    pts = w.breakpoints
    times = w.times
    if t <= times[0]:
        return pts[0][1]
    if t >= times[-1]:
        return pts[-1][1]
    i = bisect.bisect_right(times, t)
    t0, v0 = pts[i - 1]
    t1, v1 = pts[i]
    return v0 + (v1 - v0) * (t - t0) / (t1 - t0)


def constant(value: float) -> PwlWaveform:
    return PwlWaveform(((0.0, value),))


def pulse(t_on: float, t_off: float, high: float, low: float = 0.0,
          edge: float = 1e-9) -> PwlWaveform:
    """Single pulse: low until t_on, ramps to high over one edge time,
    holds until t_off, ramps back down. ``t_on`` may be 0, in which case
    the waveform starts high."""
    if t_off <= t_on:
        raise ValueError("t_off must be after t_on")
    if edge <= 0:
        raise ValueError("edge must be strictly positive")
    pts = []
    if t_on > 0:
        pts.append((0.0, low))
        pts.append((t_on, low))
        pts.append((t_on + edge, high))
    else:
        pts.append((0.0, high))
    pts.append((t_off, high))
    pts.append((t_off + edge, low))
    return PwlWaveform(tuple(pts))
