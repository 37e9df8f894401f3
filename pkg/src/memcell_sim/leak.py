"""Storage-node leakage law and its closed-form hold-phase solution.

The leakage current drawn from a node at voltage v is

    i(v) = g0*v + g1*v*|v|

a linear conductance plus a voltage-proportional term. For v >= 0 this
is g0*v + g1*v^2; the odd extension keeps the current opposing the
stored voltage for transient robustness near zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LeakModel:
    """Two-parameter leakage law: g0 in siemens, g1 in siemens/volt."""

    g0: float
    g1: float = 0.0

    def __post_init__(self):
        if self.g0 < 0 or self.g1 < 0:
            raise ValueError("leakage coefficients must be >= 0")

    def current(self, v: float) -> float:
        """Leakage current (A) flowing from the node to ground."""
        return self.g0 * v + self.g1 * v * abs(v)

    def conductance(self, v: float) -> float:
        """d(current)/dv at the operating point, for Newton stamps."""
        return self.g0 + 2.0 * self.g1 * abs(v)

    @classmethod
    def zero(cls) -> "LeakModel":
        return cls(g0=0.0, g1=0.0)


def retention(leak: LeakModel, c: float, v0, dt):
    """Exact solution of C*dv/dt = -(g0*v + g1*v^2) over a hold of dt
    seconds starting from v0 >= 0.

    With a = g0/C and b = g1/C:

        v(dt) = a*v0*exp(-a*dt) / (a + b*v0*(1 - exp(-a*dt)))

    with the limit forms handled exactly: pure exponential when b = 0,
    algebraic decay v0/(1 + b*v0*dt) when a = 0, and v0 when both vanish.
    Accepts scalar or ndarray v0/dt (broadcasting applies).
    """
    if c <= 0:
        raise ValueError("capacitance must be strictly positive")
    scalar = np.isscalar(v0) and np.isscalar(dt)
    v0 = np.asarray(v0, dtype=float)
    dt = np.asarray(dt, dtype=float)
    if np.any(v0 < 0):
        raise ValueError("v0 must be >= 0")
    if np.any(dt < 0):
        raise ValueError("dt must be >= 0")
    a = leak.g0 / c
    b = leak.g1 / c
    if a == 0.0 and b == 0.0:
        out = v0 * np.ones_like(dt)
    elif b == 0.0:
        out = v0 * np.exp(-a * dt)
    elif a == 0.0:
        out = v0 / (1.0 + b * v0 * dt)
    else:
        e = np.exp(-a * dt)
        out = a * v0 * e / (a + b * v0 * (1.0 - e))
    return float(out) if scalar else out


def half_life_conductance(c: float, t_half: float) -> LeakModel:
    """Linear-only model whose stored voltage halves every t_half seconds."""
    if t_half <= 0:
        raise ValueError("t_half must be strictly positive")
    return LeakModel(g0=c * math.log(2.0) / t_half, g1=0.0)
