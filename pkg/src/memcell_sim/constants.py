"""Physical constants for silicon CMOS device calculations.

Geometry and doping use CGS-style units throughout (cm, cm^-2, cm^-3,
F/cm, F/cm^2); everything electrical is SI (V, A, S, F, s).
"""

from dataclasses import dataclass, field


@dataclass(frozen=True)
class DeviceConstants:
    """Constants for silicon at 27 C.

    ``eps_si`` and ``eps_ox`` are defined as exact multiples of ``eps0``
    (11.7x and 3.9x respectively); overriding ``eps0`` scales both.
    """

    boltzmann_k: float = 1.381e-23        # J/K
    q_electron: float = 1.602e-19         # C
    ni_300k: float = 1.45e10              # cm^-3, intrinsic carrier concentration
    eps0: float = 8.854e-14               # F/cm, permittivity of free space
    silicon_bandgap_vg: float = 1.205     # V
    eps_si: float = field(init=False)     # F/cm
    eps_ox: float = field(init=False)     # F/cm

    def __post_init__(self):
        for name in ("boltzmann_k", "q_electron", "ni_300k", "eps0",
                     "silicon_bandgap_vg"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        object.__setattr__(self, "eps_si", 11.7 * self.eps0)
        object.__setattr__(self, "eps_ox", 3.9 * self.eps0)

    def thermal_voltage(self, temperature: float) -> float:
        """kT/q in volts at the given temperature (K)."""
        if temperature <= 0:
            raise ValueError("temperature must be strictly positive")
        return self.boltzmann_k * temperature / self.q_electron


SILICON = DeviceConstants()
