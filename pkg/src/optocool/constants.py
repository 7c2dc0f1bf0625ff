"""Physical constants (SI, CODATA 2018) and unit helpers."""
from dataclasses import dataclass


@dataclass(frozen=True)
class PhysicalConstants:
    boltzmann: float = 1.380649e-23  # J/K, exact
    debye: float = 3.33564e-30  # C m
    amu: float = 1.66053906660e-27  # kg
    planck: float = 6.62607015e-34  # J s, exact
    light_speed: float = 299792458.0  # m/s, exact

    @property
    def wavenumber(self):
        """Energy of 1 cm^-1 in J."""
        return self.planck * self.light_speed * 100.0


CONST = PhysicalConstants()

KB = CONST.boltzmann
DEBYE = CONST.debye
AMU = CONST.amu
CM1 = CONST.wavenumber

KV_PER_CM = 1e5  # V/m
