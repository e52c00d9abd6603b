"""
Unit conversion between SI and the internal oscillator units

Internally hbar = m = omega0 = 1: lengths are measured in a0 = sqrt(hbar/(m omega0)),
times in 1/omega0 and energies in hbar omega0.
"""
from dataclasses import dataclass

import numpy as np
from scipy import constants

RB87_MASS_AMU = 86.909180527


@dataclass(frozen=True)
class UnitSystem:
    """Oscillator units fixed by an atomic mass and the initial trap frequency

    Args:
        mass: atomic mass in kg
        omega: initial trap frequency in rad/s
    """

    mass: float
    omega: float

    def __post_init__(self):
        if self.mass <= 0:
            raise ValueError(f'mass must be positive, got {self.mass}')
        if self.omega <= 0:
            raise ValueError(f'omega must be positive, got {self.omega}')

    @classmethod
    def from_amu(cls, mass_amu, omega):
        return cls(mass=mass_amu * constants.atomic_mass, omega=omega)

    @classmethod
    def rubidium87(cls, omega=2 * np.pi * 100e3):
        return cls.from_amu(RB87_MASS_AMU, omega)

    @property
    def length(self):
        """Ground-state size a0 in metres"""
        return np.sqrt(constants.hbar / (self.mass * self.omega))

    def to_internal_length(self, metres):
        return metres / self.length

    def to_si_length(self, value):
        return value * self.length

    def to_si_time(self, value):
        return value / self.omega

    def to_internal_frequency(self, rad_per_s):
        return rad_per_s / self.omega
