"""Physical constants used throughout the package (SI units)."""

from dataclasses import dataclass
import math

from scipy import constants as _codata


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = _codata.hbar
    e_charge: float = _codata.e
    k_B: float = _codata.k

    @property
    def flux_quantum(self) -> float:
        """Superconducting flux quantum h/(2e)."""
        return math.pi * self.hbar / self.e_charge


CONST = PhysicalConstants()

HBAR = CONST.hbar
E_CHARGE = CONST.e_charge
K_B = CONST.k_B
FLUX_QUANTUM = CONST.flux_quantum
