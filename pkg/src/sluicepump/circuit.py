"""Engineered phase-noise environment.

A cold resistor ``R`` drives current noise through a series inductor ``L``
and a control SQUID (modelled as a parallel ``R_S``, ``L_S(phi)``, ``C_S``
branch); the loop couples to the sluice through the mutual inductance ``M``.
Spectra are one-sided, zero-temperature and in SI units: ``S_V`` in V^2 s,
``S_I`` in A^2 s, ``S_phi`` in s.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
import math
import warnings
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy import integrate

from .constants import E_CHARGE, FLUX_QUANTUM, HBAR
from .errors import ConfigurationError, InductancePoleError, QuadratureError

POLE_GUARD = 1e-12


@dataclass(frozen=True)
class EnvCircuitParams:
    """Element values of the noise circuit.

    ``phi_ctrl`` is the control-SQUID flux in units of the flux quantum.
    ``inductance_convention`` selects ``L_0 = hbar/(2 pi e I_C)`` (``"twopi"``,
    default) or the textbook Josephson inductance ``hbar/(2 e I_C)``.
    """

    R: float = 30.0
    R_S: float = 500.0
    C_S: float = 50e-15
    I_C: float = 25e-6
    L: float = 0.69e-9
    M: float = 0.69e-9
    phi_ctrl: float = 0.0
    inductance_convention: str = "twopi"

    def __post_init__(self):
        for name in ("R", "R_S", "C_S", "I_C", "L"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.M < 0:
            raise ConfigurationError("M must be non-negative")
        if self.inductance_convention not in ("twopi", "josephson"):
            raise ConfigurationError("inductance_convention must be 'twopi' or 'josephson'")

    @property
    def L_0(self) -> float:
        if self.inductance_convention == "twopi":
            return HBAR / (2 * math.pi * E_CHARGE * self.I_C)
        return HBAR / (2 * E_CHARGE * self.I_C)

    def with_(self, **changes) -> "EnvCircuitParams":
        return replace(self, **changes)


def _phi(env, phi):
    return env.phi_ctrl if phi is None else phi


def squid_inductance(env: EnvCircuitParams, phi=None):
    """Signed SQUID inductance ``L_0 / cos(pi phi)`` (H)."""
    c = np.cos(np.pi * np.asarray(_phi(env, phi), dtype=float))
    if np.any(np.abs(c) <= POLE_GUARD):
        raise InductancePoleError("inductance pole at phi/Phi0 = 1/2 + k; use z_branch")
    out = env.L_0 / c
    return float(out) if np.ndim(out) == 0 else out


def z_branch(omega, env: EnvCircuitParams, phi=None):
    """Impedance of the control SQUID, evaluated through its admittance.

    ``1/L_S = cos(pi phi)/L_0`` stays finite at the pole, where the branch
    reduces to ``R_S`` in parallel with ``C_S``.
    """
    omega = np.asarray(omega, dtype=float)
    inv_LS = np.cos(np.pi * np.asarray(_phi(env, phi), dtype=float)) / env.L_0
    Y = 1.0 / env.R_S + 1j * omega * env.C_S + inv_LS / (1j * omega)
    return 1.0 / Y


def z_branch_literal(omega, env: EnvCircuitParams, phi=None):
    """``i L_S w R_S / (i L_S w + R_S (1 - L_S w^2 C_S))``; singular at the pole."""
    omega = np.asarray(omega, dtype=float)
    LS = squid_inductance(env, phi)
    num = 1j * LS * omega * env.R_S
    return num / (1j * LS * omega + env.R_S * (1 - LS * omega ** 2 * env.C_S))


def z_total(omega, env: EnvCircuitParams, phi=None):
    omega = np.asarray(omega, dtype=float)
    return z_branch(omega, env, phi) + env.R + 1j * omega * env.L


def s_voltage(omega, env: EnvCircuitParams):
    """Johnson-Nyquist voltage noise of the cold resistor, ``2 hbar w R`` for ``w >= 0``."""
    omega = np.asarray(omega, dtype=float)
    return np.where(omega >= 0, 2 * HBAR * omega * env.R, 0.0)


def s_current(omega, env: EnvCircuitParams, phi=None):
    omega = np.asarray(omega, dtype=float)
    pos = omega > 0
    w = np.where(pos, omega, 1.0)
    z2 = np.abs(z_total(w, env, phi)) ** 2
    return np.where(pos, s_voltage(w, env) / z2, 0.0)


def s_flux(omega, env: EnvCircuitParams, phi=None):
    return env.M ** 2 * s_current(omega, env, phi)


def s_phase(omega, env: EnvCircuitParams, phi=None):
    """Phase-noise spectrum ``(2 pi / Phi0)^2 M^2 S_I`` (s)."""
    return (2 * np.pi / FLUX_QUANTUM) ** 2 * s_flux(omega, env, phi)


def s_phase_approx(omega, env: EnvCircuitParams, phi=None):
    """Near-resonance closed form around ``phi/Phi0 = 1/2``.

    Valid for ``|phi/Phi0 - 1/2| <= 0.05``; singular exactly at 1/2.
    """
    x = np.asarray(_phi(env, phi), dtype=float) - 0.5
    if np.any(x == 0):
        raise ZeroDivisionError("approximation singular at phi/Phi0 = 1/2; use s_phase")
    if np.any(np.abs(x) > 0.05):
        raise ValueError("s_phase_approx is only valid for |phi/Phi0 - 1/2| <= 0.05")
    omega = np.asarray(omega, dtype=float)
    bracket = 1 - env.L_0 / (np.pi * env.L * x)
    pref = 8 * np.pi ** 2 * env.M ** 2 * env.R * HBAR * omega / FLUX_QUANTUM ** 2
    return pref / (env.R ** 2 + env.L ** 2 * omega ** 2 * bracket ** 2)


class ResonanceFeatures(NamedTuple):
    phi_max: float
    s_max: float
    s_min: float
    width: float


def resonance_features(omega: float, env: EnvCircuitParams) -> ResonanceFeatures:
    """Position and height of the spectral maximum next to ``phi/Phi0 = 1/2``, and the dip."""
    width = env.L_0 / (np.pi * env.L)
    s_max = 8 * np.pi ** 2 * env.M ** 2 * HBAR * omega / (env.R * FLUX_QUANTUM ** 2)
    s_min = float(s_phase(omega, env, 0.5))
    return ResonanceFeatures(0.5 + width, float(s_max), s_min, float(width))


def phase_variance(env: EnvCircuitParams, omega_lo: float, omega_hi: float,
                   spectrum: Optional[Callable] = None, rtol: float = 1e-8) -> float:
    """Integral of the phase spectrum over ``[omega_lo, omega_hi]``.

    ``spectrum`` overrides ``s_phase`` (any callable ``S(omega)``).
    """
    if not (0 < omega_lo < omega_hi):
        raise ValueError("need 0 < omega_lo < omega_hi")
    if spectrum is None:
        def spectrum(w):
            return float(s_phase(w, env))
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(spectrum, omega_lo, omega_hi, epsabs=0.0,
                                      epsrel=rtol, limit=200)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(
                f"quadrature did not converge on [{omega_lo:g}, {omega_hi:g}]: {exc}") from exc
    if not np.isfinite(val) or err > max(10 * rtol * abs(val), 1e-300):
        raise QuadratureError(f"quadrature error estimate {err:g} too large for value {val:g}")
    return float(val)


def decoherence_time(coupling_elem: float, s_value: float) -> float:
    """``tau = hbar^2 / (|<i|dH|j>|^2 S)``; ``inf`` for a vanishing spectrum."""
    if s_value < 0:
        raise ValueError("spectral density must be non-negative")
    rate = (coupling_elem / HBAR) ** 2 * s_value
    return math.inf if rate == 0 else 1.0 / rate


@dataclass(frozen=True)
class OneOverFParams:
    A_flux: float

    def __post_init__(self):
        if self.A_flux < 0:
            raise ConfigurationError("A_flux must be non-negative")

    @property
    def A_phase(self) -> float:
        return 4 * np.pi ** 2 * self.A_flux / FLUX_QUANTUM ** 2


class DephasingEstimate(NamedTuple):
    gamma: float
    tau: float


def one_over_f_dephasing(p: OneOverFParams, dOmega_dphi: float) -> DephasingEstimate:
    """Gaussian-decay dephasing rate ``sqrt(A_phi ln 2) |dOmega/dphi|``."""
    if dOmega_dphi < 0:
        raise ValueError("dOmega_dphi must be non-negative")
    gamma = math.sqrt(p.A_phase * math.log(2)) * dOmega_dphi
    return DephasingEstimate(gamma, math.inf if gamma == 0 else 1.0 / gamma)


def josephson_gap_slope(J_L: float, J_R: float, phi: float) -> float:
    """``|dOmega/dphi|`` at charge degeneracy, where
    ``Omega = sqrt(J_R^2 + J_L^2 + 2 J_R J_L cos phi) / hbar``."""
    omega = math.sqrt(J_R ** 2 + J_L ** 2 + 2 * J_R * J_L * math.cos(phi)) / HBAR
    return J_R * J_L * abs(math.sin(phi)) / (HBAR ** 2 * omega)
