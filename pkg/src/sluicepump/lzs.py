"""Landau-Zener-Stueckelberg excitation estimates for one pump cycle.

With the phase written as ``phi/2 = pi/4 + dphi`` the excitation probability
after one cycle is ``P_LZ (1 - P_LZ) cos^2(alpha + phi/2)``. Its average over
Gaussian phase noise of variance ``s2`` is available in three forms:

* the exact Gaussian average, ``P(1-P)/2 * (1 - sin(2 alpha) exp(-2 s2))``;
* its first-order expansion in ``s2`` (coefficient ``P(1-P) sin(2 alpha)``);
* the same expansion with an extra factor 1/2 (``"half"`` convention).
"""

from __future__ import annotations

from dataclasses import dataclass
import math
from typing import NamedTuple

import numpy as np

from .constants import HBAR
from .errors import ConfigurationError

VARIANCE_VALIDITY = 0.01


@dataclass(frozen=True)
class LzsParams:
    """``p_lz`` is the single-passage probability and ``alpha`` the dynamical phase offset (rad)."""

    p_lz: float
    alpha: float
    phase_bias: float = math.pi / 2

    def __post_init__(self):
        if not 0.0 <= self.p_lz <= 1.0:
            raise ConfigurationError("p_lz must lie in [0, 1]")
        if not (math.isfinite(self.alpha) and math.isfinite(self.phase_bias)):
            raise ConfigurationError("alpha and phase_bias must be finite")

    @property
    def p_e0(self) -> float:
        """Noise-free excitation probability."""
        return float(excitation_probability(self, self.phase_bias / 2))


def excitation_probability(p: LzsParams, phi_half):
    """``P_LZ (1 - P_LZ) cos^2(alpha + phi/2)``."""
    return p.p_lz * (1 - p.p_lz) * np.cos(p.alpha + np.asarray(phi_half)) ** 2


class AveragedExcitation(NamedTuple):
    value: float
    slope: float
    valid: bool


def averaged_excitation(p: LzsParams, variance: float, convention: str = "half"
                        ) -> AveragedExcitation:
    """First-order noise-averaged excitation probability.

    Parameters
    ----------
    variance : float
        ``<dphi^2>``, with ``<dphi> = 0``.
    convention : {"half", "expansion"}
        ``"half"`` uses the coefficient ``P(1-P) sin(2 alpha) / 2``;
        ``"expansion"`` the direct second-order Taylor coefficient
        ``P(1-P) sin(2 alpha)``.

    Returns
    -------
    AveragedExcitation
        ``valid`` is False when ``variance`` exceeds the small-fluctuation window.
    """
    if variance < 0:
        raise ValueError("variance must be non-negative")
    factor = {"half": 0.5, "expansion": 1.0}.get(convention)
    if factor is None:
        raise ValueError("convention must be 'half' or 'expansion'")
    slope = factor * p.p_lz * (1 - p.p_lz) * math.sin(2 * p.alpha)
    return AveragedExcitation(float(p.p_e0 + slope * variance), slope,
                              variance <= VARIANCE_VALIDITY)


def exact_gaussian_average(p: LzsParams, variance: float) -> float:
    """``<cos^2(alpha + phase_bias/2 + dphi)>`` for Gaussian ``dphi``, times ``P(1-P)``."""
    if variance < 0:
        raise ValueError("variance must be non-negative")
    if variance == 0:
        return p.p_e0
    a = p.alpha + p.phase_bias / 2
    return float(0.5 * p.p_lz * (1 - p.p_lz) * (1 + math.cos(2 * a) * math.exp(-2 * variance)))


class McResult(NamedTuple):
    mean: float
    std_error: float


def mc_average(p: LzsParams, sigma2: float, n_samples: int = 1_000_000, seed: int = 0) -> McResult:
    """Monte-Carlo average over ``dphi ~ N(0, sigma2)``.

    Uses the counter-based Philox generator keyed by ``seed``.
    """
    if n_samples < 10_000:
        raise ValueError("n_samples must be >= 1e4")
    if sigma2 < 0:
        raise ValueError("sigma2 must be non-negative")
    if sigma2 == 0:
        return McResult(float(p.p_e0), 0.0)
    rng = np.random.Generator(np.random.Philox(key=seed))
    d = rng.normal(0.0, math.sqrt(sigma2), n_samples)
    vals = excitation_probability(p, p.phase_bias / 2 + d)
    return McResult(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n_samples)))


def landau_zener_probability(gap: float, sweep_rate: float) -> float:
    """``exp(-pi gap^2 / (2 hbar v))`` for full splitting ``gap`` (J) and ``v`` in J/s."""
    if not sweep_rate > 0:
        raise ValueError("sweep_rate must be positive")
    return math.exp(-math.pi * gap ** 2 / (2 * HBAR * sweep_rate))


def schedule_crossing(params) -> tuple:
    """``(gap, sweep_rate)`` at the gate-ramp crossing of the default schedule.

    The ramp runs with one SQUID open at ``J_max`` and the other at ``J_min``
    over one fifth of the period.
    """
    jm, jn = params.J_max, params.J_min
    gap = math.sqrt(jm ** 2 + jn ** 2 + 2 * jm * jn * math.cos(params.phi0))
    dng = (params.ng_max - params.ng_min) * 5 * params.f_pump
    return gap, 2 * params.E_C * dng
