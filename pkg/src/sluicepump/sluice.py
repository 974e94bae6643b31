"""Two-state model of the Cooper pair sluice.

Charge basis ordering is ``(|0>, |1>)``: no / one excess Cooper pair on the
island. All energies are in joules, times in seconds, currents in amperes.

Sign convention for the currents: ``I_L`` is the conventional current flowing
from the left lead into the island and ``I_R`` the current flowing from the
island into the right lead, so that ``I_L - I_R = d<Q_island>/dt`` holds as an
operator identity. A Cooper pair (charge -2e) moved from left to right is
therefore a transfer of -2e in this orientation.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
import math
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .constants import E_CHARGE, HBAR, K_B
from .errors import ConfigurationError, DegenerateSpectrumError

OperatorMatrix = np.ndarray

GAUGE_FALLBACK_THRESHOLD = 1e-6


@dataclass(frozen=True)
class SluiceParams:
    """Device energies and drive settings.

    Parameters
    ----------
    E_C : float
        Charging energy (J).
    J_max, J_min : float
        Largest and smallest Josephson energies reached by either SQUID (J).
    ng_min, ng_max : float
        Gate-charge turning points; the cycle must cross n_g = 1/2 twice.
    phi0 : float
        Static phase bias across the device (rad).
    f_pump : float
        Pumping frequency (Hz).
    lambda_charge : float
        Dimensionless gate-noise coupling; only used by the charge-noise null test.
    """

    E_C: float
    J_max: float
    J_min: float
    ng_min: float = 0.2
    ng_max: float = 0.8
    phi0: float = math.pi / 2
    f_pump: float = 150e6
    lambda_charge: float = 0.0

    def __post_init__(self):
        if not self.E_C > 0:
            raise ConfigurationError("E_C must be positive")
        if not (0 < self.J_min <= self.J_max):
            raise ConfigurationError("need 0 < J_min <= J_max")
        if self.E_C < 5 * self.J_max:
            raise ConfigurationError("charge regime requires E_C >= 5 J_max")
        if not (0 < self.ng_min < 0.5 < self.ng_max < 1):
            raise ConfigurationError("need 0 < ng_min < 0.5 < ng_max < 1")
        if not self.f_pump > 0:
            raise ConfigurationError("f_pump must be positive")

    @classmethod
    def defaults(cls, **overrides) -> "SluiceParams":
        """E_C/k_B = 1 K, J_max = 0.1 E_C, J_min = 0.03 J_max, phi0 = pi/2, f = 150 MHz."""
        E_C = overrides.pop("E_C", 1.0 * K_B)
        J_max = overrides.pop("J_max", 0.1 * E_C)
        J_min = overrides.pop("J_min", 0.03 * J_max)
        return cls(E_C=E_C, J_max=J_max, J_min=J_min, **overrides)

    @property
    def T_ad(self) -> float:
        return 1.0 / self.f_pump

    def with_(self, **changes) -> "SluiceParams":
        return replace(self, **changes)


class ControlPoint(NamedTuple):
    J_L: float
    J_R: float
    n_g: float


@dataclass(frozen=True)
class Segment:
    """One linear piece of the pumping waveform; endpoints are ``(J_L, J_R, n_g)``."""

    duration_fraction: float
    start: tuple
    end: tuple


@dataclass(frozen=True)
class PumpSchedule:
    segments: tuple = field(default_factory=tuple)

    def __post_init__(self):
        segs = tuple(self.segments)
        object.__setattr__(self, "segments", segs)
        if not segs:
            raise ConfigurationError("schedule has no segments")
        fracs = np.array([s.duration_fraction for s in segs], dtype=float)
        if np.any(fracs <= 0):
            raise ConfigurationError("segment durations must be positive")
        if abs(fracs.sum() - 1.0) > 1e-12:
            raise ConfigurationError(
                f"segment duration fractions sum to {fracs.sum()!r}, expected 1")
        for k, seg in enumerate(segs):
            nxt = segs[(k + 1) % len(segs)]
            if not np.allclose(seg.end, nxt.start, rtol=1e-12, atol=0.0):
                raise ConfigurationError(
                    f"waveform discontinuous between segments {k} and {(k + 1) % len(segs)}")

    @classmethod
    def default(cls, params: SluiceParams) -> "PumpSchedule":
        """Five equal segments: open left, gate up, crossfade, gate down, close right."""
        lo, hi = params.J_min, params.J_max
        gm, gM = params.ng_min, params.ng_max
        pts = [
            (lo, lo, gm),
            (hi, lo, gm),
            (hi, lo, gM),
            (lo, hi, gM),
            (lo, hi, gm),
            (lo, lo, gm),
        ]
        segs = [Segment(0.2, pts[k], pts[k + 1]) for k in range(5)]
        return cls(tuple(segs))

    def reversed(self) -> "PumpSchedule":
        """The same waveform traversed backwards in time."""
        segs = [Segment(s.duration_fraction, s.end, s.start) for s in reversed(self.segments)]
        return PumpSchedule(tuple(segs))

    @property
    def boundaries(self) -> np.ndarray:
        """Segment start fractions plus the final 1.0."""
        fr = np.array([s.duration_fraction for s in self.segments])
        return np.concatenate([[0.0], np.cumsum(fr)])

    def validate_ranges(self, params: SluiceParams, rtol: float = 1e-12) -> None:
        for k, seg in enumerate(self.segments):
            for pt in (seg.start, seg.end):
                JL, JR, ng = pt
                for name, v in (("J_L", JL), ("J_R", JR)):
                    if not (params.J_min * (1 - rtol) <= v <= params.J_max * (1 + rtol)):
                        raise ConfigurationError(f"segment {k}: {name}={v} outside [J_min, J_max]")
                if not (params.ng_min - rtol <= ng <= params.ng_max + rtol):
                    raise ConfigurationError(f"segment {k}: n_g={ng} outside [ng_min, ng_max]")


def eval_schedule(schedule: PumpSchedule, params: SluiceParams, t: float) -> ControlPoint:
    """Control values at time ``t`` (periodic with period ``params.T_ad``)."""
    if t < 0:
        raise ValueError("t must be non-negative")
    JL, JR, ng, *_ = schedule_arrays(schedule, params.T_ad, np.array([t], dtype=float))
    return ControlPoint(float(JL[0]), float(JR[0]), float(ng[0]))


def schedule_arrays(schedule: PumpSchedule, T: float, t: np.ndarray, segment=None):
    """Vectorized schedule evaluation.

    Returns ``(J_L, J_R, n_g, dJ_L/dt, dJ_R/dt, dn_g/dt, segment_index)``.
    If ``segment`` is given (int array, same shape as ``t``, times within one
    period ``[0, T]``), that segment's linear formula is used even at its
    endpoints, which gives one-sided derivatives at the kinks.
    """
    t = np.asarray(t, dtype=float)
    bounds = schedule.boundaries
    if segment is None:
        frac = np.mod(t / T, 1.0)
        seg = np.searchsorted(bounds, frac, side="right") - 1
        seg = np.clip(seg, 0, len(schedule.segments) - 1)
    else:
        seg = np.asarray(segment, dtype=int)
        frac = t / T
    starts = np.array([s.start for s in schedule.segments], dtype=float)
    ends = np.array([s.end for s in schedule.segments], dtype=float)
    dur = np.array([s.duration_fraction for s in schedule.segments], dtype=float)
    s = (frac - bounds[seg]) / dur[seg]
    vals = starts[seg] + (ends[seg] - starts[seg]) * s[..., None]
    rates = (ends[seg] - starts[seg]) / (dur[seg] * T)[..., None]
    return (vals[..., 0], vals[..., 1], vals[..., 2],
            rates[..., 0], rates[..., 1], rates[..., 2], seg)


# --- operators (vectorized helpers work on arrays of controls) -----------------

def _tunnel_element(JL, JR, phi0):
    """<0|H|1> = -(J_L e^{i phi0/2} + J_R e^{-i phi0/2}) / 2."""
    a = np.exp(0.5j * phi0)
    return -(JL * a + JR * np.conj(a)) / 2


def _hermitian(diag0, diag1, off01):
    diag0, diag1, off01 = np.broadcast_arrays(diag0, diag1, off01)
    m = np.zeros(diag0.shape + (2, 2), dtype=complex)
    m[..., 0, 0] = diag0
    m[..., 1, 1] = diag1
    m[..., 0, 1] = off01
    m[..., 1, 0] = np.conj(off01)
    return m


def hamiltonian(ctrl: ControlPoint, phi0: float, E_C: float) -> OperatorMatrix:
    """Sluice Hamiltonian restricted to ``{|0>, |1>}``."""
    JL, JR, ng = ctrl
    return _hermitian(E_C * ng ** 2, E_C * (1 - ng) ** 2, _tunnel_element(JL, JR, phi0))


def hamiltonian_derivative(ctrl_dot: Sequence[float], ctrl: ControlPoint, phi0: float,
                           E_C: float) -> OperatorMatrix:
    """Time derivative of :func:`hamiltonian` for control rates ``(dJ_L, dJ_R, dn_g)``."""
    dJL, dJR, dng = ctrl_dot
    ng = ctrl.n_g
    return _hermitian(2 * E_C * ng * dng, -2 * E_C * (1 - ng) * dng,
                      _tunnel_element(dJL, dJR, phi0))


def current_operators(ctrl: ControlPoint, phi0: float):
    """Current operators ``(I_L, I_R)`` through the left and right SQUIDs (A).

    ``I_L`` depends on ``J_L`` only and ``I_R`` on ``J_R`` only, with
    ``I_L - I_R = -(i/hbar)[Q_island, H]``.
    """
    iL, iR = _current_elements(ctrl.J_L, ctrl.J_R, phi0)
    zero = np.zeros(np.shape(iL))
    return _hermitian(zero, zero, iL), _hermitian(zero, zero, iR)


def _current_elements(JL, JR, phi0):
    a = np.exp(0.5j * phi0)
    iL = 1j * E_CHARGE * JL * a / HBAR
    iR = -1j * E_CHARGE * JR * np.conj(a) / HBAR
    return iL, iR


def island_charge_op() -> OperatorMatrix:
    return np.diag([0.0, -2 * E_CHARGE]).astype(complex)


def squid_charge_ops():
    """Reduced charge operators ``(Q_L, Q_R)``.

    Identity parts are dropped: they never contribute to ``Tr(L Q)`` because
    the dissipator is traceless.
    """
    Q_L = np.diag([0.0, -E_CHARGE]).astype(complex)
    Q_R = np.diag([0.0, E_CHARGE]).astype(complex)
    return Q_L, Q_R


def flux_coupling_element(JL, JR, phi0):
    """``dJ = sin(phi0/2) (J_L + J_R) + i cos(phi0/2) (J_L - J_R)``."""
    return np.sin(phi0 / 2) * (JL + JR) + 1j * np.cos(phi0 / 2) * (JL - JR)


def flux_coupling_op(ctrl: ControlPoint, phi0: float) -> OperatorMatrix:
    """System part of the phase-noise coupling, in J per unit phase fluctuation."""
    dJ = flux_coupling_element(ctrl.J_L, ctrl.J_R, phi0)
    return _hermitian(0.0, 0.0, np.conj(dJ) / 2)


def charge_coupling_op(lam: float) -> OperatorMatrix:
    return np.diag([0.0, -2 * E_CHARGE * lam]).astype(complex)


# --- instantaneous eigenframe ---------------------------------------------------

@dataclass(frozen=True)
class Eigenframe:
    """Gauge-fixed instantaneous eigenbasis.

    ``basis`` has columns ``|g>, |e>`` with
    ``|g> = cos(theta)|0> + sin(theta) e^{i chi}|1>`` and
    ``|e> = sin(theta)|0> - cos(theta) e^{i chi}|1>``.
    ``w1`` is the Hermitian gauge matrix ``-i D^dagger dD/dt``.
    """

    E_g: float
    E_e: float
    omega: float
    basis: np.ndarray
    theta: float
    chi: float
    w1: np.ndarray
    theta_dot: float = 0.0
    chi_dot: float = 0.0
    gauge_fallback: bool = False


def frame_arrays(h00, h11, h01, d00, d11, d01):
    """Closed-form eigen-decomposition of 2x2 Hermitian matrices, vectorized.

    Arguments are the matrix entries of H and dH/dt. Returns a dict with
    ``E_g, E_e, omega, theta, chi, theta_dot, chi_dot, D`` (unitary, ``(...,2,2)``)
    and ``w`` (``(...,2,2)`` gauge matrix).
    """
    h00, h11 = np.real(h00), np.real(h11)
    d00, d11 = np.real(d00), np.real(d11)
    delta = (h11 - h00) / 2
    mag = np.abs(h01)
    R = np.hypot(delta, mag)
    scale = np.maximum(np.abs(h00) + np.abs(h11) + mag, np.finfo(float).tiny)
    if np.any(R <= 1e-15 * scale):
        raise DegenerateSpectrumError("degenerate spectrum")
    mean = (h00 + h11) / 2
    theta = 0.5 * np.arctan2(mag, delta)
    safe = np.where(mag > 0, h01, 1.0)
    phase = np.where(mag > 0, -np.conj(safe) / np.abs(safe), 1.0 + 0j)
    chi = np.angle(phase)
    delta_dot = (d11 - d00) / 2
    mag_dot = np.where(mag > 0, np.real(d01 * np.conj(safe)) / np.where(mag > 0, mag, 1.0), 0.0)
    theta_dot = 0.5 * (delta * mag_dot - mag * delta_dot) / R ** 2
    chi_dot = np.where(mag > 0, -np.imag(d01 / safe), 0.0)

    c, s = np.cos(theta), np.sin(theta)
    D = np.empty(np.shape(theta) + (2, 2), dtype=complex)
    D[..., 0, 0] = c
    D[..., 1, 0] = s * phase
    D[..., 0, 1] = s
    D[..., 1, 1] = -c * phase
    w = np.empty_like(D)
    w[..., 0, 0] = s * s * chi_dot
    w[..., 1, 1] = c * c * chi_dot
    w[..., 1, 0] = 1j * theta_dot - s * c * chi_dot
    w[..., 0, 1] = -1j * theta_dot - s * c * chi_dot
    return dict(E_g=mean - R, E_e=mean + R, omega=2 * R / HBAR, theta=theta, chi=chi,
                theta_dot=theta_dot, chi_dot=chi_dot, D=D, w=w)


def eigenframe(H: OperatorMatrix, H_dot: OperatorMatrix,
               prev: Optional[Eigenframe] = None) -> Eigenframe:
    """Instantaneous eigenframe of ``H`` with gauge velocity from ``H_dot``.

    The gauge makes ``<0|g>`` real and non-negative. When ``|<0|g>|`` drops
    below ``GAUGE_FALLBACK_THRESHOLD`` and ``prev`` is supplied, the eigenvector
    phases are instead chosen to maximize the overlap with ``prev``.
    """
    H = np.asarray(H)
    H_dot = np.asarray(H_dot)
    fr = frame_arrays(H[0, 0], H[1, 1], H[0, 1], H_dot[0, 0], H_dot[1, 1], H_dot[0, 1])
    D = fr["D"]
    w = fr["w"]
    fallback = False
    if prev is not None and abs(D[0, 0]) < GAUGE_FALLBACK_THRESHOLD:
        ov = np.einsum("ij,ij->j", np.conj(prev.basis), D)
        phases = np.where(np.abs(ov) > 0, np.conj(ov) / np.maximum(np.abs(ov), 1e-300), 1.0)
        D = D * phases[None, :]
        P = np.diag(phases)
        w = np.conj(P).T @ w @ P
        fallback = True
    return Eigenframe(E_g=float(fr["E_g"]), E_e=float(fr["E_e"]), omega=float(fr["omega"]),
                      basis=D, theta=float(fr["theta"]), chi=float(fr["chi"]), w1=w,
                      theta_dot=float(fr["theta_dot"]), chi_dot=float(fr["chi_dot"]),
                      gauge_fallback=fallback)


def to_eigenbasis(op: OperatorMatrix, basis: np.ndarray) -> OperatorMatrix:
    """``D^dagger op D`` (broadcasts over leading axes)."""
    return np.conj(np.swapaxes(basis, -1, -2)) @ op @ basis


# --- many-charge-state oracle ---------------------------------------------------

def oracle_multistate(ctrl: ControlPoint, phi0: float, E_C: float, n_states: int = 11):
    """Hamiltonian and current operators on ``n_states`` charge states.

    The charge states are ``n = -(N-1)/2 ... (N-1)/2``; the pair ``{0, 1}``
    sits at indices ``(N-1)/2`` and ``(N+1)/2``. Currents follow the same
    commutator construction as the two-state operators.

    Returns
    -------
    H_full, I_L_full, I_R_full : ndarray
        ``(N, N)`` complex matrices.
    """
    if n_states < 5 or n_states % 2 == 0:
        raise ValueError("n_states must be odd and >= 5")
    m = (n_states - 1) // 2
    n = np.arange(-m, m + 1)
    JL, JR, ng = ctrl
    a = np.exp(0.5j * phi0)
    H = np.diag(E_C * (n - ng) ** 2).astype(complex)
    HL = np.zeros_like(H)
    HR = np.zeros_like(H)
    for k in range(n_states - 1):
        HL[k, k + 1] = -JL * a / 2
        HR[k, k + 1] = -JR * np.conj(a) / 2
    HL = HL + HL.conj().T
    HR = HR + HR.conj().T
    H = H + HL + HR
    Q = -2 * E_CHARGE * np.diag(n).astype(complex)
    I_L = -1j / HBAR * (Q @ HL - HL @ Q)
    I_R = 1j / HBAR * (Q @ HR - HR @ Q)
    return H, I_L, I_R


def multistate_charge_op(n_states: int) -> OperatorMatrix:
    m = (n_states - 1) // 2
    return -2 * E_CHARGE * np.diag(np.arange(-m, m + 1)).astype(complex)
