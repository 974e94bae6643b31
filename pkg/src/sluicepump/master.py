"""Non-secular master equation in the instantaneous (or superadiabatic) eigenframe.

The reduced state is stored as ``rho_gg`` and ``rho_ge``; trace and
Hermiticity hold by construction. The evolution is

    d rho/dt = -(i/hbar) [H_eff, rho] + L[rho]

with ``H_eff = diag(E_g, E_e) + hbar w1`` in the adiabatic frame and the
dissipator ``L`` assembled from seven rates built out of the coupling
operator's eigenbasis matrix elements and the environment spectrum at
``+Omega``, ``-Omega`` and zero frequency.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
import math
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .circuit import EnvCircuitParams, s_phase
from .constants import HBAR
from .errors import ConfigurationError, PositivityError, SteadyStateError
from .sluice import (PumpSchedule, SluiceParams, _hermitian, _current_elements,
                     _tunnel_element, flux_coupling_element, frame_arrays, island_charge_op,
                     schedule_arrays, squid_charge_ops)

MAX_PHASE_PER_STEP = 0.05
MAX_RATE_PER_STEP = 0.5
POSITIVITY_TOL = 1e-9
CLIP_TOL = 1e-12


# --- state -----------------------------------------------------------------------

@dataclass(frozen=True)
class DensityMatrix:
    rho_gg: float
    rho_ge: complex
    frame: str = "adiabatic"

    @classmethod
    def ground(cls, frame="adiabatic"):
        return cls(1.0, 0j, frame)

    @classmethod
    def from_vector(cls, x, frame="adiabatic"):
        return cls(float(x[0]), complex(x[1], x[2]), frame)

    @property
    def rho_ee(self) -> float:
        return 1.0 - self.rho_gg

    def vector(self) -> np.ndarray:
        return np.array([self.rho_gg, self.rho_ge.real, self.rho_ge.imag])

    def matrix(self) -> np.ndarray:
        return np.array([[self.rho_gg, self.rho_ge],
                         [np.conj(self.rho_ge), 1.0 - self.rho_gg]], dtype=complex)

    def positivity_residual(self) -> float:
        """``rho_gg rho_ee - |rho_ge|^2`` (non-negative for a physical state)."""
        return self.rho_gg * (1.0 - self.rho_gg) - abs(self.rho_ge) ** 2


def positivity_residual(x) -> np.ndarray:
    x = np.asarray(x)
    return x[..., 0] * (1 - x[..., 0]) - x[..., 1] ** 2 - x[..., 2] ** 2


# --- rates -----------------------------------------------------------------------

@dataclass(frozen=True)
class RateSet:
    """Dissipator rates (1/s); fields may be arrays sharing one shape.

    ``gamma_alpha_plus_beta`` multiplies ``rho_eg`` and is complex in general.
    """

    gamma_ge: np.ndarray
    gamma_eg: np.ndarray
    gamma_phi: np.ndarray
    gamma_alpha_plus_beta: np.ndarray
    tilde0: np.ndarray
    tilde_plus: np.ndarray
    tilde_minus: np.ndarray

    def __getitem__(self, idx):
        return RateSet(*(np.asarray(getattr(self, f))[idx] for f in self.__dataclass_fields__))

    @classmethod
    def zero(cls):
        return cls(0.0, 0.0, 0.0, 0j, 0j, 0j, 0j)


def build_rates(Z, omega, S: Callable) -> RateSet:
    """Rates from the coupling operator ``Z`` written in the eigenbasis.

    Parameters
    ----------
    Z : array_like, shape (..., 2, 2)
        System part of the interaction, ``Z[..., r, s] = <r|Z|s>`` with
        ``r, s`` in ``(g, e)``.
    omega : array_like
        Transition frequency ``(E_e - E_g)/hbar`` (rad/s).
    S : callable
        Environment spectrum ``S(w)``, vectorized.
    """
    Z = np.asarray(Z, dtype=complex)
    omega = np.asarray(omega, dtype=float)
    z_eg = Z[..., 1, 0]
    z_ge = Z[..., 0, 1]
    z_gg = Z[..., 0, 0].real
    z_ee = Z[..., 1, 1].real
    Sp = np.asarray(S(omega), dtype=float)
    Sm = np.asarray(S(-omega), dtype=float)
    S0 = np.broadcast_to(np.asarray(S(np.zeros_like(omega)), dtype=float), omega.shape)
    h2 = HBAR ** 2
    a2 = np.abs(z_eg) ** 2
    diff = z_gg - z_ee
    return RateSet(
        gamma_ge=a2 * Sm / h2,
        gamma_eg=a2 * Sp / h2,
        gamma_phi=(z_ee ** 2 / 2 + z_gg ** 2 / 2 - z_gg * z_ee) * S0 / h2,
        gamma_alpha_plus_beta=z_ge ** 2 * (Sp + Sm) / (2 * h2),
        tilde0=z_eg * diff * S0 / h2,
        tilde_plus=z_ge * (-diff) * Sp / (2 * h2),
        tilde_minus=z_ge * (-diff) * Sm / (2 * h2),
    )


def dissipator(rho_gg, rho_ge, rates: RateSet, secular: bool = False):
    """``(L_gg, L_ge)``: the dissipative part of the master equation."""
    r = rates
    L_gg = -(r.gamma_ge + r.gamma_eg) * rho_gg + r.gamma_eg
    damp = (r.gamma_eg / 2 + r.gamma_ge / 2 + r.gamma_phi) * rho_ge
    if secular:
        return L_gg + 0.0 * np.real(rho_ge), -damp
    L_gg = L_gg + np.real(r.tilde0 * rho_ge)
    L_ge = (-(r.tilde_plus + r.tilde_minus) * rho_gg - damp
            + r.gamma_alpha_plus_beta * np.conj(rho_ge) + r.tilde_plus)
    return L_gg, L_ge


def rhs(rho: DensityMatrix, rates: RateSet, omega: float, w1=None, secular: bool = False):
    """Time derivative ``(d rho_gg/dt, d rho_ge/dt)``.

    ``w1`` is the gauge matrix of the moving frame (``None`` for a fixed frame).
    """
    p, c = rho.rho_gg, rho.rho_ge
    dp = 0.0
    dc = 1j * omega * c
    if w1 is not None:
        w1 = np.asarray(w1)
        k = w1[0, 1]
        dp += 2 * np.imag(k * np.conj(c))
        dc += -1j * (w1[0, 0] - w1[1, 1]).real * c - 1j * k * (1 - 2 * p)
    L_gg, L_ge = dissipator(p, c, rates, secular)
    return dp + L_gg, dc + L_ge


def generator(rates: RateSet, omega, w1=None, secular: bool = False):
    """Affine generator ``(M, c)`` with ``dx/dt = M x + c`` for ``x = (rho_gg, Re rho_ge, Im rho_ge)``.

    Broadcasts over the shape of ``omega``; returns ``M`` of shape ``(..., 3, 3)``
    and ``c`` of shape ``(..., 3)``.
    """
    omega = np.asarray(omega, dtype=float)
    shape = omega.shape
    zero = np.zeros(shape)
    if w1 is None:
        kr = ki = dw = zero
    else:
        w1 = np.asarray(w1)
        kr, ki = w1[..., 0, 1].real, w1[..., 0, 1].imag
        dw = (w1[..., 0, 0] - w1[..., 1, 1]).real
    r = rates
    gsum = np.broadcast_to(r.gamma_ge + r.gamma_eg, shape)
    g2 = np.broadcast_to(r.gamma_eg / 2 + r.gamma_ge / 2 + r.gamma_phi, shape)
    geg = np.broadcast_to(r.gamma_eg, shape)
    if secular:
        t0 = tpm = ab = tp = np.zeros(shape, dtype=complex)
    else:
        t0 = np.broadcast_to(r.tilde0, shape)
        tpm = np.broadcast_to(r.tilde_plus + r.tilde_minus, shape)
        ab = np.broadcast_to(r.gamma_alpha_plus_beta, shape)
        tp = np.broadcast_to(r.tilde_plus, shape)
    nu = omega - dw
    M = np.empty(shape + (3, 3))
    M[..., 0, 0] = -gsum
    M[..., 0, 1] = t0.real + 2 * ki
    M[..., 0, 2] = -t0.imag - 2 * kr
    M[..., 1, 0] = -2 * ki - tpm.real
    M[..., 1, 1] = -g2 + ab.real
    M[..., 1, 2] = -nu + ab.imag
    M[..., 2, 0] = 2 * kr - tpm.imag
    M[..., 2, 1] = nu + ab.imag
    M[..., 2, 2] = -g2 - ab.real
    c = np.empty(shape + (3,))
    c[..., 0] = geg
    c[..., 1] = ki + tp.real
    c[..., 2] = -kr + tp.imag
    return M, c


# --- couplings -------------------------------------------------------------------

class FluxOperator:
    """Phase-noise coupling operator in the charge basis at fixed ``phi0``."""

    def __init__(self, phi0):
        self.phi0 = phi0

    def __call__(self, JL, JR, ng):
        dJ = flux_coupling_element(JL, JR, self.phi0)
        zero = np.zeros(np.shape(dJ))
        return _hermitian(zero, zero, np.conj(dJ) / 2)


class DiagonalOperator:
    """``a |1><1| + b |0><0|`` (gate-charge noise has ``a = -2 e lambda``, ``b = 0``)."""

    def __init__(self, a, b=0.0):
        self.a, self.b = a, b

    def __call__(self, JL, JR, ng):
        shape = np.shape(ng)
        return _hermitian(np.full(shape, self.b), np.full(shape, self.a), np.zeros(shape))


class CircuitSpectrum:
    def __init__(self, env: EnvCircuitParams):
        self.env = env

    def __call__(self, omega):
        return s_phase(omega, self.env)


class OhmicSpectrum:
    """Zero-temperature ohmic spectrum ``eta * w`` for ``w >= 0``."""

    def __init__(self, eta):
        self.eta = eta

    def __call__(self, omega):
        omega = np.asarray(omega, dtype=float)
        return np.where(omega >= 0, self.eta * omega, 0.0)


class ZeroSpectrum:
    def __call__(self, omega):
        return np.zeros(np.shape(omega))


@dataclass(frozen=True)
class CouplingSpec:
    """System operator provider plus environment spectrum."""

    kind: str
    operator: Callable
    spectrum: Callable

    @classmethod
    def flux(cls, env: EnvCircuitParams, phi0: float) -> "CouplingSpec":
        return cls("flux", FluxOperator(phi0), CircuitSpectrum(env))

    @classmethod
    def charge(cls, lam: float, spectrum: Callable) -> "CouplingSpec":
        from .constants import E_CHARGE
        return cls("charge", DiagonalOperator(-2 * E_CHARGE * lam), spectrum)

    @classmethod
    def none(cls) -> "CouplingSpec":
        return cls("none", FluxOperator(0.0), ZeroSpectrum())

    @property
    def is_zero(self) -> bool:
        return isinstance(self.spectrum, ZeroSpectrum)


@dataclass(frozen=True)
class IntegratorConfig:
    """Discretization and frame options.

    ``gauge_seed`` (testing aid) multiplies the eigenvectors by smooth random
    periodic phases; physical outputs must not depend on it.
    """

    steps_per_cycle: int = 65536
    frame: str = "adiabatic"
    secular: bool = False
    steady_tol: float = 1e-8
    max_cycles: int = 200
    gauge_seed: Optional[int] = None
    use_numba: Optional[bool] = None

    def __post_init__(self):
        if self.steps_per_cycle < 4096:
            raise ConfigurationError("steps_per_cycle must be >= 4096")
        if self.frame not in ("adiabatic", "superadiabatic"):
            raise ConfigurationError("frame must be 'adiabatic' or 'superadiabatic'")
        if not self.steady_tol > 0:
            raise ConfigurationError("steady_tol must be positive")
        if self.max_cycles < 1:
            raise ConfigurationError("max_cycles must be >= 1")

    def with_(self, **changes) -> "IntegratorConfig":
        return replace(self, **changes)


def required_steps(params: SluiceParams, schedule: PumpSchedule,
                   max_phase: float = MAX_PHASE_PER_STEP / 2) -> int:
    """Smallest power of two (>= 4096) keeping the gap phase per step below ``max_phase``."""
    t = np.linspace(0, params.T_ad, 4097)
    JL, JR, ng, *_ = schedule_arrays(schedule, params.T_ad, t)
    h = np.abs(_tunnel_element(JL, JR, params.phi0))
    delta = params.E_C * (1 - 2 * ng) / 2
    om = 2 * np.hypot(h, delta).max() / HBAR
    n = om * params.T_ad / max_phase
    return max(4096, 1 << int(math.ceil(math.log2(n))))


# --- frame algebra -----------------------------------------------------------------

_E0 = np.diag([0.0, 1.0]).astype(complex)
_EP = np.diag([1.0, -1.0]).astype(complex)
_EU = np.array([[0, 1], [1, 0]], dtype=complex)
_EV = np.array([[0, 1j], [-1j, 0]], dtype=complex)


def _dagger(U):
    return np.conj(np.swapaxes(U, -1, -2))


def _vec(rho):
    return np.stack([rho[..., 0, 0].real, rho[..., 0, 1].real, rho[..., 0, 1].imag], axis=-1)


def conj_affine(V):
    """Affine map ``(..., 3, 4)`` acting on ``x`` for ``rho -> V^dagger rho V``."""
    Vd = _dagger(V)
    out = np.empty(np.shape(V)[:-2] + (3, 4))
    for j, E in enumerate((_EP, _EU, _EV)):
        out[..., :, j] = _vec(Vd @ E @ V)
    out[..., :, 3] = _vec(Vd @ _E0 @ V)
    return out


def rho_from_vec(x):
    x = np.asarray(x)
    rho = np.empty(x.shape[:-1] + (2, 2), dtype=complex)
    rho[..., 0, 0] = x[..., 0]
    rho[..., 1, 1] = 1 - x[..., 0]
    rho[..., 0, 1] = x[..., 1] + 1j * x[..., 2]
    rho[..., 1, 0] = x[..., 1] - 1j * x[..., 2]
    return rho


class CycleContext:
    """Everything needed to evaluate the master equation along one pump period.

    Frame quantities are evaluated vectorized at arbitrary ``(t, segment)``
    pairs with ``t`` inside ``[0, T_ad]``.
    """

    def __init__(self, params: SluiceParams, schedule: PumpSchedule,
                 coupling: CouplingSpec, cfg: IntegratorConfig):
        schedule.validate_ranges(params)
        self.params = params
        self.schedule = schedule
        self.coupling = coupling
        self.cfg = cfg
        self.T = params.T_ad
        self._gauge = None
        if cfg.gauge_seed is not None:
            rng = np.random.default_rng(cfg.gauge_seed)
            self._gauge = dict(amp=rng.uniform(0.5, 2.0, 2), k=rng.integers(1, 4, 2),
                               off=rng.uniform(0, 2 * np.pi, 2))
        fr = np.array([s.duration_fraction for s in schedule.segments])
        counts = np.maximum(1, np.rint(cfg.steps_per_cycle * fr).astype(int))
        bounds = schedule.boundaries * self.T
        t_nodes, seg_steps = [np.zeros(1)], []
        for k, n in enumerate(counts):
            t_nodes.append(np.linspace(bounds[k], bounds[k + 1], n + 1)[1:])
            seg_steps.append(np.full(n, k))
        self.t_nodes = np.concatenate(t_nodes)
        self.t_nodes[-1] = self.T
        self.seg_steps = np.concatenate(seg_steps)
        self.seg_nodes = np.concatenate([self.seg_steps, self.seg_steps[-1:]])
        self.dt = np.diff(self.t_nodes)
        self.n_steps = len(self.dt)

    # gauge phases alpha_g(t), alpha_e(t) and their derivatives
    def _gauge_phases(self, t):
        g = self._gauge
        arg = 2 * np.pi * g["k"][:, None] * (np.asarray(t).ravel()[None, :] / self.T) + g["off"][:, None]
        a = g["amp"][:, None] * np.sin(arg)
        ad = g["amp"][:, None] * np.cos(arg) * 2 * np.pi * g["k"][:, None] / self.T
        return a.reshape((2,) + np.shape(t)), ad.reshape((2,) + np.shape(t))

    def quantities(self, t, seg) -> dict:
        """Frame quantities at times ``t`` using segment formulas ``seg``."""
        p = self.params
        JL, JR, ng, dJL, dJR, dng, _ = schedule_arrays(self.schedule, self.T, t, seg)
        h01 = _tunnel_element(JL, JR, p.phi0)
        d01 = _tunnel_element(dJL, dJR, p.phi0)
        fr = frame_arrays(p.E_C * ng ** 2, p.E_C * (1 - ng) ** 2, h01,
                          2 * p.E_C * ng * dng, -2 * p.E_C * (1 - ng) * dng, d01)
        D1, w = fr["D"], fr["w"]
        if self._gauge is not None:
            a, ad = self._gauge_phases(t)
            ph = np.exp(1j * a)
            Phi = np.zeros(np.shape(t) + (2, 2), dtype=complex)
            Phi[..., 0, 0] = ph[0]
            Phi[..., 1, 1] = ph[1]
            D1 = D1 @ Phi
            w = _dagger(Phi) @ w @ Phi
            w[..., 0, 0] += ad[0]
            w[..., 1, 1] += ad[1]
        D1d = _dagger(D1)
        iL, iR = _current_elements(JL, JR, p.phi0)
        zero = np.zeros(np.shape(iL))
        out = dict(JL=JL, JR=JR, ng=ng, D1=D1, w=w, omega_ad=fr["omega"],
                   E_g=fr["E_g"], E_e=fr["E_e"])
        out["I_L"] = D1d @ _hermitian(zero, zero, iL) @ D1
        out["I_R"] = D1d @ _hermitian(zero, zero, iR) @ D1
        QL, QR = squid_charge_ops()
        out["Q_island"] = D1d @ island_charge_op() @ D1
        out["Q_L"] = D1d @ QL @ D1
        out["Q_R"] = D1d @ QR @ D1
        Z_ad = D1d @ self.coupling.operator(JL, JR, ng) @ D1
        out["Z_ad"] = Z_ad
        if self.cfg.frame == "superadiabatic":
            E_g, E_e = fr["E_g"], fr["E_e"]
            h1 = frame_arrays(E_g + HBAR * w[..., 0, 0].real, E_e + HBAR * w[..., 1, 1].real,
                              HBAR * w[..., 0, 1], 0.0, 0.0, 0.0)
            D2 = h1["D"]
            out["D2"] = D2
            out["omega"] = h1["omega"]
            out["Z"] = _dagger(D2) @ Z_ad @ D2
            w_evolve = None
        else:
            out["D2"] = None
            out["omega"] = fr["omega"]
            out["Z"] = Z_ad
            w_evolve = w
        if self.coupling.is_zero:
            rates = RateSet(*(np.zeros(np.shape(t)) for _ in range(3)),
                            *(np.zeros(np.shape(t), dtype=complex) for _ in range(4)))
        else:
            rates = build_rates(out["Z"], out["omega"], self.coupling.spectrum)
        out["rates"] = rates
        out["M"], out["c"] = generator(rates, out["omega"], w_evolve, self.cfg.secular)
        return out

    def generator_at(self, t, seg):
        q = self.quantities(t, seg)
        return q["M"], q["c"], q["omega"]

    def stage_arrays(self, sl: slice):
        """RK4 coefficients for steps ``sl``: ``M (n,3,3,3)``, ``c (n,3,3)``, frame maps."""
        t0 = self.t_nodes[:-1][sl]
        dt = self.dt[sl]
        seg = self.seg_steps[sl]
        ts = np.stack([t0, t0 + dt / 2, t0 + dt], axis=1)
        segs = np.repeat(seg[:, None], 3, axis=1)
        q = self.quantities(ts, segs)
        phase = (dt[:, None] * q["omega"]).max()
        if phase >= MAX_PHASE_PER_STEP:
            raise ConfigurationError(
                f"step too large: Omega*dt = {phase:.3g} rad >= {MAX_PHASE_PER_STEP}; "
                f"increase steps_per_cycle (try {required_steps(self.params, self.schedule)})")
        # Gershgorin bound on the generator; with the phase check above this limits the rates
        stiff = (np.abs(q["M"]).sum(axis=-1).max(axis=(-1, -2)) * dt).max()
        if stiff >= MAX_RATE_PER_STEP + MAX_PHASE_PER_STEP:
            raise ConfigurationError(
                f"dissipation rates too large for the grid: |M| dt = {stiff:.3g}; "
                f"increase steps_per_cycle or reduce the coupling")
        pre = post = None
        if q["D2"] is not None:
            pre = conj_affine(q["D2"][:, 0])
            post = conj_affine(_dagger(q["D2"][:, 2]))
        return q["M"], q["c"], dt, pre, post

    def initial_ground(self) -> np.ndarray:
        """Ground state of the evolving frame at ``t = 0``, as an adiabatic-frame vector."""
        if self.cfg.frame == "adiabatic":
            return np.array([1.0, 0.0, 0.0])
        q = self.quantities(np.zeros(1), self.seg_nodes[:1])
        D2 = q["D2"][0]
        rho = D2 @ np.diag([1.0, 0.0]) @ _dagger(D2)
        return _vec(rho)


# --- single step -----------------------------------------------------------------

class StaticContext:
    """Time-independent generator (fixed Omega, w1 and rates); useful for tests."""

    def __init__(self, omega, rates: RateSet = None, w1=None, secular=False):
        self.omega = omega
        self.rates = RateSet.zero() if rates is None else rates
        self.w1 = w1
        self.secular = secular

    def generator_at(self, t, seg=None):
        t = np.asarray(t, dtype=float)
        M, c = generator(self.rates, np.full(t.shape, self.omega),
                         None if self.w1 is None else np.broadcast_to(self.w1, t.shape + (2, 2)),
                         self.secular)
        return M, c, np.full(t.shape, self.omega)


def step(rho: DensityMatrix, t: float, dt: float, context) -> DensityMatrix:
    """One classic RK4 step of the master equation.

    ``context`` is a :class:`CycleContext` (time ``t`` taken modulo the period)
    or any object with ``generator_at(t, seg) -> (M, c, omega)``.
    """
    if isinstance(context, CycleContext):
        T = context.T
        tl = math.fmod(t, T)
        mid = tl + dt / 2
        seg = int(np.clip(np.searchsorted(context.schedule.boundaries, mid / T, side="right") - 1,
                          0, len(context.schedule.segments) - 1))
        ts = np.array([tl, tl + dt / 2, tl + dt])
        M, c, om = context.generator_at(ts, np.full(3, seg))
    else:
        ts = np.array([t, t + dt / 2, t + dt])
        M, c, om = context.generator_at(ts, None)
    if dt * np.max(np.abs(om)) >= MAX_PHASE_PER_STEP:
        raise ConfigurationError(f"step too large: Omega*dt >= {MAX_PHASE_PER_STEP}")
    x = rho.vector()
    k1 = M[0] @ x + c[0]
    k2 = M[1] @ (x + dt / 2 * k1) + c[1]
    k3 = M[1] @ (x + dt / 2 * k2) + c[1]
    k4 = M[2] @ (x + dt * k3) + c[2]
    x = x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    r = positivity_residual(x)
    if -CLIP_TOL < r < 0:
        x[0] = min(max(x[0], 0.0), 1.0)
        cabs = math.hypot(x[1], x[2])
        target = math.sqrt(max(x[0] * (1 - x[0]), 0.0))
        if cabs > 0:
            x[1:] *= target / cabs
    return DensityMatrix.from_vector(x, rho.frame)


# --- whole cycles ------------------------------------------------------------------

@dataclass
class CycleTrajectory:
    """States on the integrator grid of one period.

    ``x`` holds ``(rho_gg, Re rho_ge, Im rho_ge)`` in the adiabatic eigenframe,
    shape ``(n_steps + 1, n_states, 3)``.
    """

    context: CycleContext
    x: np.ndarray
    t: np.ndarray = field(init=False)

    def __post_init__(self):
        self.t = self.context.t_nodes

    @property
    def rho_gg(self):
        return self.x[..., 0]

    @property
    def rho_ge(self):
        return self.x[..., 1] + 1j * self.x[..., 2]

    def final(self, k: int = 0) -> DensityMatrix:
        return DensityMatrix.from_vector(self.x[-1, k])

    def node_quantities(self, sl: slice = slice(None)) -> dict:
        return self.context.quantities(self.context.t_nodes[sl], self.context.seg_nodes[sl])


def _as_batch(rho0):
    if isinstance(rho0, DensityMatrix):
        return rho0.vector()[None, :]
    X0 = np.asarray(rho0, dtype=float)
    return X0[None, :] if X0.ndim == 1 else X0


def run_cycle(rho0, schedule: PumpSchedule, coupling: CouplingSpec, cfg: IntegratorConfig,
              params: SluiceParams = None, chunk: int = 1 << 16,
              check_positivity: bool = True) -> CycleTrajectory:
    """Integrate one pump period from ``rho0``.

    ``rho0`` is a :class:`DensityMatrix` (adiabatic frame), an ``x`` vector or a
    ``(K, 3)`` batch of vectors; batches need not be physical states.
    """
    if params is None:
        raise ConfigurationError("run_cycle needs the device parameters")
    ctx = CycleContext(params, schedule, coupling, cfg)
    return _run(ctx, _as_batch(rho0), chunk, check_positivity)


def _run(ctx: CycleContext, X0, chunk=1 << 16, check_positivity=True) -> CycleTrajectory:
    out = [X0[None]]
    x = X0
    for a in range(0, ctx.n_steps, chunk):
        sl = slice(a, min(a + chunk, ctx.n_steps))
        M, c, dt, pre, post = ctx.stage_arrays(sl)
        X = _kernels.propagate(M, c, dt, pre, post, x, ctx.cfg.use_numba)
        out.append(X[1:])
        x = X[-1]
    xs = np.concatenate(out, axis=0)
    if check_positivity:
        res = positivity_residual(xs).min()
        if res < -POSITIVITY_TOL:
            raise PositivityError(f"positivity residual {res:.3g} below -{POSITIVITY_TOL:g}")
    return CycleTrajectory(ctx, xs)


@dataclass(frozen=True)
class SteadyState:
    rho_cycle_start: DensityMatrix
    n_cycles_used: int
    residual: float
    trajectory: Optional[CycleTrajectory] = None


_AFFINE_PROBES = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
SINGULAR_TOL = 1e-6


def steady_state(schedule: PumpSchedule, coupling: CouplingSpec, cfg: IntegratorConfig,
                 params: SluiceParams = None) -> SteadyState:
    """Periodic state ``rho(t + T_ad) = rho(t)``.

    The one-period map is affine, ``x -> A x + b``; it is measured by
    propagating four probe vectors in one pass and its fixed point is solved
    for directly. The candidate is then iterated with full cycles until the
    start-of-cycle change drops below ``cfg.steady_tol`` (or ``max_cycles``).
    """
    if params is None:
        raise ConfigurationError("steady_state needs the device parameters")
    ctx = CycleContext(params, schedule, coupling, cfg)
    probe = _run(ctx, _AFFINE_PROBES, check_positivity=False)
    F = probe.x[-1]
    b = F[0]
    A = (F[1:] - b).T
    I_A = np.eye(3) - A
    smin = np.linalg.svd(I_A, compute_uv=False).min()
    n_used = 1
    if smin < SINGULAR_TOL:
        residual = float(np.abs((A - np.eye(3)) @ ctx.initial_ground() + b).max())
        raise SteadyStateError(
            f"steady state not reached: one-period map has no contraction "
            f"(min singular value of I - A = {smin:.3g}); residual {residual:.3g}",
            residual=residual, n_cycles=n_used)
    x = np.linalg.solve(I_A, b)
    residual = math.inf
    traj = None
    while n_used < cfg.max_cycles:
        traj = _run(ctx, x[None, :])
        n_used += 1
        x_new = traj.x[-1, 0]
        residual = _sup_diff(x_new, x)
        if residual < cfg.steady_tol:
            break
        x = x_new
    else:
        raise SteadyStateError(f"steady state not reached within {cfg.max_cycles} cycles; "
                               f"residual {residual:.3g}", residual=residual, n_cycles=n_used)
    return SteadyState(DensityMatrix.from_vector(traj.x[0, 0]), n_used, residual, traj)


def _sup_diff(x1, x0):
    return max(abs(x1[0] - x0[0]), math.hypot(x1[1] - x0[1], x1[2] - x0[2]))


def iterate_to_steady_state(schedule: PumpSchedule, coupling: CouplingSpec,
                            cfg: IntegratorConfig, params: SluiceParams,
                            rho0: DensityMatrix = None) -> SteadyState:
    """Plain repeated cycles from the ground state (no fixed-point solve)."""
    ctx = CycleContext(params, schedule, coupling, cfg)
    x = ctx.initial_ground() if rho0 is None else rho0.vector()
    residual = math.inf
    for n in range(1, cfg.max_cycles + 1):
        traj = _run(ctx, x[None, :])
        x_new = traj.x[-1, 0]
        residual = _sup_diff(x_new, x)
        x = x_new
        if residual < cfg.steady_tol:
            return SteadyState(DensityMatrix.from_vector(traj.x[0, 0]), n, residual, traj)
    raise SteadyStateError(f"steady state not reached within {cfg.max_cycles} cycles; "
                           f"residual {residual:.3g}", residual=residual, n_cycles=cfg.max_cycles)
