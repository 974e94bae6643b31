"""Currents, dissipative currents and pumped charge per cycle.

All operators and states are expressed in the adiabatic eigenframe
``(|g>, |e>)``. For SQUID ``k`` the expectation value of the current splits
into

    I^D      = rho_gg I_gg + rho_ee I_ee
    I^G      = 2 Re(rho_ge I_eg)
    I^D,diss = (Q_gg - Q_ee) L_gg
    I^G,diss = 2 Re(L_ge Q_eg)

where ``L`` is the dissipative part of the master equation and ``Q_k`` the
charge transferred through SQUID ``k``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .constants import E_CHARGE, HBAR
from .master import CycleTrajectory, RateSet, _dagger, dissipator, rho_from_vec

TWO_E = 2 * E_CHARGE


class DissipatorElements(NamedTuple):
    L_gg: np.ndarray
    L_ge: np.ndarray


def dissipator_elements(rho_gg, rho_ge, rates: RateSet, secular: bool = False) -> DissipatorElements:
    """``L_gg`` and ``L_ge`` for states and rates in one frame (broadcasts)."""
    return DissipatorElements(*dissipator(rho_gg, rho_ge, rates, secular))


def dissipative_current(L: DissipatorElements, Q) -> np.ndarray:
    """``Tr(L Q) = (Q_gg - Q_ee) L_gg + 2 Re(L_ge Q_eg)``."""
    Q = np.asarray(Q)
    return ((Q[..., 0, 0] - Q[..., 1, 1]).real * L.L_gg
            + 2 * np.real(L.L_ge * Q[..., 1, 0]))


@dataclass(frozen=True)
class CurrentBreakdown:
    """Current through one SQUID split into dynamic/geometric and dissipative parts (A)."""

    i_dyn: np.ndarray
    i_geo: np.ndarray
    i_dyn_diss: np.ndarray
    i_geo_diss: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.i_dyn + self.i_geo + self.i_dyn_diss + self.i_geo_diss


def current_breakdown(rho_gg, rho_ge, L: DissipatorElements, I, Q) -> CurrentBreakdown:
    """Split ``Tr(rho I) + Tr(L Q)`` into its four parts."""
    I = np.asarray(I)
    Q = np.asarray(Q)
    rho_gg = np.asarray(rho_gg)
    i_dyn = rho_gg * I[..., 0, 0].real + (1 - rho_gg) * I[..., 1, 1].real
    i_geo = 2 * np.real(rho_ge * I[..., 1, 0])
    return CurrentBreakdown(i_dyn, i_geo,
                            (Q[..., 0, 0] - Q[..., 1, 1]).real * L.L_gg,
                            2 * np.real(L.L_ge * Q[..., 1, 0]))


def _ad_dissipator(q: dict, x: np.ndarray, secular: bool) -> DissipatorElements:
    """Dissipator at grid nodes, returned in the adiabatic frame."""
    D2 = q["D2"]
    if D2 is None:
        return dissipator_elements(x[..., 0], x[..., 1] + 1j * x[..., 2], q["rates"], secular)
    rho = _dagger(D2) @ rho_from_vec(x) @ D2
    Lgg, Lge = dissipator(rho[..., 0, 0].real, rho[..., 0, 1], q["rates"], secular)
    Lm = np.empty(np.shape(Lgg) + (2, 2), dtype=complex)
    Lm[..., 0, 0] = Lgg
    Lm[..., 1, 1] = -Lgg
    Lm[..., 0, 1] = Lge
    Lm[..., 1, 0] = np.conj(Lge)
    La = D2 @ Lm @ _dagger(D2)
    return DissipatorElements(La[..., 0, 0].real, La[..., 0, 1])


def trajectory_breakdown(traj: CycleTrajectory, squid: str = "left", state: int = 0,
                         sl: slice = slice(None)) -> CurrentBreakdown:
    """Current breakdown on the trajectory grid for ``squid`` in ``left | right | device``."""
    q = traj.node_quantities(sl)
    x = traj.x[sl, state]
    L = _ad_dissipator(q, x, traj.context.cfg.secular)
    rg, rge = x[:, 0], x[:, 1] + 1j * x[:, 2]
    if squid == "device":
        bl = current_breakdown(rg, rge, L, q["I_L"], q["Q_L"])
        br = current_breakdown(rg, rge, L, q["I_R"], q["Q_R"])
        return CurrentBreakdown(*((getattr(bl, f) + getattr(br, f)) / 2
                                  for f in ("i_dyn", "i_geo", "i_dyn_diss", "i_geo_diss")))
    key = {"left": "L", "right": "R"}.get(squid)
    if key is None:
        raise ValueError("squid must be 'left', 'right' or 'device'")
    return current_breakdown(rg, rge, L, q["I_" + key], q["Q_" + key])


@dataclass(frozen=True)
class SquidCharges:
    """Charges per period through one SQUID (C)."""

    q_dyn: float
    q_pumped: float
    q_dyn_diss: float
    q_pumped_diss: float

    @property
    def q_total(self) -> float:
        return self.q_dyn + self.q_pumped + self.q_dyn_diss + self.q_pumped_diss


@dataclass(frozen=True)
class CycleCharges:
    """Integrated charges for the left and right SQUIDs and their average."""

    left: SquidCharges
    right: SquidCharges

    @property
    def device(self) -> SquidCharges:
        return SquidCharges(*((getattr(self.left, f) + getattr(self.right, f)) / 2
                              for f in ("q_dyn", "q_pumped", "q_dyn_diss", "q_pumped_diss")))

    @property
    def q_pumped(self) -> float:
        return self.device.q_pumped

    @property
    def q_pumped_diss(self) -> float:
        return self.device.q_pumped_diss

    @property
    def q_total(self) -> float:
        return self.device.q_total


def integrate_cycle(traj: CycleTrajectory, state: int = 0, chunk: int = 1 << 16) -> CycleCharges:
    """Trapezoid integrals of the current breakdown over one period."""
    t = traj.t
    ctx = traj.context
    if len(t) != ctx.n_steps + 1 or t[0] != 0.0 or abs(t[-1] - ctx.T) > 1e-12 * ctx.T:
        raise ValueError("trajectory must cover exactly one period on the integrator grid")
    sums = {"left": np.zeros(4), "right": np.zeros(4)}
    n = len(t)
    for a in range(0, n - 1, chunk):
        sl = slice(a, min(a + chunk + 1, n))
        tt = t[sl]
        w = np.zeros(len(tt))
        dt = np.diff(tt)
        w[:-1] += dt / 2
        w[1:] += dt / 2
        q = traj.node_quantities(sl)
        x = traj.x[sl, state]
        L = _ad_dissipator(q, x, ctx.cfg.secular)
        rg, rge = x[:, 0], x[:, 1] + 1j * x[:, 2]
        for side, key in (("left", "L"), ("right", "R")):
            b = current_breakdown(rg, rge, L, q["I_" + key], q["Q_" + key])
            sums[side] += [w @ b.i_dyn, w @ b.i_geo, w @ b.i_dyn_diss, w @ b.i_geo_diss]
    return CycleCharges(SquidCharges(*map(float, sums["left"])),
                        SquidCharges(*map(float, sums["right"])))


def island_charge(traj: CycleTrajectory, state: int = 0, sl: slice = slice(None)) -> np.ndarray:
    """``<Q_island>`` on the grid (C)."""
    q = traj.node_quantities(sl)
    x = traj.x[sl, state]
    Q = q["Q_island"]
    return (x[:, 0] * Q[:, 0, 0].real + (1 - x[:, 0]) * Q[:, 1, 1].real
            + 2 * np.real((x[:, 1] + 1j * x[:, 2]) * Q[:, 1, 0]))


# --- charge-noise null test ---------------------------------------------------------

@dataclass(frozen=True)
class NullCertificate:
    n_trials: int
    max_nonsecular: float
    max_secular: float
    secular_fraction_above: float
    scale: float


def _random_unit_phase_frame(theta, chi):
    c, s = np.cos(theta), np.sin(theta)
    e = np.exp(1j * chi)
    D = np.empty(np.shape(theta) + (2, 2), dtype=complex)
    D[..., 0, 0] = c
    D[..., 1, 0] = s * e
    D[..., 0, 1] = s
    D[..., 1, 1] = -c * e
    return D


def charge_noise_null_certificate(n_trials: int = 10000, seed: int = 0,
                                  tol: float = 1e-13, secular_threshold: float = 1e-3
                                  ) -> NullCertificate:
    """Check that diagonal charge-basis noise carries no dissipative current.

    For random ``Z = a|1><1| + b|0><0|``, eigenframe angles, gap, spectrum
    values and states, the non-secular ``Tr(L Q_k)`` must vanish. Residuals
    are scaled by ``2e max(|a|,|b|)^2 max(S) / hbar^2`` for each sample. The
    secular counterpart is recorded for comparison, scaled by ``2e`` times the
    largest rate of the sample.
    """
    if n_trials < 1000:
        raise ValueError("n_trials must be >= 1000")
    rng = np.random.default_rng(seed)
    n = n_trials
    a = rng.uniform(-1, 1, n) * TWO_E
    b = rng.uniform(-1, 1, n) * TWO_E
    theta = rng.uniform(0, np.pi / 2, n)
    chi = rng.uniform(0, 2 * np.pi, n)
    omega = rng.uniform(1e9, 1e11, n)
    S_vals = rng.uniform(0, 1, (n, 3)) * 1e-12
    p = rng.uniform(0, 1, n)
    r = np.sqrt(p * (1 - p)) * rng.uniform(0, 1, n)
    rge = r * np.exp(1j * rng.uniform(0, 2 * np.pi, n))
    D = _random_unit_phase_frame(theta, chi)
    Zc = np.zeros((n, 2, 2), dtype=complex)
    Zc[:, 0, 0] = b
    Zc[:, 1, 1] = a
    Z = _dagger(D) @ Zc @ D
    from .master import build_rates

    def S(w):
        # per-sample values at +Omega, -Omega and 0
        if np.all(w == 0):
            return S_vals[:, 2]
        return np.where(w > 0, S_vals[:, 0], S_vals[:, 1])

    rates = build_rates(Z, omega, S)
    zmax = np.maximum(np.abs(a), np.abs(b))
    scale = TWO_E * zmax ** 2 * S_vals.max(axis=1) / HBAR ** 2
    scale = np.where(scale > 0, scale, 1.0)
    # the secular violation is measured against the sample's own rate scale
    rate_mag = np.max(np.stack([np.abs(getattr(rates, f)) for f in rates.__dataclass_fields__]), axis=0)
    sec_scale = TWO_E * np.where(rate_mag > 0, rate_mag, 1.0)
    QL = np.diag([0.0, -E_CHARGE]).astype(complex)
    QR = np.diag([0.0, E_CHARGE]).astype(complex)
    res_ns = np.zeros(n)
    res_s = np.zeros(n)
    for Qc in (QL, QR):
        Q = _dagger(D) @ Qc @ D
        ns = dissipative_current(dissipator_elements(p, rge, rates, False), Q)
        se = dissipative_current(dissipator_elements(p, rge, rates, True), Q)
        res_ns = np.maximum(res_ns, np.abs(ns) / scale)
        res_s = np.maximum(res_s, np.abs(se) / sec_scale)
    worst = int(np.argmax(res_ns))
    if res_ns[worst] > tol:
        raise AssertionError(
            f"non-secular dissipative current {res_ns[worst]:.3g} (scaled) at sample {worst}: "
            f"a={a[worst]:.4g}, b={b[worst]:.4g}, theta={theta[worst]:.4g}, chi={chi[worst]:.4g}")
    return NullCertificate(n, float(res_ns.max()), float(res_s.max()),
                           float(np.mean(res_s > secular_threshold)), float(TWO_E))
