"""Command-line sweeps writing CSV tables.

Subcommands: ``spectrum``, ``pump``, ``trace``, ``rates``, ``lzs``.
Exit codes: 0 success, 2 configuration error, 3 too few converged points.
"""

from __future__ import annotations

import argparse
from concurrent.futures import ProcessPoolExecutor
import io
import math
import os
import sys
from typing import Sequence

import numpy as np

from . import __version__
from .circuit import (OneOverFParams, decoherence_time, josephson_gap_slope, one_over_f_dephasing,
                      phase_variance, resonance_features, s_phase)
from .config import RunConfig, load_config
from .constants import E_CHARGE, FLUX_QUANTUM
from .errors import ConfigurationError, SluicePumpError
from .lzs import (LzsParams, averaged_excitation, exact_gaussian_average, landau_zener_probability,
                  mc_average, schedule_crossing)
from .master import CouplingSpec, DensityMatrix, run_cycle, steady_state
from .observables import integrate_cycle, trajectory_breakdown
from .sluice import PumpSchedule

TWO_E = 2 * E_CHARGE
CONVERGED_FRACTION = 0.9
TRACE_STRIDE = 16
EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 2, 3


class CsvTable:
    """Named numeric columns plus ``#`` header lines."""

    def __init__(self, columns: Sequence[str], header: Sequence[str] = ()):
        self.columns = list(columns)
        self.header = list(header)
        self.rows = []

    def add(self, *values):
        if len(values) != len(self.columns):
            raise ValueError(f"expected {len(self.columns)} values, got {len(values)}")
        vals = [float(v) for v in values]
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite entry in row {vals}")
        self.rows.append(vals)

    def as_array(self) -> np.ndarray:
        return np.array(self.rows, dtype=float).reshape(-1, len(self.columns))

    def column(self, name: str) -> np.ndarray:
        return self.as_array()[:, self.columns.index(name)]

    def dumps(self) -> str:
        buf = io.StringIO()
        for line in self.header:
            buf.write(f"# {line}\n")
        buf.write(",".join(self.columns) + "\n")
        for row in self.rows:
            buf.write(",".join(repr(v) for v in row) + "\n")
        return buf.getvalue()

    def write(self, path: str):
        d = os.path.dirname(os.path.abspath(path))
        if not os.access(d, os.W_OK):
            raise ConfigurationError(f"output directory not writable: {d}")
        with open(path, "w", newline="") as fh:
            fh.write(self.dumps())


def read_table(path_or_text: str) -> CsvTable:
    """Parse a table written by :meth:`CsvTable.write` (path or CSV text)."""
    if "\n" in path_or_text:
        text = path_or_text
    else:
        with open(path_or_text) as fh:
            text = fh.read()
    lines = text.splitlines()
    header = [ln[2:] for ln in lines if ln.startswith("#")]
    body = [ln for ln in lines if ln and not ln.startswith("#")]
    tab = CsvTable(body[0].split(","), header)
    for ln in body[1:]:
        tab.add(*ln.split(","))
    return tab


def _header(cfg: RunConfig, command: str, units: str):
    return [f"sluicepump {__version__} {command}",
            f"config_fingerprint {cfg.fingerprint()}",
            f"seed {cfg.seed}",
            f"units {units}"]


def _run_parallel(func, items, workers):
    if workers <= 1 or len(items) <= 1:
        return [func(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(func, items, chunksize=1))


# --- spectrum ------------------------------------------------------------------------

def cmd_spectrum(cfg: RunConfig) -> CsvTable:
    """Spectrum versus control flux at ``omega_ref`` and versus frequency at ``phi_band``."""
    env = cfg.circuit
    feats = resonance_features(cfg.omega_ref, env)
    hdr = _header(cfg, "spectrum", "omega rad/s; s_phase s; ratio_to_phi0 = S(omega, phi)/S(omega, 0)")
    hdr += [f"omega_ref {cfg.omega_ref!r}",
            f"phi_max {feats.phi_max!r}", f"width {feats.width!r}",
            f"s_max {feats.s_max!r}", f"s_min {feats.s_min!r}"]
    tab = CsvTable(["phi_over_phi0", "omega", "s_phase", "ratio_to_phi0"], hdr)
    grid = cfg.sweep.grid()
    s0 = float(s_phase(cfg.omega_ref, env, 0.0))
    for phi in grid:
        s = float(s_phase(cfg.omega_ref, env, phi))
        tab.add(phi, cfg.omega_ref, s, s / s0)
    omegas = np.linspace(cfg.omega_lo, cfg.omega_hi, cfg.n_omega)
    ref = s_phase(omegas, env, 0.0)
    for phi in cfg.phi_band:
        s = s_phase(omegas, env, phi)
        for w, sv, r in zip(omegas, s, s / ref):
            tab.add(phi, w, sv, r)
    return tab


# --- pump ------------------------------------------------------------------------------

def _pump_point(args):
    cfg, phi = args
    p = cfg.sluice
    env = cfg.circuit.with_(phi_ctrl=float(phi))
    try:
        ss = steady_state(PumpSchedule.default(p), CouplingSpec.flux(env, p.phi0),
                          cfg.integrator, params=p)
    except ConfigurationError:
        raise
    except SluicePumpError as exc:
        res = getattr(exc, "residual", math.nan)
        n = getattr(exc, "n_cycles", 0)
        return (phi, 0.0, 0.0, n, res if math.isfinite(res) else -1.0, 0)
    ch = integrate_cycle(ss.trajectory)
    return (phi, ch.q_pumped / TWO_E, ch.left.q_pumped_diss / TWO_E, ss.n_cycles_used,
            ss.residual, 1)


def cmd_pump(cfg: RunConfig) -> CsvTable:
    """Steady-state pumped charge per cycle across the control-flux grid."""
    hdr = _header(cfg, "pump", "charges in units of 2e per cycle; sign: left-to-right transfer "
                  "of a Cooper pair counts as -1; q_diss is the left-SQUID dissipative part; "
                  "residual -1 marks a failure without a residual")
    hdr.append(f"frame {cfg.integrator.frame} secular {cfg.integrator.secular}")
    tab = CsvTable(["phi_over_phi0", "q_pumped_over_2e", "q_diss_over_2e", "n_cycles",
                    "residual", "converged"], hdr)
    grid = cfg.sweep.grid()
    for row in _run_parallel(_pump_point, [(cfg, float(phi)) for phi in grid], cfg.workers):
        tab.add(*row)
    return tab


# --- trace -------------------------------------------------------------------------------

def cmd_trace(cfg: RunConfig) -> CsvTable:
    """Current breakdown over the steady-state cycle at ``trace_phi``."""
    p = cfg.sluice
    env = cfg.circuit.with_(phi_ctrl=cfg.trace_phi)
    sched = PumpSchedule.default(p)
    if env.M == 0:
        # no environment, hence no steady state: one cycle from the ground state
        traj = run_cycle(DensityMatrix.ground(), sched, CouplingSpec.none(), cfg.integrator,
                         params=p)
        state_line = "closed system: single cycle from the ground state"
    else:
        ss = steady_state(sched, CouplingSpec.flux(env, p.phi0), cfg.integrator, params=p)
        traj = ss.trajectory
        state_line = f"n_cycles {ss.n_cycles_used} residual {ss.residual!r}"
    sl = slice(None, None, TRACE_STRIDE)
    br = trajectory_breakdown(traj, cfg.trace_squid, sl=sl)
    ch = integrate_cycle(traj)
    side = {"left": ch.left, "right": ch.right, "device": ch.device}[cfg.trace_squid]
    hdr = _header(cfg, "trace", "currents in A; t_over_T dimensionless")
    hdr += [f"phi_over_phi0 {cfg.trace_phi!r} squid {cfg.trace_squid}",
            state_line,
            f"q_pumped_over_2e {side.q_pumped / TWO_E!r}",
            f"q_pumped_diss_over_2e {side.q_pumped_diss / TWO_E!r}"]
    tab = CsvTable(["t_over_T", "i_dyn", "i_geo", "i_dyn_diss", "i_geo_diss", "rho_gg"], hdr)
    t = traj.t[sl] / traj.context.T
    rho = traj.x[sl, 0, 0]
    for row in zip(t, br.i_dyn, br.i_geo, br.i_dyn_diss, br.i_geo_diss, rho):
        tab.add(*row)
    return tab


# --- rates ---------------------------------------------------------------------------------

def cmd_rates(cfg: RunConfig) -> CsvTable:
    """Relaxation-time estimates ``hbar^2 / (J_max^2 S)`` across the flux grid."""
    p, env = cfg.sluice, cfg.circuit
    J = p.J_max
    w = cfg.rates_omega_ref
    hdr = _header(cfg, "rates", "omega rad/s; s_at_omega_ref s; tau s")
    hdr.append(f"omega_ref {w!r} coupling_element_J {J!r}")
    for s in cfg.s_quoted:
        hdr.append(f"tau_from_quoted_S S={s!r} tau={decoherence_time(J, s)!r}")
    A = OneOverFParams((cfg.A_flux_over_phi0 * FLUX_QUANTUM) ** 2)
    slope = josephson_gap_slope(p.J_min, p.J_max, p.phi0)
    est = one_over_f_dephasing(A, slope)
    hdr.append(f"one_over_f sqrt_Aphi_ln2={math.sqrt(A.A_phase * math.log(2))!r} "
               f"dOmega_dphi={slope!r} tau={est.tau!r} reference_tau=2.8e-05 "
               f"factor={est.tau / 2.8e-5!r}")
    tab = CsvTable(["phi_over_phi0", "s_at_omega_ref", "tau"], hdr)
    for phi in cfg.sweep.grid():
        s = float(s_phase(w, env, phi))
        tau = decoherence_time(J, s)
        tab.add(phi, s, tau if math.isfinite(tau) else sys.float_info.max)
    return tab


# --- lzs -------------------------------------------------------------------------------------

def _row_seed(seed: int, idx: int) -> int:
    return int(np.random.SeedSequence([seed, idx]).generate_state(1, np.uint64)[0])


def cmd_lzs(cfg: RunConfig) -> CsvTable:
    """Noise-averaged excitation probability across the flux grid."""
    p, env = cfg.sluice, cfg.circuit
    if cfg.lzs_p_lz is None:
        p_lz = landau_zener_probability(*schedule_crossing(p))
    else:
        p_lz = cfg.lzs_p_lz
    lp = LzsParams(p_lz, cfg.lzs_alpha, p.phi0)
    hdr = _header(cfg, "lzs", "probabilities dimensionless; variance rad^2")
    hdr += [f"p_lz {p_lz!r} alpha {cfg.lzs_alpha!r} p_e0 {lp.p_e0!r}",
            f"band {cfg.lzs_omega_lo!r} {cfg.lzs_omega_hi!r} mc_samples {cfg.lzs_mc_samples}",
            "p_e_linearized uses coefficient P(1-P)sin(2 alpha)/2; "
            "p_e_expansion the Taylor coefficient P(1-P)sin(2 alpha)"]
    tab = CsvTable(["phi_over_phi0", "variance", "p_e_linearized", "p_e_expansion",
                    "p_e_exact_gaussian", "p_e_mc", "mc_std_error"], hdr)
    for i, phi in enumerate(cfg.sweep.grid()):
        var = phase_variance(env.with_(phi_ctrl=float(phi)), cfg.lzs_omega_lo, cfg.lzs_omega_hi)
        mc = mc_average(lp, var, cfg.lzs_mc_samples, _row_seed(cfg.seed, i))
        tab.add(phi, var, averaged_excitation(lp, var, "half").value,
                averaged_excitation(lp, var, "expansion").value,
                exact_gaussian_average(lp, var), mc.mean, mc.std_error)
    return tab


COMMANDS = {"spectrum": cmd_spectrum, "pump": cmd_pump, "trace": cmd_trace,
            "rates": cmd_rates, "lzs": cmd_lzs}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sluicepump", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name, func in COMMANDS.items():
        sp = sub.add_parser(name, help=func.__doc__.splitlines()[0])
        sp.add_argument("--config", help="INI configuration file")
        sp.add_argument("--out", help="output CSV path (default: stdout)")
        sp.add_argument("--workers", type=int, help="worker processes")
        sp.add_argument("--seed", type=int, help="unsigned 64-bit seed")
        sp.add_argument("--frame", choices=("adiabatic", "superadiabatic"))
        sp.add_argument("--secular", action="store_true", default=None,
                        help="use the secular dissipator (demonstration only)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, workers=args.workers, seed=args.seed,
                          frame=args.frame, secular=args.secular)
        if args.out:
            d = os.path.dirname(os.path.abspath(args.out))
            if not os.path.isdir(d) or not os.access(d, os.W_OK):
                raise ConfigurationError(f"output directory not writable: {d}")
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        tab = COMMANDS[args.command](cfg)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SluicePumpError as exc:
        print(f"{args.command} failed: {exc}", file=sys.stderr)
        return EXIT_PARTIAL
    if args.out:
        tab.write(args.out)
    else:
        sys.stdout.write(tab.dumps())
    if args.command == "pump":
        conv = tab.column("converged")
        if conv.mean() < CONVERGED_FRACTION:
            print(f"only {int(conv.sum())} of {conv.size} points converged", file=sys.stderr)
            return EXIT_PARTIAL
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
