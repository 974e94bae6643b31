"""Run configuration read from INI files.

Physical inputs are SI except the charging energy (kelvin) and fluxes (units
of the flux quantum). Unknown sections or keys are rejected.
"""

from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, field
import hashlib
import json
import math
import os
from typing import Optional

import numpy as np

from .circuit import EnvCircuitParams
from .constants import K_B
from .errors import ConfigurationError
from .master import IntegratorConfig
from .sluice import SluiceParams

SCHEMA = {
    "sluice": {"E_C_kelvin": float, "J_max_over_EC": float, "J_min_over_Jmax": float,
               "ng_min": float, "ng_max": float, "phi0": float, "f_pump": float},
    "circuit": {"R": float, "R_S": float, "C_S": float, "I_C": float, "L": float, "M": float,
                "inductance_convention": str},
    "integrator": {"steps_per_cycle": int, "frame": str, "secular": bool,
                   "steady_tol": float, "max_cycles": int},
    "sweep": {"phi_start": float, "phi_stop": float, "phi_step": float, "phi_list": str,
              "dense_centers": str, "dense_min": float, "dense_max": float, "dense_count": int},
    "spectrum": {"omega_ref": float, "omega_lo": float, "omega_hi": float, "n_omega": int,
                 "phi_band": str},
    "trace": {"phi": float, "squid": str},
    "rates": {"omega_ref": float, "s_quoted": str, "A_flux_over_phi0": float},
    "lzs": {"p_lz": float, "alpha": float, "omega_lo": float, "omega_hi": float,
            "mc_samples": int},
    "run": {"workers": int, "seed": int},
}


@dataclass(frozen=True)
class SweepSpec:
    """Base grid ``phi_start:phi_stop:phi_step`` plus log-spaced offsets around ``dense_centers``.

    A non-empty ``phi_list`` replaces the generated grid.
    """

    phi_start: float = 0.0
    phi_stop: float = 2.0
    phi_step: float = 0.01
    phi_list: tuple = ()
    dense_centers: tuple = (0.5, 1.5)
    dense_min: float = 1e-4
    dense_max: float = 1e-2
    dense_count: int = 16

    def grid(self) -> np.ndarray:
        if self.phi_list:
            g = np.array(self.phi_list, dtype=float)
        else:
            n = int(round((self.phi_stop - self.phi_start) / self.phi_step))
            base = self.phi_start + self.phi_step * np.arange(n + 1)
            offs = np.logspace(math.log10(self.dense_min), math.log10(self.dense_max),
                               self.dense_count) if self.dense_count > 0 else np.array([])
            dense = [c + s * offs for c in self.dense_centers for s in (-1.0, 1.0)]
            g = np.concatenate([base] + dense)
        g = np.unique(np.round(g, 12))
        if g.size == 0 or g.min() < 0 or g.max() > 2:
            raise ConfigurationError("sweep grid values must lie in [0, 2]")
        return g


@dataclass(frozen=True)
class RunConfig:
    sluice: SluiceParams = field(default_factory=SluiceParams.defaults)
    circuit: EnvCircuitParams = field(default_factory=EnvCircuitParams)
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    omega_ref: float = 1.7e10
    omega_lo: float = 1e10
    omega_hi: float = 1e11
    n_omega: int = 181
    phi_band: tuple = (0.5, 0.4991, 0.5003)
    trace_phi: float = 1.0
    trace_squid: str = "left"
    rates_omega_ref: float = 7.9e10
    s_quoted: tuple = (3e-12, 2.8e-15)
    A_flux_over_phi0: float = 1.7e-6
    lzs_p_lz: Optional[float] = None
    lzs_alpha: float = math.pi / 8
    lzs_omega_lo: float = 1.7e10
    lzs_omega_hi: float = 7.9e10
    lzs_mc_samples: int = 100_000
    workers: int = 1
    seed: int = 0
    source: Optional[str] = None

    def __post_init__(self):
        if self.trace_squid not in ("left", "right", "device"):
            raise ConfigurationError("trace squid must be left, right or device")
        if not 0 <= self.trace_phi <= 2:
            raise ConfigurationError("trace phi must lie in [0, 2]")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")
        if not 0 < self.omega_lo < self.omega_hi:
            raise ConfigurationError("need 0 < omega_lo < omega_hi")
        if not 0 < self.lzs_omega_lo < self.lzs_omega_hi:
            raise ConfigurationError("need 0 < lzs omega_lo < omega_hi")
        if self.n_omega < 2:
            raise ConfigurationError("n_omega must be >= 2")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigurationError("seed must be an unsigned 64-bit integer")
        self.sweep.grid()

    def fingerprint(self) -> str:
        """Short hash of every physical and numerical setting (not workers or paths)."""
        d = asdict(self)
        d.pop("workers")
        d.pop("source")
        blob = json.dumps(d, sort_keys=True, default=repr).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _floats(text):
    return tuple(float(v) for v in text.replace(",", " ").split())


def _parse_bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def load_config(path: Optional[str] = None, **overrides) -> RunConfig:
    """Read an INI file (or defaults when ``path`` is None) into a :class:`RunConfig`.

    Raises
    ------
    ConfigurationError
        On unreadable files, unknown keys or invalid values.
    """
    raw = {}
    if path is not None:
        if not os.path.isfile(path):
            raise ConfigurationError(f"config file not found: {path}")
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        try:
            cp.read(path)
        except configparser.Error as exc:
            raise ConfigurationError(f"cannot parse {path}: {exc}") from exc
        for sec in cp.sections():
            if sec not in SCHEMA:
                raise ConfigurationError(f"unknown section [{sec}]")
            for key, val in cp.items(sec):
                typ = SCHEMA[sec].get(key)
                if typ is None:
                    raise ConfigurationError(f"unknown key {key!r} in [{sec}]")
                try:
                    raw[(sec, key)] = _parse_bool(val) if typ is bool else typ(val)
                except ValueError as exc:
                    raise ConfigurationError(f"[{sec}] {key}: {exc}") from exc
    try:
        return _build(raw, path, overrides)
    except ConfigurationError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigurationError(str(exc)) from exc


def _build(raw, path, overrides) -> RunConfig:
    def get(sec, key, default):
        return raw.get((sec, key), default)

    E_C = get("sluice", "E_C_kelvin", 1.0) * K_B
    J_max = get("sluice", "J_max_over_EC", 0.1) * E_C
    sluice = SluiceParams(E_C=E_C, J_max=J_max, J_min=get("sluice", "J_min_over_Jmax", 0.03) * J_max,
                          ng_min=get("sluice", "ng_min", 0.2), ng_max=get("sluice", "ng_max", 0.8),
                          phi0=get("sluice", "phi0", math.pi / 2),
                          f_pump=get("sluice", "f_pump", 150e6))
    d = EnvCircuitParams()
    circuit = EnvCircuitParams(**{k: get("circuit", k, getattr(d, k)) for k in
                                  ("R", "R_S", "C_S", "I_C", "L", "M", "inductance_convention")})
    di = IntegratorConfig()
    integ = IntegratorConfig(**{k: get("integrator", k, getattr(di, k)) for k in
                                ("steps_per_cycle", "frame", "secular", "steady_tol", "max_cycles")})
    ds = SweepSpec()
    sw = dict(phi_start=get("sweep", "phi_start", ds.phi_start),
              phi_stop=get("sweep", "phi_stop", ds.phi_stop),
              phi_step=get("sweep", "phi_step", ds.phi_step),
              phi_list=_floats(get("sweep", "phi_list", "")),
              dense_centers=_floats(get("sweep", "dense_centers", "0.5 1.5")),
              dense_min=get("sweep", "dense_min", ds.dense_min),
              dense_max=get("sweep", "dense_max", ds.dense_max),
              dense_count=get("sweep", "dense_count", ds.dense_count))
    if not sw["phi_step"] > 0:
        raise ConfigurationError("phi_step must be positive")
    kw = dict(
        sluice=sluice, circuit=circuit, integrator=integ, sweep=SweepSpec(**sw),
        omega_ref=get("spectrum", "omega_ref", 1.7e10),
        omega_lo=get("spectrum", "omega_lo", 1e10), omega_hi=get("spectrum", "omega_hi", 1e11),
        n_omega=get("spectrum", "n_omega", 181),
        phi_band=_floats(get("spectrum", "phi_band", "0.5 0.4991 0.5003")),
        trace_phi=get("trace", "phi", 1.0), trace_squid=get("trace", "squid", "left"),
        rates_omega_ref=get("rates", "omega_ref", 7.9e10),
        s_quoted=_floats(get("rates", "s_quoted", "3e-12 2.8e-15")),
        A_flux_over_phi0=get("rates", "A_flux_over_phi0", 1.7e-6),
        lzs_p_lz=raw.get(("lzs", "p_lz")), lzs_alpha=get("lzs", "alpha", math.pi / 8),
        lzs_omega_lo=get("lzs", "omega_lo", 1.7e10), lzs_omega_hi=get("lzs", "omega_hi", 7.9e10),
        lzs_mc_samples=get("lzs", "mc_samples", 100_000),
        workers=get("run", "workers", 1), seed=get("run", "seed", 0), source=path)
    kw.update({k: v for k, v in overrides.items() if v is not None})
    integ_over = {k: kw.pop(k) for k in ("frame", "secular") if k in kw}
    if integ_over:
        kw["integrator"] = kw["integrator"].with_(**integ_over)
    return RunConfig(**kw)
