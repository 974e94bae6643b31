import numpy as np
import pytest
from hypothesis import given, strategies as st

from sluicepump.circuit import EnvCircuitParams
from sluicepump.constants import E_CHARGE
from sluicepump.master import (CouplingSpec, DensityMatrix, IntegratorConfig, RateSet, run_cycle,
                               steady_state)
from sluicepump.observables import (TWO_E, DissipatorElements, charge_noise_null_certificate,
                                    current_breakdown, dissipative_current, dissipator_elements,
                                    integrate_cycle, island_charge, trajectory_breakdown)
from sluicepump.sluice import PumpSchedule, SluiceParams


def _herm(rng, scale=1.0):
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    return scale * (a + a.conj().T) / 2


@given(st.integers(0, 2 ** 32 - 1))
def test_breakdown_matches_traces(seed):
    rng = np.random.default_rng(seed)
    I, Q = _herm(rng), _herm(rng)
    p = rng.uniform()
    c = np.sqrt(p * (1 - p)) * rng.uniform() * np.exp(1j * rng.uniform(0, 6.3))
    lgg = rng.normal()
    lge = complex(*rng.normal(size=2))
    L = DissipatorElements(lgg, lge)
    rho = DensityMatrix(p, c).matrix()
    Lm = np.array([[lgg, lge], [np.conj(lge), -lgg]])
    b = current_breakdown(p, c, L, I, Q)
    assert b.i_dyn + b.i_geo == pytest.approx(np.trace(rho @ I).real, abs=1e-12)
    assert b.i_dyn_diss + b.i_geo_diss == pytest.approx(np.trace(Lm @ Q).real, abs=1e-12)
    assert dissipative_current(L, Q) == pytest.approx(np.trace(Lm @ Q).real, abs=1e-12)


def test_ground_state_is_dark():
    rates = RateSet(0.0, 3.0, 0.5, 0.7 + 0.1j, 0.2j, 0.3, 0.0)
    L = dissipator_elements(1.0, 0j, rates)
    assert L.L_gg == 0


@pytest.fixture(scope="module")
def ideal():
    p = SluiceParams.defaults(f_pump=15e6)
    sch = PumpSchedule.default(p)
    cfg = IntegratorConfig(steps_per_cycle=131072)
    tr = run_cycle(DensityMatrix.ground(), sch, CouplingSpec.none(), cfg, params=p)
    return p, sch, cfg, tr


def test_ideal_pumping_one_pair(ideal):
    *_, tr = ideal
    ch = integrate_cycle(tr)
    # one Cooper pair per cycle, right to left in this sign convention
    assert abs(ch.q_pumped) / TWO_E == pytest.approx(1.0, abs=0.05)
    assert ch.q_pumped < 0
    assert ch.q_pumped_diss == 0


def test_charge_consistency(ideal):
    *_, tr = ideal
    ch = integrate_cycle(tr)
    Qi = island_charge(tr)
    assert abs(ch.left.q_total - ch.right.q_total - (Qi[-1] - Qi[0])) / TWO_E < 1e-8


def test_ehrenfest_along_trajectory(ideal):
    *_, tr = ideal
    sl = slice(1000, 1200)
    Qi = island_charge(tr, sl=sl)
    dQ = np.gradient(Qi, tr.t[sl])
    L = trajectory_breakdown(tr, "left", sl=sl).total
    R = trajectory_breakdown(tr, "right", sl=sl).total
    scale = np.abs(L).max()
    # central differences carry an O((Omega dt)^2) error
    assert np.abs((dQ - (L - R))[2:-2]).max() <= 1e-4 * scale


def test_device_current_is_average(ideal):
    *_, tr = ideal
    sl = slice(0, None, 997)
    d = trajectory_breakdown(tr, "device", sl=sl).total
    L = trajectory_breakdown(tr, "left", sl=sl).total
    R = trajectory_breakdown(tr, "right", sl=sl).total
    assert np.allclose(d, (L + R) / 2)
    with pytest.raises(ValueError):
        trajectory_breakdown(tr, "middle", sl=sl)


def test_grid_refinement(ideal):
    p, sch, cfg, tr = ideal
    q1 = integrate_cycle(tr).q_pumped
    tr2 = run_cycle(DensityMatrix.ground(), sch, CouplingSpec.none(), cfg.with_(steps_per_cycle=262144),
                    params=p)
    assert abs(integrate_cycle(tr2).q_pumped - q1) / TWO_E < 1e-6


def test_gauge_invariance(ideal):
    p, sch, cfg, tr = ideal
    q = integrate_cycle(tr).q_pumped
    for seed in (1, 2):
        trg = run_cycle(DensityMatrix.ground(), sch, CouplingSpec.none(), cfg.with_(gauge_seed=seed),
                        params=p)
        assert abs(integrate_cycle(trg).q_pumped - q) / TWO_E < 1e-6


def test_frame_equivalence(ideal):
    p, sch, cfg, tr = ideal
    q = integrate_cycle(tr).q_pumped
    sa = cfg.with_(frame="superadiabatic")
    from sluicepump.master import CycleContext
    x0 = CycleContext(p, sch, CouplingSpec.none(), sa).initial_ground()
    trs = run_cycle(x0, sch, CouplingSpec.none(), sa, params=p)
    assert abs(integrate_cycle(trs).q_pumped - q) / TWO_E <= 1e-3


def test_partial_trajectory_rejected(ideal):
    *_, tr = ideal
    from sluicepump.master import CycleTrajectory
    short = CycleTrajectory(tr.context, tr.x)
    short.t = tr.t[:-1]
    with pytest.raises(ValueError):
        integrate_cycle(short)


def test_null_certificate():
    cert = charge_noise_null_certificate(n_trials=10000, seed=3)
    assert cert.max_nonsecular <= 1e-13
    assert cert.secular_fraction_above >= 0.9
    with pytest.raises(ValueError):
        charge_noise_null_certificate(n_trials=10)


def test_charge_noise_in_cycle_carries_no_dissipative_charge():
    p = SluiceParams.defaults()
    sch = PumpSchedule.default(p)
    cs = CouplingSpec.charge(0.02, lambda w: np.full(np.shape(w), 1e-23))
    tr = run_cycle(DensityMatrix(0.6, 0.1 + 0.2j), sch, cs, IntegratorConfig(), params=p)
    b = trajectory_breakdown(tr, "left", sl=slice(0, None, 64))
    scale = np.abs(b.i_geo).max()
    assert np.abs(b.i_dyn_diss + b.i_geo_diss).max() <= 1e-10 * scale


def test_dissipative_charge_scale_at_flux_one():
    p = SluiceParams.defaults()
    sch = PumpSchedule.default(p)
    ss = steady_state(sch, CouplingSpec.flux(EnvCircuitParams(phi_ctrl=1.0), p.phi0),
                      IntegratorConfig(), params=p)
    ch = integrate_cycle(ss.trajectory)
    assert abs(ch.left.q_pumped_diss) / TWO_E < 1e-2
    # the island charge is periodic in steady state
    assert abs(ch.left.q_total - ch.right.q_total) / TWO_E < 1e-8
    # SQUID charges are opposite, so the dissipative parts cancel in the device average
    assert ch.device.q_pumped_diss == pytest.approx(0.0, abs=1e-12 * abs(ch.left.q_pumped_diss))


def test_stiff_rates_rejected():
    from sluicepump.errors import ConfigurationError
    p = SluiceParams.defaults()
    cs = CouplingSpec.charge(0.02, lambda w: np.full(np.shape(w), 1e-13))
    with pytest.raises(ConfigurationError, match="rates too large"):
        run_cycle(DensityMatrix.ground(), PumpSchedule.default(p), cs, IntegratorConfig(), params=p)
