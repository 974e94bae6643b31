import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sluicepump.errors import ConfigurationError
from sluicepump.lzs import (LzsParams, averaged_excitation, exact_gaussian_average,
                            excitation_probability, landau_zener_probability, mc_average,
                            schedule_crossing)
from sluicepump.master import CouplingSpec, DensityMatrix, IntegratorConfig, run_cycle
from sluicepump.sluice import PumpSchedule, Segment, SluiceParams


def test_params_validation():
    with pytest.raises(ConfigurationError):
        LzsParams(1.5, 0.1)
    with pytest.raises(ConfigurationError):
        LzsParams(0.5, math.nan)


def test_noise_free_values():
    assert LzsParams(0.5, 0.0, 0.0).p_e0 == pytest.approx(0.25)
    assert LzsParams(0.5, math.pi / 4).p_e0 == pytest.approx(0.0, abs=1e-16)
    assert LzsParams(0.0, 0.3).p_e0 == 0.0


@given(st.floats(0, 1), st.floats(-3, 3), st.floats(0, 0.5))
def test_exact_average_bounds(P, alpha, s2):
    p = LzsParams(P, alpha)
    v = exact_gaussian_average(p, s2)
    assert -1e-15 <= v <= P * (1 - P) + 1e-15
    assert exact_gaussian_average(p, 0.0) == pytest.approx(p.p_e0, abs=1e-15)


def test_exact_average_by_quadrature():
    from scipy import integrate
    p = LzsParams(0.3, 0.4)
    s2 = 0.05
    f = lambda d: excitation_probability(p, p.phase_bias / 2 + d) * np.exp(-d * d / (2 * s2)) / math.sqrt(2 * math.pi * s2)
    ref, _ = integrate.quad(f, -3, 3, epsabs=1e-14)
    assert exact_gaussian_average(p, s2) == pytest.approx(ref, rel=1e-10)


def test_linearized_slopes():
    p = LzsParams(0.3, math.pi / 8)
    h = 1e-6
    fd = (exact_gaussian_average(p, h) - exact_gaussian_average(p, 0)) / h
    assert averaged_excitation(p, 0.0, "expansion").slope == pytest.approx(fd, rel=1e-5)
    assert averaged_excitation(p, 0.0, "half").slope == pytest.approx(fd / 2, rel=1e-5)
    assert averaged_excitation(p, 0.02).valid is False
    assert averaged_excitation(p, 0.005).valid is True
    with pytest.raises(ValueError):
        averaged_excitation(p, 0.001, "other")


@pytest.mark.parametrize("s2", [1e-4, 1e-3])
def test_mc_against_closed_form(s2):
    p = LzsParams(0.3, math.pi / 8)
    mc = mc_average(p, s2, 1_000_000, seed=7)
    assert abs(mc.mean - exact_gaussian_average(p, s2)) <= 3 * mc.std_error


def test_mc_deterministic_and_validated():
    p = LzsParams(0.3, 0.2)
    assert mc_average(p, 1e-3, 10_000, seed=5) == mc_average(p, 1e-3, 10_000, seed=5)
    assert mc_average(p, 1e-3, 10_000, seed=5) != mc_average(p, 1e-3, 10_000, seed=6)
    assert mc_average(p, 0.0, 10_000).std_error == 0
    with pytest.raises(ValueError):
        mc_average(p, 1e-3, 100)


def test_landau_zener_limits():
    assert landau_zener_probability(0.0, 1.0) == 1.0
    assert landau_zener_probability(1e-23, 1e-20) < 1e-100
    with pytest.raises(ValueError):
        landau_zener_probability(1e-24, 0.0)


def test_landau_zener_against_simulated_passage():
    # a single gate ramp with the tunnelling couplings held fixed
    p = SluiceParams.defaults()
    P = landau_zener_probability(*schedule_crossing(p))
    lo, hi, gm, gM = p.J_min, p.J_max, p.ng_min, p.ng_max
    sch = PumpSchedule((Segment(0.5, (hi, lo, gm), (hi, lo, gM)), Segment(0.5, (hi, lo, gM), (hi, lo, gm))))
    # one half-period of this schedule matches the ramp duration of the default one
    pp = p.with_(f_pump=p.f_pump * 2.5)
    tr = run_cycle(DensityMatrix.ground(), sch, CouplingSpec.none(),
                   IntegratorConfig(steps_per_cycle=131072), params=pp)
    pe = 1 - tr.x[tr.context.n_steps // 2, 0, 0]
    assert pe == pytest.approx(P, rel=0.05)
