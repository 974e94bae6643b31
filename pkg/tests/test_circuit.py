import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sluicepump.circuit import (EnvCircuitParams, OneOverFParams, decoherence_time,
                                josephson_gap_slope, one_over_f_dephasing, phase_variance,
                                resonance_features, s_current, s_phase, s_phase_approx,
                                s_voltage, squid_inductance, z_branch, z_branch_literal,
                                z_total)
from sluicepump.constants import E_CHARGE, FLUX_QUANTUM, HBAR, K_B
from sluicepump.errors import ConfigurationError, InductancePoleError, QuadratureError

ENV = EnvCircuitParams()


def test_defaults_and_L0():
    assert ENV.L_0 == pytest.approx(HBAR / (2 * math.pi * E_CHARGE * 25e-6), rel=1e-14)
    assert ENV.L_0 == pytest.approx(4.19e-12, rel=3e-3)
    assert ENV.with_(inductance_convention="josephson").L_0 == pytest.approx(math.pi * ENV.L_0)


@pytest.mark.parametrize("kw", [dict(R=0.0), dict(C_S=-1.0), dict(M=-1e-9),
                                dict(inductance_convention="other")])
def test_param_validation(kw):
    with pytest.raises(ConfigurationError):
        EnvCircuitParams(**kw)


def test_squid_inductance_pole():
    assert squid_inductance(ENV, 0.0) == pytest.approx(ENV.L_0)
    assert squid_inductance(ENV, 1.0) == pytest.approx(-ENV.L_0)
    with pytest.raises(InductancePoleError):
        squid_inductance(ENV, 0.5)


@given(st.floats(1e8, 1e12), st.floats(0.0, 2.0).filter(lambda f: abs(math.cos(math.pi * f)) > 1e-3))
def test_branch_forms_agree(w, phi):
    a = z_branch(w, ENV, phi)
    b = z_branch_literal(w, ENV, phi)
    assert abs(a - b) <= 1e-9 * abs(a)


def test_branch_at_pole_is_rc():
    w = 3e10
    z = z_branch(w, ENV, 0.5)
    assert z == pytest.approx(1 / (1 / ENV.R_S + 1j * w * ENV.C_S), rel=1e-8)


def test_voltage_noise():
    assert s_voltage(1e10, ENV) == pytest.approx(2 * HBAR * 1e10 * 30.0)
    assert s_voltage(-1e10, ENV) == 0.0
    assert np.all(s_current([-1e9, 0.0], ENV) == 0.0)


def test_phase_spectrum_chain():
    w, phi = 5e10, 0.3
    Sphi = s_phase(w, ENV, phi)
    ref = (2 * math.pi / FLUX_QUANTUM) ** 2 * ENV.M ** 2 * 2 * HBAR * w * ENV.R / abs(z_total(w, ENV, phi)) ** 2
    assert Sphi == pytest.approx(ref, rel=1e-12)
    assert np.all(s_phase(np.array([-w, 0.0]), ENV, phi) == 0)


def test_periodic_and_symmetric_in_flux():
    w = 1.7e10
    phis = np.linspace(0.01, 0.99, 23)
    a = s_phase(w, ENV, phis)
    assert np.allclose(a, s_phase(w, ENV, phis + 1), rtol=1e-10)
    assert np.allclose(a, s_phase(w, ENV, 2 - phis), rtol=1e-10)


def test_zero_mutual_inductance():
    assert s_phase(1e10, ENV.with_(M=0.0), 0.2) == 0.0


def test_resonance_features():
    rf = resonance_features(7.9e10, ENV)
    assert rf.width == pytest.approx(1.93e-3, rel=0.2)
    assert rf.s_max == pytest.approx(3e-12, rel=0.5)
    # minima at half-integer flux on a dense grid
    phis = np.linspace(0.0, 2.0, 20001)
    S = s_phase(1.7e10, ENV, phis)
    i = np.argsort(S)[:2]
    assert sorted(np.round(phis[i], 4)) == [0.5, 1.5]
    # the dip sits next to a peak near 1/2 + width; the shunt branch moves it
    # by O(10%) depending on frequency
    fine = 0.5 + np.linspace(0, 5 * rf.width, 5001)
    for w, tol in ((1.7e10, 0.2), (7.9e10, 0.2)):
        Sf = s_phase(w, ENV, fine)
        assert fine[np.argmax(Sf)] - 0.5 == pytest.approx(rf.width, rel=tol)
    assert s_phase(1.7e10, ENV, fine).max() == pytest.approx(resonance_features(1.7e10, ENV).s_max, rel=0.02)


@pytest.mark.parametrize("off", [2e-3, 4e-3, 7e-3, 1e-2, -3e-3, -1e-2])
def test_near_resonance_closed_form(off):
    a = s_phase_approx(1.7e10, ENV, 0.5 + off)
    b = s_phase(1.7e10, ENV, 0.5 + off)
    assert abs(a - b) <= 0.1 * b


def test_closed_form_degrades_with_frequency():
    # the closed form drops the shunt R_S || C_S, which matters once w C_S ~ 1/R_S
    err = [abs(s_phase_approx(w, ENV, 0.502) / s_phase(w, ENV, 0.502) - 1) for w in (1e10, 4e10, 7.9e10)]
    assert err[0] < err[1] < err[2]


def test_closed_form_domain():
    with pytest.raises(ZeroDivisionError):
        s_phase_approx(1e10, ENV, 0.5)
    with pytest.raises(ValueError):
        s_phase_approx(1e10, ENV, 0.6)


def test_phase_variance_quadrature():
    # linear spectrum integrates exactly
    v = phase_variance(ENV, 1.0, 3.0, spectrum=lambda w: 2.0 * w)
    assert v == pytest.approx(8.0, rel=1e-12)
    v = phase_variance(ENV, 1.7e10, 7.9e10)
    assert v > 0 and math.isfinite(v)
    with pytest.raises(ValueError):
        phase_variance(ENV, 2.0, 1.0)
    with pytest.raises(QuadratureError):
        phase_variance(ENV, 1e-3, 1.0, spectrum=lambda w: 1 / (w - 0.5) ** 2)


def test_decoherence_times():
    E_C = K_B
    J = 0.1 * E_C
    assert decoherence_time(J, 3e-12) == pytest.approx(1.9448e-9, rel=1e-3)
    assert decoherence_time(J, 2.8e-15) == pytest.approx(2.0837e-6, rel=1e-3)
    assert decoherence_time(J, 0.0) == math.inf
    with pytest.raises(ValueError):
        decoherence_time(J, -1.0)


def test_one_over_f_chain():
    p = OneOverFParams((1.7e-6 * FLUX_QUANTUM) ** 2)
    assert math.sqrt(p.A_phase * math.log(2)) == pytest.approx(8.893e-6, rel=1e-3)
    J_M = 0.1 * K_B
    slope = josephson_gap_slope(0.03 * J_M, J_M, math.pi / 2)
    assert slope == pytest.approx(3.9258e8, rel=1e-3)
    est = one_over_f_dephasing(p, slope)
    assert est.tau == pytest.approx(2.864e-4, rel=1e-3)
    assert one_over_f_dephasing(p, 0.0).tau == math.inf


def test_gap_slope_finite_difference():
    JL, JR, phi = 1.1e-24, 0.4e-24, 1.1

    def om(f):
        return math.sqrt(JL ** 2 + JR ** 2 + 2 * JL * JR * math.cos(f)) / HBAR

    h = 1e-6
    fd = abs(om(phi + h) - om(phi - h)) / (2 * h)
    assert josephson_gap_slope(JL, JR, phi) == pytest.approx(fd, rel=1e-7)


def test_closed_form_maximum_at_lower_band_edge():
    assert resonance_features(1.7e10, ENV).s_max == pytest.approx(5.2e-13, rel=0.02)


def test_closed_form_is_shunt_free_limit():
    bare = ENV.with_(R_S=1e12, C_S=1e-30)
    for off in (1e-3, -1e-3, 5e-3):
        a = s_phase_approx(1.7e10, bare, 0.5 + off)
        b = s_phase(1.7e10, bare, 0.5 + off)
        assert a == pytest.approx(b, rel=1e-3)


def test_mutual_inductance_scaling():
    phis = np.linspace(0, 2, 101)
    a = s_phase(3e10, ENV, phis)
    b = s_phase(3e10, ENV.with_(M=2 * ENV.M), phis)
    assert np.allclose(b, 4 * a, rtol=1e-12)


def test_continuous_across_pole():
    prev = math.inf
    for h in (1e-4, 1e-6, 1e-8, 1e-10):
        a, b, c = s_phase(3e10, ENV, [0.5 - h, 0.5, 0.5 + h])
        jump = max(abs(a - b), abs(c - b)) / b
        assert jump < prev
        prev = jump
    assert prev < 1e-5
