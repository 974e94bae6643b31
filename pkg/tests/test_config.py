import math

import pytest

from sluicepump.config import RunConfig, SweepSpec, load_config
from sluicepump.constants import K_B
from sluicepump.errors import ConfigurationError


def test_defaults():
    cfg = load_config()
    assert cfg.sluice.E_C == pytest.approx(K_B)
    assert cfg.sluice.J_max == pytest.approx(0.1 * K_B)
    assert cfg.integrator.steps_per_cycle == 65536
    assert 255 <= cfg.sweep.grid().size <= 265


def test_grid():
    g = SweepSpec().grid()
    assert g[0] == 0 and g[-1] == 2 and (g[1:] > g[:-1]).all()
    assert 0.5 in g and 1.5 in g
    assert min(abs(g[g != 0.5] - 0.5)) == pytest.approx(1e-4)
    assert list(SweepSpec(phi_list=(0.3, 0.1)).grid()) == [0.1, 0.3]
    with pytest.raises(ConfigurationError):
        SweepSpec(phi_list=(2.5,)).grid()


def test_ini_roundtrip(tmp_path):
    f = tmp_path / "c.ini"
    f.write_text("[sluice]\nf_pump = 1e8\n[integrator]\nsecular = yes\n[sweep]\nphi_list = 0.1, 0.2\n"
                 "[run]\nseed = 5\n")
    cfg = load_config(str(f))
    assert cfg.sluice.f_pump == 1e8 and cfg.integrator.secular is True
    assert list(cfg.sweep.grid()) == [0.1, 0.2]
    assert cfg.seed == 5 and cfg.source == str(f)
    assert load_config(str(f), seed=9, frame="superadiabatic").integrator.frame == "superadiabatic"


@pytest.mark.parametrize("text", ["[bogus]\na = 1\n", "[sluice]\nnope = 1\n", "[sluice]\nf_pump = fast\n",
                                  "[sluice]\nng_min = 0.6\n", "[sweep]\nphi_step = 0\n",
                                  "[integrator]\nsecular = maybe\n", "[run]\nworkers = 0\n",
                                  "[run]\nseed = -1\n", "[trace]\nsquid = middle\n",
                                  "[circuit]\nR = -3\n"])
def test_invalid_ini(tmp_path, text):
    f = tmp_path / "c.ini"
    f.write_text(text)
    with pytest.raises(ConfigurationError):
        load_config(str(f))


def test_missing_file():
    with pytest.raises(ConfigurationError):
        load_config("/nonexistent/x.ini")


def test_fingerprint():
    a = RunConfig()
    assert a.fingerprint() == RunConfig(workers=4).fingerprint()
    assert a.fingerprint() != RunConfig(seed=1).fingerprint()


def test_shipped_config_matches_defaults():
    import pathlib
    path = pathlib.Path(__file__).resolve().parents[1] / "configs" / "default.ini"
    assert load_config(str(path)).fingerprint() == RunConfig().fingerprint()
