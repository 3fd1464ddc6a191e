import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from wqed_transport.config import (DisorderSpec, SystemConfig, WeakDriveWarning, atom_positions,
                                   config_from_dict, drive_vector, load_config)
from wqed_transport.errors import ConfigError, NoDrive

PI = math.pi


def test_positions_two_groups():
    cfg = SystemConfig(n_left=2, n_right=2, xi_left=PI, xi_d=2 * PI, xi_right=PI)
    np.testing.assert_allclose(atom_positions(cfg), [0, PI, 3 * PI, 4 * PI])


def test_positions_single_atom():
    cfg = SystemConfig(n_left=1, xi_left=1.3, xi_d=0.7, xi_right=2.2)
    np.testing.assert_array_equal(atom_positions(cfg), [0.0])


def test_positions_fig3a_last_site(single_mode):
    assert atom_positions(single_mode)[-1] == pytest.approx(28.122 * PI, rel=1e-12)


@given(st.integers(1, 8), st.integers(0, 8),
       st.floats(0, 10), st.floats(0, 10), st.floats(0, 10))
def test_positions_monotone(nl, nr, xl, xd, xr):
    x = atom_positions(SystemConfig(n_left=nl, n_right=nr, xi_left=xl, xi_d=xd, xi_right=xr))
    assert len(x) == nl + nr
    assert np.all(np.diff(x) >= 0)


@given(st.floats(-1, 1), st.floats(0.01, 10))
def test_rates_reconstruct(d, gamma):
    cfg = SystemConfig(n_left=1, directionality=d, gamma=gamma, omega_rabi=1e-3 * gamma)
    assert cfg.gamma_left + cfg.gamma_right == pytest.approx(gamma, rel=1e-15)
    assert (cfg.gamma_right - cfg.gamma_left) / gamma == pytest.approx(d, abs=1e-15)
    assert cfg.gamma_left >= 0 and cfg.gamma_right >= 0


def test_drive_vector_default_mask():
    cfg = SystemConfig(n_left=2, n_right=3, omega_rabi=1e-3)
    np.testing.assert_array_equal(drive_vector(cfg), [1e-3, 1e-3, 0, 0, 0])


def test_drive_vector_single():
    np.testing.assert_array_equal(drive_vector(SystemConfig(n_left=1)), [1e-3])


def test_drive_vector_empty_mask():
    cfg = SystemConfig(n_left=2, n_right=1, drive_mask=(False, False, False))
    with pytest.raises(NoDrive):
        drive_vector(cfg)


@pytest.mark.parametrize("kw", [
    dict(n_left=0), dict(n_left=2, n_right=-1), dict(n_left=1, xi_left=-0.1),
    dict(n_left=1, directionality=1.5), dict(n_left=1, gamma=0), dict(n_left=1, beta=0),
    dict(n_left=1, beta=1.2), dict(n_left=1, omega_rabi=0), dict(n_left=1, xi_d=float("nan")),
    dict(n_left=2, drive_mask=(True,)),
])
def test_invalid_configs(kw):
    with pytest.raises(ConfigError):
        SystemConfig(**kw)


def test_weak_drive_warns_and_override_silences():
    with pytest.warns(WeakDriveWarning):
        SystemConfig(n_left=1, omega_rabi=0.1)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        SystemConfig(n_left=1, omega_rabi=0.1, override_weak_drive=True)
        SystemConfig(n_left=1, omega_rabi=1e-2)


def test_disorder_spec_validation():
    DisorderSpec(w_phase=0.1, delta_bar=0.05, trials=3, master_seed=2**64 - 1)
    for kw in (dict(trials=0), dict(w_phase=-1.0), dict(delta_bar=float("inf")), dict(master_seed=-1)):
        with pytest.raises(ConfigError):
            DisorderSpec(**kw)


def test_json_roundtrip(tmp_path, single_mode):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(single_mode.to_dict()))
    back = load_config(path)
    assert back == single_mode
    assert back.config_hash() == single_mode.config_hash()


def test_json_units_of_pi():
    cfg = config_from_dict({"n_left": 2, "n_right": 1, "xi_left_pi": 1.5, "drive_mask": [True, False, True]})
    assert cfg.xi_left == pytest.approx(1.5 * PI)
    assert cfg.mask().tolist() == [True, False, True]


@pytest.mark.parametrize("doc, needle", [
    ({"n_right": 2}, "n_left"),
    ({"n_left": 2, "xi_left": 1.0}, "unknown"),
    ({"n_left": "2"}, "n_left"),
    ({"n_left": 2, "gamma": True}, "gamma"),
    ({"n_left": 1, "drive_mask": [1]}, "drive_mask"),
])
def test_json_diagnostics(doc, needle):
    with pytest.raises(ConfigError, match=needle):
        config_from_dict(doc)


def test_json_syntax_error_reports_line(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "n_left": 2,\n  oops\n}')
    with pytest.raises(ConfigError, match="line 3"):
        load_config(path)


def test_hash_ignores_override_flag():
    a = SystemConfig(n_left=2, omega_rabi=0.05, override_weak_drive=True)
    with pytest.warns(WeakDriveWarning):
        b = SystemConfig(n_left=2, omega_rabi=0.05)
    assert a == b
