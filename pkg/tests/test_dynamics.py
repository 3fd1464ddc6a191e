import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from wqed_transport.config import SystemConfig
from wqed_transport.dynamics import (Method, eigen_amplitudes, evolve_eigen, evolve_ode, max_stable_dt, rk4_propagator,
                                     rk4_step, steady_coefficients, steady_state, steady_state_eigen)
from wqed_transport.errors import DivergentMode, EigenUnavailable, SingularMatrix, StepTooLarge
from wqed_transport.matrix import build_matrix
from wqed_transport.spectral import decompose

PI = math.pi
OMEGA = 1e-3

generic = st.builds(
    SystemConfig,
    n_left=st.integers(1, 6), n_right=st.integers(1, 6),
    xi_left=st.floats(1.05 * PI, 1.95 * PI), xi_d=st.floats(1.05 * PI, 1.95 * PI),
    xi_right=st.floats(1.05 * PI, 1.95 * PI), directionality=st.floats(-0.9, 0.9),
)


def single_atom_closed_form(t):
    return (-2j * OMEGA) * (1 - np.exp(-0.5 * t))


def test_single_atom_eigen():
    cfg = SystemConfig(n_left=1)
    mat = build_matrix(cfg)
    s = decompose(mat)
    for t in (0.0, 0.3, 5.0, 40.0):
        assert evolve_eigen(s, mat.drive, t).amplitudes[0] == pytest.approx(single_atom_closed_form(t), abs=1e-15)


def test_single_atom_ode():
    mat = build_matrix(SystemConfig(n_left=1))
    traj = evolve_ode(mat, 5.0, dt=1e-3, stride=1000)
    assert traj.times[-1] == pytest.approx(5.0)
    assert abs(traj.amplitudes[-1, 0] - single_atom_closed_form(5.0)) < 1e-9


def test_single_atom_steady():
    st_ = steady_state(build_matrix(SystemConfig(n_left=1)))
    assert st_.amplitudes[0] == pytest.approx(-2j * OMEGA)
    assert st_.total_population == pytest.approx(4 * OMEGA ** 2)
    assert st_.method is Method.LINEAR
    assert st_.weak


@given(generic)
def test_initial_condition(cfg):
    mat = build_matrix(cfg)
    assert np.all(evolve_eigen(decompose(mat), mat.drive, 0.0).amplitudes == 0)
    assert np.all(evolve_ode(mat, 0.0).amplitudes == 0)


@given(generic)
def test_method_equivalence(cfg):
    mat = build_matrix(cfg)
    s = decompose(mat)
    traj = evolve_ode(mat, 20.0, dt=1e-2, stride=100)
    for t in (1.0, 5.0, 20.0):
        i = int(np.argmin(np.abs(traj.times - t)))
        assert np.abs(traj.amplitudes[i] - evolve_eigen(s, mat.drive, t).amplitudes).max() < 1e-8
    lin = steady_state(mat).amplitudes
    eig = steady_state_eigen(s, mat.drive).amplitudes
    assert np.linalg.norm(lin - eig) <= 1e-10 * np.linalg.norm(lin)


def test_infinite_time_is_analytic(single_mode):
    mat = build_matrix(single_mode)
    s = decompose(mat)
    st_ = evolve_eigen(s, mat.drive, math.inf)
    assert math.isinf(st_.t)
    np.testing.assert_allclose(st_.amplitudes, steady_state(mat).amplitudes, rtol=1e-10)


@given(generic, st.floats(1e-4, 1.0))
def test_propagator_matches_literal_rk4(cfg, dt):
    mat = build_matrix(cfg)
    prop, src = rk4_propagator(mat.m, mat.drive, dt)
    rng = np.random.default_rng(0)
    p = (rng.normal(size=cfg.n) + 1j * rng.normal(size=cfg.n)) * OMEGA
    lit = rk4_step(mat.m, mat.drive, p, dt)
    assert np.abs(prop @ p + src - lit).max() <= 1e-14 * max(1.0, np.abs(lit).max() / OMEGA) * OMEGA


@given(generic)
def test_linearity_in_drive(cfg):
    a = evolve_ode(build_matrix(cfg), 2.0, stride=50).amplitudes
    b = evolve_ode(build_matrix(cfg.replace(omega_rabi=2 * OMEGA)), 2.0, stride=50).amplitudes
    np.testing.assert_array_equal(b, 2 * a)


@given(generic, st.sampled_from(["xi_right", "xi_d"]))
def test_gauge_invariance(cfg, name):
    shifted = cfg.replace(**{name: getattr(cfg, name) + PI})
    times = [0.5, 3.0, 12.0]
    a = np.abs(eigen_amplitudes(decompose(build_matrix(cfg)), build_matrix(cfg).drive, times)) ** 2
    m2 = build_matrix(shifted)
    b = np.abs(eigen_amplitudes(decompose(m2), m2.drive, times)) ** 2
    assert np.abs(a - b).max() <= 1e-10 * a.max()


@given(generic)
def test_mirror_property(cfg):
    n = cfg.n
    mirrored = SystemConfig(n_left=cfg.n_right, n_right=cfg.n_left, xi_left=cfg.xi_right, xi_d=cfg.xi_d,
                            xi_right=cfg.xi_left, directionality=-cfg.directionality,
                            drive_mask=tuple(cfg.mask()[::-1]))
    ma, mb = build_matrix(cfg), build_matrix(mirrored)
    pa = steady_state(ma).populations
    pb = steady_state(mb).populations
    assert np.abs(pa - pb[::-1]).max() <= 1e-12 * pa.max()
    ta = evolve_ode(ma, 3.0, stride=100).populations
    tb = evolve_ode(mb, 3.0, stride=100).populations
    assert np.abs(ta - tb[:, ::-1]).max() <= 1e-12 * ta.max()
    assert n == mirrored.n


def test_cascaded_pair_needs_time_domain():
    mat = build_matrix(SystemConfig(n_left=1, n_right=1, xi_d=1.3, directionality=1.0))
    s = decompose(mat, allow_defective=True)
    assert s.defective
    with pytest.raises(EigenUnavailable):
        steady_coefficients(s, mat.drive)
    traj = evolve_ode(mat, 30.0, stride=3000)
    np.testing.assert_allclose(traj.amplitudes[-1], steady_state(mat).amplitudes, rtol=1e-5)


def test_bragg_singular():
    cfg = SystemConfig(n_left=3, n_right=3)
    with pytest.raises(SingularMatrix) as exc:
        steady_state(build_matrix(cfg))
    assert exc.value.spacings == pytest.approx((PI, PI, PI))
    assert "1 pi, 1 pi, 1 pi" in str(exc.value)


def test_bragg_divergent_mode():
    mat = build_matrix(SystemConfig(n_left=2, n_right=2))
    with pytest.raises(DivergentMode):
        steady_coefficients(decompose(mat), mat.drive)


def test_step_guard(single_mode):
    mat = build_matrix(single_mode)
    limit = max_stable_dt(mat)
    with pytest.raises(StepTooLarge):
        evolve_ode(mat, 10 * limit * 1.5, dt=limit * 1.5)
    evolve_ode(mat, 10 * limit, dt=limit)


def test_t_final_must_be_multiple(single_mode):
    with pytest.raises(ValueError):
        evolve_ode(build_matrix(single_mode), 1.005, dt=0.01)


def test_trajectory_sampling(single_mode):
    traj = evolve_ode(build_matrix(single_mode), 1.05, dt=0.01, stride=20)
    np.testing.assert_allclose(traj.times, [0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.05])
    assert traj[2].t == pytest.approx(0.4)
    assert traj.populations.shape == (7, 20)
    assert len(traj) == 7


def test_fig3a_right_share(single_mode):
    pops = steady_state(build_matrix(single_mode)).populations
    assert pops[10:].sum() / pops.sum() > 0.95
