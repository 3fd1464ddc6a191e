import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wqed_transport.config import SystemConfig
from wqed_transport.errors import PositivityLost, StepTooLarge, TooLarge
from wqed_transport.matrix import build_matrix
from wqed_transport.oracle import (DensityMatrix, _rk4, build_liouvillian, compare_with_effective, evolve_rho,
                                   ground_state, lowering, max_relative_deviation)

PI = math.pi

small = st.builds(
    SystemConfig,
    n_left=st.integers(1, 2), n_right=st.integers(0, 2),
    xi_left=st.floats(PI, 2 * PI), xi_d=st.floats(PI, 2 * PI), xi_right=st.floats(PI, 2 * PI),
    directionality=st.floats(-1, 1), beta=st.floats(0.8, 1.0), delta=st.floats(-0.1, 0.1),
)


def single_excitation_block(op, n):
    idx = [1 << (n - 1 - s) for s in range(n)]
    return op[np.ix_(idx, idx)]


def free_decay(cfg, rho0, t_final, dt=0.01):
    lv = build_liouvillian(cfg)
    rho = rho0.copy()
    for _ in range(int(round(t_final / dt))):
        rho = _rk4(lv, rho, dt)
    return DensityMatrix(rho, cfg.n)


@pytest.mark.parametrize("beta", [1.0, 0.9])
def test_single_atom_decay(beta):
    cfg = SystemConfig(n_left=1, beta=beta, drive_mask=(False,))
    rho0 = np.diag([0.0, 1.0]).astype(complex)
    rho = free_decay(cfg, rho0, 2.0)
    assert rho.populations()[0] == pytest.approx(math.exp(-2.0 / beta), rel=1e-8)


@given(small, st.integers(0, 2**32 - 1))
def test_trace_preservation(cfg, seed):
    rng = np.random.default_rng(seed)
    d = 2 ** cfg.n
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = a + a.conj().T
    assert abs(np.trace(build_liouvillian(cfg)(rho))) < 1e-12 * np.abs(rho).max() * d


@given(small)
def test_effective_hamiltonian_reproduces_matrix(cfg):
    lv = build_liouvillian(cfg)
    block = single_excitation_block(lv.effective_hamiltonian, cfg.n)
    np.testing.assert_allclose(-1j * block, build_matrix(cfg).m, atol=1e-14)


def test_colocated_pair_superradiance():
    # M = [[-1/2, -1/2], [-1/2, -1/2]]: the symmetric state has eigenvalue -1 (amplitude rate gamma)
    cfg = SystemConfig(n_left=1, n_right=1, xi_d=0.0, drive_mask=(False, False))
    psi = np.zeros(4, complex)
    psi[0b01] = psi[0b10] = 1 / math.sqrt(2)
    rho = free_decay(cfg, np.outer(psi, psi.conj()), 1.5)
    assert rho.populations().sum() == pytest.approx(math.exp(-2 * 1.5), rel=1e-8)


def test_no_drive_stays_in_ground_state():
    cfg = SystemConfig(n_left=2, n_right=1, xi_d=1.3, directionality=0.4, drive_mask=(False,) * 3)
    traj = evolve_rho(cfg, 2.0, 0.01)
    assert np.all(traj.populations == 0)


def test_nonguided_loss_speeds_decay():
    psi = np.zeros(4, complex)
    psi[0b10] = 1.0
    rho0 = np.outer(psi, psi.conj())
    base = SystemConfig(n_left=1, n_right=1, xi_d=1.3, directionality=0.5, drive_mask=(False, False))
    ideal = free_decay(base, rho0, 3.0).populations().sum()
    lossy = free_decay(base.replace(beta=0.99), rho0, 3.0).populations().sum()
    assert lossy < ideal


def test_driven_populations_lower_with_loss():
    base = SystemConfig(n_left=1, n_right=1, xi_d=1.3, directionality=0.5)
    a = evolve_rho(base, 10.0, 0.01).populations[-1].sum()
    b = evolve_rho(base.replace(beta=0.99), 10.0, 0.01).populations[-1].sum()
    assert b < a


def test_effective_model_agreement_at_optimum_geometry():
    cfg = SystemConfig(n_left=1, n_right=2, xi_left=1.8 * PI, xi_d=1.5 * PI, xi_right=1.158 * PI,
                       directionality=0.5)
    cmp = compare_with_effective(cfg, t_final=20.0)
    assert cmp.max_deviation <= 1e-3
    i = int(np.argmin(np.abs(cmp.times - 10.0)))
    assert max_relative_deviation(cmp.effective[i], cmp.oracle[i]) <= 1e-3


@settings(max_examples=5)
@given(small.filter(lambda c: c.n <= 3))
def test_trajectory_stays_physical(cfg):
    traj = evolve_rho(cfg, 3.0, 0.02, stride=5)  # check() runs at every sample
    assert np.all(traj.populations >= -1e-12)


def test_guards():
    with pytest.raises(TooLarge):
        build_liouvillian(SystemConfig(n_left=4, n_right=3))
    with pytest.raises(StepTooLarge):
        evolve_rho(SystemConfig(n_left=1), 1.2, 0.06)


def test_positivity_check():
    rho = DensityMatrix(np.diag([1.1, -0.1]).astype(complex), 1)
    with pytest.raises(PositivityLost):
        rho.check()
    DensityMatrix(ground_state(2), 2).check()


def test_lowering_operator():
    s = lowering(1, 2)
    # |ge> (index 0b01) is lowered to |gg>
    assert s[0b00, 0b01] == 1 and np.count_nonzero(s) == 2


def test_relative_deviation_measure():
    ref = np.array([[1.0, 1e-6], [2.0, 1.0]])
    other = ref + np.array([[1e-4, 1e-7], [0.0, 0.0]])
    assert max_relative_deviation(ref, other) == pytest.approx(1e-4)
