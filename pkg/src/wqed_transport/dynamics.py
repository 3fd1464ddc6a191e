"""Single-excitation amplitudes: eigenmode expansion, RK4 integration, linear solve.

All three routes solve ``dp/dt = M p - i Omega_tilde`` with ``p(0) = 0``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from ._pykernels import one_minus_exp
from .errors import DivergentMode, EigenUnavailable, SingularMatrix, StepTooLarge
from .matrix import InteractionMatrix
from .spectral import SpectralData

SINGULAR_COND = 1e12
DIVERGENT_ENERGY = 1e-12
DEFAULT_DT = 1e-2
WEAK_POPULATION_LIMIT = 1e-2


class Method(str, enum.Enum):
    EIGEN = "eigen_expansion"
    ODE = "time_integration"
    LINEAR = "linear_solve"


@dataclass(frozen=True)
class ExcitationState:
    t: float
    amplitudes: np.ndarray
    method: Method

    @property
    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    @property
    def total_population(self) -> float:
        return float(self.populations.sum())

    @property
    def weak(self) -> bool:
        return self.total_population < WEAK_POPULATION_LIMIT


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    amplitudes: np.ndarray  # (len(times), N)
    method: Method = Method.ODE

    def __len__(self):
        return len(self.times)

    def __getitem__(self, i) -> ExcitationState:
        return ExcitationState(float(self.times[i]), self.amplitudes[i], self.method)

    @property
    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


def steady_coefficients(spec: SpectralData, drive: np.ndarray) -> np.ndarray:
    """Mode coefficients of the steady state: ``-(<phi_n^L|drive>) / E_n``."""
    if spec.defective:
        raise EigenUnavailable("spectrum is defective; eigenmode expansion unavailable",
                               condition_number=spec.condition_number)
    return coefficients_from_overlaps(spec, spec.left_vecs @ drive, float(np.abs(drive).max()))


def coefficients_from_overlaps(spec: SpectralData, overlaps: np.ndarray, drive_scale: float = 1.0) -> np.ndarray:
    if spec.defective:
        raise EigenUnavailable("spectrum is defective; eigenmode expansion unavailable",
                               condition_number=spec.condition_number)
    e = spec.energies
    bad = (np.abs(e) < spec.gamma * DIVERGENT_ENERGY) & (np.abs(overlaps) > DIVERGENT_ENERGY * drive_scale)
    if bad.any():
        raise DivergentMode(f"driven decoherence-free mode(s) {np.flatnonzero(bad).tolist()} "
                            "make the amplitude diverge (Bragg spacing)")
    return -overlaps / e


def eigen_amplitudes(spec: SpectralData, drive: np.ndarray, times) -> np.ndarray:
    """Amplitudes at each of ``times``; shape (len(times), N)."""
    coef = steady_coefficients(spec, drive)
    t = np.atleast_1d(np.asarray(times, dtype=float))
    return (coef[None, :] * one_minus_exp(spec.lambdas, t)) @ spec.right_vecs.T


def evolve_eigen(spec: SpectralData, drive: np.ndarray, t: float) -> ExcitationState:
    if np.isinf(t):
        return steady_state_eigen(spec, drive)
    return ExcitationState(float(t), eigen_amplitudes(spec, drive, [t])[0], Method.EIGEN)


def steady_state_eigen(spec: SpectralData, drive: np.ndarray) -> ExcitationState:
    # t -> infinity taken analytically: 1 - exp(-i E t) -> 1
    p = spec.right_vecs @ steady_coefficients(spec, drive)
    return ExcitationState(float("inf"), p, Method.EIGEN)


def max_stable_dt(mat: InteractionMatrix, lambdas: np.ndarray | None = None) -> float:
    cfg = mat.config
    if lambdas is None:
        lambdas = np.linalg.eigvals(mat.m)
    fastest = max(cfg.gamma / cfg.beta, float(np.abs(lambdas.imag).max()))
    return 0.1 / fastest


def rk4_step(m: np.ndarray, drive: np.ndarray, p: np.ndarray, dt: float) -> np.ndarray:
    """One classical RK4 stage sequence, kept literal as a reference."""
    def f(y):
        return m @ y - 1j * drive
    k1 = f(p)
    k2 = f(p + 0.5 * dt * k1)
    k3 = f(p + 0.5 * dt * k2)
    k4 = f(p + dt * k3)
    return p + dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6


def rk4_propagator(m: np.ndarray, drive: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Affine one-step map ``p -> A p + c`` equal to a classical RK4 step.

    For a linear right-hand side the four stages collapse into the
    degree-4 Taylor polynomial of ``exp(M dt)``.
    """
    n = m.shape[0]
    a1 = m * dt
    a2 = a1 @ a1
    a3 = a2 @ a1
    a4 = a3 @ a1
    eye = np.eye(n)
    prop = eye + a1 + a2 / 2 + a3 / 6 + a4 / 24
    phi = eye + a1 / 2 + a2 / 6 + a3 / 24
    src = dt * (phi @ (-1j * drive))
    return prop, src


def evolve_ode(mat: InteractionMatrix, t_final: float, dt: float = DEFAULT_DT, stride: int = 1,
               *, check_step: bool = True) -> Trajectory:
    """Fixed-step RK4 from ``p(0) = 0``; samples every ``stride`` steps plus the final time."""
    if check_step:
        limit = max_stable_dt(mat)
        if dt > limit * (1 + 1e-12):
            raise StepTooLarge(f"dt = {dt:g} exceeds 0.1 / fastest rate = {limit:g}")
    nsteps = int(round(t_final / dt))
    if nsteps < 0 or abs(nsteps * dt - t_final) > 1e-9 * max(1.0, t_final):
        raise ValueError(f"t_final = {t_final:g} is not a non-negative multiple of dt = {dt:g}")
    prop, src = rk4_propagator(mat.m, mat.drive, dt)
    n = mat.n
    idx = list(range(0, nsteps + 1, stride))
    if idx[-1] != nsteps:
        idx.append(nsteps)
    out = np.empty((len(idx), n), dtype=complex)
    p = np.zeros(n, dtype=complex)
    j = 0
    for step in range(nsteps + 1):
        if step == idx[j]:
            out[j] = p
            j += 1
            if j == len(idx):
                break
        p = prop @ p + src
    return Trajectory(times=np.array(idx) * dt, amplitudes=out, method=Method.ODE)


def steady_state(mat: InteractionMatrix) -> ExcitationState:
    """Direct solve of ``M p = i Omega_tilde``."""
    cond = np.linalg.cond(mat.m)
    if not np.isfinite(cond) or cond > SINGULAR_COND:
        cfg = mat.config
        spacings = cfg.spacings
        raise SingularMatrix(
            "interaction matrix is singular (cond = %.3g): decoherence-free state at "
            "xi_L, xi_D, xi_R = %.6g pi, %.6g pi, %.6g pi (Bragg spacing)"
            % (cond, *(s / np.pi for s in spacings)),
            spacings=spacings)
    p = np.linalg.solve(mat.m, 1j * mat.drive)
    return ExcitationState(float("inf"), p, Method.LINEAR)
