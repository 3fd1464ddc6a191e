"""Dense density-matrix integration of the full master equation for small arrays.

Used as an independent check on the single-excitation model: the site
populations from ``rho`` are compared against ``|p_mu|^2``.

Basis: product states over sites, site 0 is the most significant bit, and the
single-site basis is ``(|g>, |e>)`` so ``sigma = [[0, 1], [0, 0]]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .config import SystemConfig, atom_positions, drive_vector
from .dynamics import eigen_amplitudes
from .errors import PositivityLost, StepTooLarge, TooLarge
from .matrix import build_matrix
from .spectral import decompose

MAX_ATOMS = 6
MAX_DT_GAMMA = 0.05
POSITIVITY_TOL = -1e-6
TRACE_TOL = 1e-9
HERMITIAN_TOL = 1e-10

_SIGMA = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)


def lowering(site: int, n: int) -> np.ndarray:
    ops = [np.eye(2, dtype=complex)] * n
    ops[site] = _SIGMA
    out = ops[0]
    for op in ops[1:]:
        out = np.kron(out, op)
    return out


def ground_state(n: int) -> np.ndarray:
    rho = np.zeros((2**n, 2**n), dtype=complex)
    rho[0, 0] = 1.0
    return rho


@dataclass
class DensityMatrix:
    rho: np.ndarray
    n: int

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    def trace_error(self) -> float:
        return abs(np.trace(self.rho) - 1.0)

    def hermitian_error(self) -> float:
        return float(np.abs(self.rho - self.rho.conj().T).max())

    def min_eigenvalue(self) -> float:
        h = 0.5 * (self.rho + self.rho.conj().T)
        return float(np.linalg.eigvalsh(h)[0])

    def check(self, positivity_tol: float = POSITIVITY_TOL) -> None:
        if self.trace_error() > TRACE_TOL:
            raise PositivityLost(f"trace drifted by {self.trace_error():.3g}")
        if self.hermitian_error() > HERMITIAN_TOL:
            raise PositivityLost(f"rho lost Hermiticity ({self.hermitian_error():.3g})")
        lo = self.min_eigenvalue()
        if lo < positivity_tol:
            raise PositivityLost(f"rho has eigenvalue {lo:.3g}; reduce dt")

    def populations(self) -> np.ndarray:
        """Excited-state population of every site."""
        n = self.n
        diag = np.real(np.diag(self.rho))
        idx = np.arange(self.dim)
        return np.array([diag[(idx >> (n - 1 - s)) & 1 == 1].sum() for s in range(n)])


@dataclass(frozen=True)
class Liouvillian:
    hamiltonian: np.ndarray          # H_S + H_L + H_R
    jumps: tuple[np.ndarray, ...]
    rates: tuple[float, ...]
    n: int

    @property
    def effective_hamiltonian(self) -> np.ndarray:
        h = self.hamiltonian.astype(complex)
        for j, g in zip(self.jumps, self.rates):
            h = h - 0.5j * g * (j.conj().T @ j)
        return h

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        h = self.hamiltonian
        out = -1j * (h @ rho - rho @ h)
        for j, g in zip(self.jumps, self.rates):
            jd = j.conj().T
            jdj = jd @ j
            out += g * (j @ rho @ jd - 0.5 * (jdj @ rho + rho @ jdj))
        return out


def build_liouvillian(cfg: SystemConfig) -> Liouvillian:
    n = cfg.n
    if n > MAX_ATOMS:
        raise TooLarge(f"the density-matrix oracle is limited to {MAX_ATOMS} atoms, got {n}")
    x = atom_positions(cfg)
    sig = [lowering(s, n) for s in range(n)]
    sigd = [s.conj().T for s in sig]
    dim = 2**n
    drive = cfg.omega_rabi * cfg.mask().astype(float)

    h = np.zeros((dim, dim), dtype=complex)
    for mu in range(n):
        h += -cfg.delta * sigd[mu] @ sig[mu]
        if drive[mu]:
            h += drive[mu] * (sig[mu] + sigd[mu])
    gl, gr = cfg.gamma_left, cfg.gamma_right
    for mu in range(n):
        for nu in range(n):
            if mu == nu:
                continue
            ph = np.exp(1j * abs(x[mu] - x[nu]))
            term = ph * sigd[mu] @ sig[nu] - ph.conj() * sigd[nu] @ sig[mu]
            h += -0.5j * (gl if mu < nu else gr) * term

    jumps = [sum(np.exp(1j * x[v]) * sig[v] for v in range(n)),
             sum(np.exp(-1j * x[v]) * sig[v] for v in range(n))]
    rates = [gl, gr]
    if cfg.gamma_ng > 0:
        jumps += sig
        rates += [cfg.gamma_ng] * n
    return Liouvillian(h, tuple(jumps), tuple(rates), n)


def _rk4(f: Callable[[np.ndarray], np.ndarray], y: np.ndarray, dt: float) -> np.ndarray:
    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    return y + dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6


@dataclass(frozen=True)
class PopulationTrajectory:
    times: np.ndarray
    populations: np.ndarray  # (len(times), N)


def evolve_rho(cfg: SystemConfig, t_final: float, dt: float = 0.01, stride: int = 10,
               *, check_every: int = 1) -> PopulationTrajectory:
    """RK4 from the ground state; populations every ``stride`` steps and at ``t_final``."""
    if dt * cfg.gamma > MAX_DT_GAMMA * (1 + 1e-12):
        raise StepTooLarge(f"dt = {dt:g} exceeds {MAX_DT_GAMMA}/gamma")
    lv = build_liouvillian(cfg)
    nsteps = int(round(t_final / dt))
    if nsteps < 0 or abs(nsteps * dt - t_final) > 1e-9 * max(1.0, t_final):
        raise ValueError(f"t_final = {t_final:g} is not a non-negative multiple of dt = {dt:g}")
    rho = DensityMatrix(ground_state(cfg.n), cfg.n)
    times, pops = [0.0], [rho.populations()]
    for step in range(1, nsteps + 1):
        rho.rho = _rk4(lv, rho.rho, dt)
        if step % stride == 0 or step == nsteps:
            if (step // stride) % check_every == 0 or step == nsteps:
                rho.check()
            times.append(step * dt)
            pops.append(rho.populations())
    return PopulationTrajectory(np.array(times), np.array(pops))


def max_relative_deviation(reference: np.ndarray, other: np.ndarray) -> float:
    """Largest site deviation at any time, relative to the most populated site at that time.

    Rows are times and columns are sites; rows where the reference vanishes are skipped.
    Nearly dark sites carry an absolute error set by the next order in the drive,
    so a per-site ratio would be dominated by them.
    """
    reference = np.atleast_2d(np.asarray(reference, dtype=float))
    other = np.atleast_2d(np.asarray(other, dtype=float))
    scale = reference.max(axis=1)
    sel = scale > 0
    if not sel.any():
        return 0.0
    return float((np.abs(other[sel] - reference[sel]).max(axis=1) / scale[sel]).max())


def max_site_deviation(reference: np.ndarray, other: np.ndarray, floor: float = 1e-3) -> float:
    """Per-site relative deviation over sites holding at least ``floor`` of the maximum."""
    reference = np.atleast_2d(np.asarray(reference, dtype=float))
    other = np.atleast_2d(np.asarray(other, dtype=float))
    sel = reference > floor * reference.max(axis=1, keepdims=True)
    if not sel.any():
        return 0.0
    return float((np.abs(other[sel] - reference[sel]) / reference[sel]).max())


def effective_populations(cfg: SystemConfig, times: np.ndarray) -> np.ndarray:
    """``|p_mu(t)|^2`` from the single-excitation model, via the eigenmode expansion."""
    mat = build_matrix(cfg)
    spec = decompose(mat)
    return np.abs(eigen_amplitudes(spec, drive_vector(cfg), times)) ** 2


@dataclass(frozen=True)
class OracleComparison:
    times: np.ndarray
    oracle: np.ndarray
    effective: np.ndarray
    max_deviation: float
    max_site_deviation: float


def compare_with_effective(cfg: SystemConfig, t_final: float = 20.0, dt: float = 0.01,
                           stride: int = 10) -> OracleComparison:
    traj = evolve_rho(cfg, t_final, dt, stride)
    eff = effective_populations(cfg, traj.times)
    return OracleComparison(traj.times, traj.populations, eff,
                            max_relative_deviation(eff, traj.populations),
                            max_site_deviation(eff, traj.populations))
