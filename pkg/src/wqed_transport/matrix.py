"""Effective non-Hermitian interaction matrix of the single-excitation sector."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import DisorderSpec, SystemConfig, atom_positions, drive_vector


@dataclass(frozen=True)
class DisorderRealization:
    phases: np.ndarray
    detunings: np.ndarray
    trial_index: int
    master_seed: int


@dataclass(frozen=True)
class InteractionMatrix:
    m: np.ndarray
    drive: np.ndarray
    positions: np.ndarray
    config: SystemConfig
    config_hash: str
    disorder: DisorderRealization | None = None

    @property
    def n(self) -> int:
        return self.m.shape[0]

    @property
    def n_left(self) -> int:
        return self.config.n_left


def coupling_matrix(positions: np.ndarray, gamma_left: float, gamma_right: float,
                    diagonal) -> np.ndarray:
    """Upper triangle carries the left-propagating rate, lower triangle the right one.

    The triangle assignment follows index order, not the (possibly perturbed)
    spatial order of ``positions``.
    """
    n = len(positions)
    phase = np.exp(1j * np.abs(positions[:, None] - positions[None, :]))
    idx = np.arange(n)
    rates = np.where(idx[:, None] < idx[None, :], gamma_left, gamma_right)
    m = -rates * phase
    m[idx, idx] = diagonal
    return m


def build_matrix(cfg: SystemConfig) -> InteractionMatrix:
    x = atom_positions(cfg)
    diag = 1j * cfg.delta - cfg.gamma / (2.0 * cfg.beta)
    m = coupling_matrix(x, cfg.gamma_left, cfg.gamma_right, diag)
    return InteractionMatrix(m=m, drive=drive_vector(cfg), positions=x, config=cfg,
                             config_hash=cfg.config_hash())


def trial_rng(master_seed: int, trial_index: int) -> np.random.Generator:
    """Independent stream per trial; identical for any scheduling of trials."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([master_seed, trial_index])))


def draw_disorder(cfg: SystemConfig, spec: DisorderSpec, trial_index: int) -> DisorderRealization:
    if not 0 <= trial_index < spec.trials:
        raise IndexError(f"trial_index {trial_index} outside [0, {spec.trials})")
    rng = trial_rng(spec.master_seed, trial_index)
    # phases first, then detunings: the draw order is part of the reproducibility contract
    theta = rng.uniform(-spec.w_phase, spec.w_phase, cfg.n) if spec.w_phase > 0 else np.zeros(cfg.n)
    dets = rng.uniform(-spec.delta_bar, spec.delta_bar, cfg.n) if spec.delta_bar > 0 else np.zeros(cfg.n)
    return DisorderRealization(phases=theta, detunings=dets, trial_index=trial_index,
                              master_seed=spec.master_seed)


def build_disordered_matrix(cfg: SystemConfig, spec: DisorderSpec, trial_index: int) -> InteractionMatrix:
    real = draw_disorder(cfg, spec, trial_index)
    x = atom_positions(cfg) + real.phases
    diag = 1j * (cfg.delta + real.detunings) - cfg.gamma / (2.0 * cfg.beta)
    m = coupling_matrix(x, cfg.gamma_left, cfg.gamma_right, diag)
    return InteractionMatrix(m=m, drive=drive_vector(cfg), positions=x, config=cfg,
                             config_hash=cfg.config_hash(), disorder=real)


def write_matrix_csv(mat: InteractionMatrix | np.ndarray, path: str | Path) -> None:
    """Row-major; each entry is written as two columns ``re,im``."""
    m = mat.m if isinstance(mat, InteractionMatrix) else np.asarray(mat)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for row in m:
            w.writerow([v for z in row for v in (repr(float(z.real)), repr(float(z.imag)))])


def read_matrix_csv(path: str | Path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [[float(v) for v in r] for r in csv.reader(fh) if r]
    a = np.array(rows)
    return a[:, 0::2] + 1j * a[:, 1::2]
