"""Biorthonormal eigen-decomposition of the interaction matrix.

With ``M phi_R = lambda phi_R`` the complex eigenenergy is ``E = i lambda``,
so the frequency shift is ``omega = -Im(lambda)`` and the decay rate is
``gamma_n = -Re(lambda)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import Defective
from .matrix import InteractionMatrix

DEFECTIVE_COND = 1e12
NEAR_DEFECTIVE_COND = 1e8


@dataclass(frozen=True)
class SpectralData:
    """Modes sorted by ascending ``|omega_n|`` (ties: ascending ``gamma_n``).

    ``right_vecs[:, n]`` has unit norm, ``left_vecs[n, :]`` is scaled so that
    ``left_vecs @ right_vecs`` is the identity.
    """

    lambdas: np.ndarray
    right_vecs: np.ndarray
    left_vecs: np.ndarray
    drive_overlaps: np.ndarray
    condition_number: float
    ordering: np.ndarray
    n_left: int
    gamma: float
    defective: bool = False

    @property
    def n(self) -> int:
        return len(self.lambdas)

    @property
    def energies(self) -> np.ndarray:
        return 1j * self.lambdas

    @property
    def omegas(self) -> np.ndarray:
        return -self.lambdas.imag

    @property
    def decay_rates(self) -> np.ndarray:
        return -self.lambdas.real

    @property
    def subradiant(self) -> np.ndarray:
        return self.decay_rates < self.gamma

    @property
    def near_defective(self) -> bool:
        return self.condition_number > NEAR_DEFECTIVE_COND

    def by_energy(self) -> np.ndarray:
        """Mode indices sorted by ascending ``|E_n|``."""
        return np.argsort(np.abs(self.lambdas), kind="stable")

    def right_localization(self) -> np.ndarray:
        """Fraction of ``|phi_n^R|^2`` on the right group, per mode."""
        w = np.abs(self.right_vecs) ** 2
        return w[self.n_left:].sum(axis=0) / w.sum(axis=0)


def decompose(mat: InteractionMatrix, *, allow_defective: bool = False) -> SpectralData:
    m = mat.m
    lam, vr = np.linalg.eig(m)
    vr = vr / np.linalg.norm(vr, axis=0)
    cond = np.linalg.cond(vr)
    if not np.isfinite(cond):
        cond = np.inf
    defective = cond > DEFECTIVE_COND
    if defective and not allow_defective:
        raise Defective(f"eigenvector condition number {cond:.3g} exceeds {DEFECTIVE_COND:.0e}; "
                        "use time-domain integration", condition_number=float(cond))
    order = np.lexsort((-lam.real, np.abs(lam.imag)))
    lam = lam[order]
    vr = vr[:, order]
    with np.errstate(all="ignore"):
        vl = np.linalg.pinv(vr) if defective else np.linalg.inv(vr)
    omega = np.abs(mat.drive).max()
    overlaps = vl @ (mat.drive / omega)
    return SpectralData(lambdas=lam, right_vecs=vr, left_vecs=vl, drive_overlaps=overlaps,
                        condition_number=float(cond), ordering=order,
                        n_left=mat.n_left, gamma=mat.config.gamma, defective=bool(defective))


@dataclass(frozen=True)
class IsolationReport:
    modes: np.ndarray           # indices of the k smallest |E_n|, ascending
    magnitudes: np.ndarray      # their |E_n|
    isolation_ratio: float      # min |E| outside / max |E| inside; inf when k == N
    localization: np.ndarray    # right-group fraction of each reported mode
    joint_localization: float   # right-group fraction of the steady state projected on the modes
    tie_break: str = "ascending |omega_n|, then ascending gamma_n"


def spectral_isolation_report(spec: SpectralData, k: int = 1) -> IsolationReport:
    if spec.n == 1:
        k = 1
    if not 1 <= k <= spec.n:
        raise ValueError(f"k must lie in [1, {spec.n}], got {k}")
    order = spec.by_energy()
    mags = np.abs(spec.lambdas)
    inside, outside = order[:k], order[k:]
    ratio = float(mags[outside].min() / mags[inside].max()) if len(outside) else float("inf")
    coef = spec.drive_overlaps[inside] / spec.lambdas[inside]
    partial = spec.right_vecs[:, inside] @ coef
    w = np.abs(partial) ** 2
    joint = float(w[spec.n_left:].sum() / w.sum()) if w.sum() > 0 else float("nan")
    return IsolationReport(modes=inside, magnitudes=mags[inside], isolation_ratio=ratio,
                           localization=spec.right_localization()[inside],
                           joint_localization=joint)


def isolated_mode_count(spec: SpectralData, threshold: float = 3.0, k_max: int | None = None) -> int:
    """Smallest k whose k lowest-|E| modes sit ``threshold`` times below all others; 0 if none."""
    mags = np.sort(np.abs(spec.lambdas))
    k_max = spec.n - 1 if k_max is None else min(k_max, spec.n - 1)
    for k in range(1, k_max + 1):
        if mags[k] >= threshold * mags[k - 1]:
            return k
    return 0


def mode_table(spec: SpectralData) -> list[dict]:
    e = spec.energies
    loc = spec.right_localization()
    rows = []
    for n in range(spec.n):
        rows.append({
            "n": n,
            "omega_over_gamma": float(spec.omegas[n] / spec.gamma),
            "gamma_n_over_gamma": float(spec.decay_rates[n] / spec.gamma),
            "abs_E_over_gamma": float(abs(e[n]) / spec.gamma),
            "abs_delta_n": float(abs(spec.drive_overlaps[n])),
            "right_localization": float(loc[n]),
        })
    return rows


def write_mode_table_csv(spec: SpectralData, path: str | Path) -> None:
    rows = mode_table(spec)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
