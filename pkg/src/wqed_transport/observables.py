"""Transport observables: normalized profile, T_p, characteristic time tau.

tau is the infidelity-weighted mean time

    tau = int t (1 - F(t)) dt / int (1 - F(t)) dt,  F(t) = |<Psi~(inf)|Psi~(t)>|^2

evaluated on doubling time segments ``[t, 2t]`` starting at ``t_min``; each
segment gets a uniform Simpson grid fine enough for the modes still alive in it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson

from . import kernels
from .config import SystemConfig
from .dynamics import (DEFAULT_DT, ExcitationState, Method, coefficients_from_overlaps, evolve_ode,
                       max_stable_dt, steady_coefficients, steady_state, steady_state_eigen)
from .errors import Defective, NonConvergent, ZeroState
from .matrix import InteractionMatrix, build_matrix
from .spectral import SpectralData, decompose

POINTS_PER_PERIOD = 20
HORIZON_DECAYS = 30.0
T_MIN = 1e-6
TAIL_TOLERANCE = 1e-3
ALIVE_CUTOFF = 1e-16
CHUNK_INTERVALS = 1 << 15
MAX_TAU_POINTS = 20_000_000
DOMINANT_FRACTION = 0.25


def normalized_profile(state: ExcitationState) -> np.ndarray:
    pop = np.abs(state.amplitudes) ** 2
    total = pop.sum()
    if not total > 0:
        raise ZeroState(f"state at t = {state.t} has zero norm; use small_t_profile")
    return pop / total


def small_t_profile(drive: np.ndarray) -> np.ndarray:
    """Limit of the normalized profile as t -> 0, where p ~ -i drive t."""
    pop = np.abs(drive) ** 2
    return pop / pop.sum()


def transport_parameter(profile: np.ndarray, n_left: int) -> float:
    profile = np.asarray(profile, dtype=float)
    return float(profile[n_left:].sum() - profile[:n_left].sum())


@dataclass(frozen=True)
class TauResult:
    tau: float
    tail_error: float
    horizon: float
    n_points: int
    degenerate: bool = False


class _Moments:
    """Running zeroth and first moments of the infidelity."""

    def __init__(self):
        self.i0 = 0.0
        self.i1 = 0.0
        self.n_points = 0

    def add(self, t: np.ndarray, y: np.ndarray):
        self.i0 += simpson(y, x=t)
        self.i1 += simpson(t * y, x=t)
        self.n_points += len(t) - 1


def _tail_constant(t: np.ndarray, y: np.ndarray, rate: float, horizon: float) -> float:
    """Smallest C with ``|1 - F(t)| <= C exp(-rate (t - T))`` on the samples given."""
    return float(np.max(np.abs(y) * np.exp(rate * (t - horizon))))


def _tail_bound(c: float, horizon: float, rate: float, moments: _Moments) -> float:
    """Bound on the tau error from dropping ``[T, inf)``, assuming 1 - F <= C exp(-rate (t - T))."""
    tail0 = c / rate
    tail1 = c * (horizon / rate + 1.0 / rate ** 2)
    tau = moments.i1 / moments.i0
    return max(tail1, tau * tail0) / moments.i0


def characteristic_time(spec: SpectralData, drive: np.ndarray, steady: ExcitationState | None = None,
                        *, points_per_period: int = POINTS_PER_PERIOD, t_min: float = T_MIN,
                        horizon_decays: float = HORIZON_DECAYS,
                        tail_tolerance: float = TAIL_TOLERANCE) -> TauResult:
    """tau from the eigenmode expansion.  ``t_min`` is in units of 1/gamma."""
    coef = steady_coefficients(spec, drive)
    vecs = spec.right_vecs
    p_inf = vecs @ coef if steady is None else np.asarray(steady.amplitudes)
    norm_inf = np.linalg.norm(p_inf)
    if not norm_inf > 0:
        raise ZeroState("steady state is zero")
    u = p_inf / norm_inf
    gamma = spec.gamma
    if spec.n == 1:
        return TauResult(0.0, 0.0, 0.0, 0, degenerate=True)
    rates = spec.decay_rates
    omegas = spec.omegas
    gmin = float(rates.min())
    if not gmin > 0:
        raise NonConvergent(f"slowest mode does not decay (gamma_min = {gmin:g}); tau undefined")
    t_min = t_min / gamma
    d = drive / np.linalg.norm(drive)
    f0 = 1.0 - abs(np.vdot(u, d)) ** 2
    mom = _Moments()
    mom.i0 = f0 * t_min
    mom.i1 = f0 * t_min ** 2 / 2
    amp = np.abs(coef)
    horizon = horizon_decays / gmin
    t0 = t_min
    y_max = f0
    for attempt in range(2):
        c_tail = 0.0
        while t0 < horizon * (1 - 1e-12):
            t1 = min(2.0 * t0, horizon)
            alive = amp * np.exp(-rates * t0) > ALIVE_CUTOFF * norm_inf
            alive[np.argmin(rates)] = True
            freq = max(2.0 * float(np.abs(omegas[alive]).max()), gamma)
            h = min((t1 - t0) / 16.0, 2.0 * math.pi / (points_per_period * freq),
                    1.0 / (8.0 * float(rates[alive].max())))
            count = int(math.ceil((t1 - t0) / h))
            count += count % 2
            h = (t1 - t0) / count
            if mom.n_points + count > MAX_TAU_POINTS:
                raise NonConvergent(f"tau needs more than {MAX_TAU_POINTS} quadrature points "
                                    f"(gamma_min = {gmin:.3g}, horizon {horizon:.3g}); near a Bragg point?")
            offset = vecs[:, ~alive] @ coef[~alive]
            args = (np.ascontiguousarray(vecs[:, alive]), coef[alive], spec.lambdas[alive], offset, u)
            # even-sized chunks keep composite Simpson additive and memory bounded
            for start in range(0, count, CHUNK_INTERVALS):
                k = min(CHUNK_INTERVALS, count - start)
                y = kernels.infidelity_uniform(*args, t0 + start * h, h, k)
                t = t0 + h * np.arange(start, start + k + 1)
                mom.add(t, y)
                y_max = max(y_max, float(y.max()))
                if t1 >= horizon * (1 - 1e-12):
                    c_tail = max(c_tail, _tail_constant(t, y, 2.0 * gmin, horizon))
            t0 = t1
        if y_max < 1e-14:
            return TauResult(0.0, 0.0, horizon, mom.n_points, degenerate=True)
        err = _tail_bound(c_tail, horizon, 2.0 * gmin, mom)
        tau = mom.i1 / mom.i0
        if err <= tail_tolerance * tau:
            return TauResult(tau, err, horizon, mom.n_points)
        horizon *= 2.0
    raise NonConvergent(f"tau tail error {err:.3g} exceeds {tail_tolerance:g} * tau = {tail_tolerance * tau:.3g} "
                        f"at horizon {horizon / 2:.3g}")


def characteristic_time_ode(mat: InteractionMatrix, steady: ExcitationState | None = None, *,
                            dt: float = DEFAULT_DT, horizon_decays: float = HORIZON_DECAYS,
                            tail_tolerance: float = TAIL_TOLERANCE) -> TauResult:
    """tau from an RK4 trajectory; the route for defective (exceptional-point) spectra."""
    if steady is None:
        steady = steady_state(mat)
    p_inf = np.asarray(steady.amplitudes)
    u = p_inf / np.linalg.norm(p_inf)
    if mat.n == 1:
        return TauResult(0.0, 0.0, 0.0, 0, degenerate=True)
    lam = np.linalg.eigvals(mat.m)
    gmin = float(-lam.real.max())
    if not gmin > 0:
        raise NonConvergent(f"slowest mode does not decay (gamma_min = {gmin:g}); tau undefined")
    dt = min(dt, max_stable_dt(mat, lam))
    d = mat.drive / np.linalg.norm(mat.drive)
    f0 = 1.0 - abs(np.vdot(u, d)) ** 2
    horizon = dt * math.ceil(horizon_decays / gmin / dt)
    for attempt in range(2):
        traj = evolve_ode(mat, horizon, dt, check_step=False)
        p = traj.amplitudes
        with np.errstate(invalid="ignore", divide="ignore"):
            s = p @ u.conj()
            y = (np.abs(p - s[:, None] * u[None, :]) ** 2).sum(axis=1) / (np.abs(p) ** 2).sum(axis=1)
        y[0] = f0
        t = traj.times
        mom = _Moments()
        mom.add(t, y)
        if float(np.max(y)) < 1e-14:
            return TauResult(0.0, 0.0, horizon, mom.n_points, degenerate=True)
        tail = t >= 0.75 * horizon
        err = _tail_bound(_tail_constant(t[tail], y[tail], 2.0 * gmin, horizon), horizon, 2.0 * gmin, mom)
        tau = mom.i1 / mom.i0
        if err <= tail_tolerance * tau:
            return TauResult(tau, err, horizon, mom.n_points)
        horizon *= 2.0
    raise NonConvergent(f"tau tail error {err:.3g} exceeds {tail_tolerance:g} * tau at horizon {horizon / 2:.3g}")


@dataclass(frozen=True)
class ModeDecomposition:
    """Steady-state weights ``|Delta_n / E_n|`` in ascending-``|omega_n|`` order."""

    weights: np.ndarray
    shares: np.ndarray          # weights**2 normalized to sum 1
    localization: np.ndarray
    dominant: int
    dominance_ratio: float      # largest weight / second largest

    def dominant_modes(self, fraction: float = DOMINANT_FRACTION) -> list[tuple[int, float, float]]:
        top = self.weights.max()
        idx = [int(i) for i in np.argsort(-self.weights, kind="stable") if self.weights[i] >= fraction * top]
        return [(i, float(self.weights[i]), float(self.localization[i])) for i in idx]


def mode_decomposition(spec: SpectralData, drive: np.ndarray | None = None) -> ModeDecomposition:
    if drive is None:
        overlaps = spec.drive_overlaps
    else:
        overlaps = spec.left_vecs @ (drive / np.abs(drive).max())
    coefficients_from_overlaps(spec, overlaps)  # raises for defective or divergent spectra
    w = np.abs(overlaps / spec.energies)
    order = np.argsort(-w, kind="stable")
    ratio = float(w[order[0]] / w[order[1]]) if len(w) > 1 and w[order[1]] > 0 else float("inf")
    return ModeDecomposition(weights=w, shares=w ** 2 / np.sum(w ** 2),
                             localization=spec.right_localization(),
                             dominant=int(order[0]), dominance_ratio=ratio)


@dataclass(frozen=True)
class TransportResult:
    t_p: float
    tau: float
    profile: np.ndarray
    dominant_modes: list = field(default_factory=list)
    tail_error: float = 0.0
    method: str = Method.EIGEN.value
    gamma: float = 1.0
    degenerate: bool = False
    condition_number: float = float("nan")
    flags: tuple = ()
    eigen_error_estimate: float | None = None

    def to_dict(self) -> dict:
        return {
            "t_p": self.t_p,
            "tau_gamma": self.tau * self.gamma,
            "profile": [float(v) for v in self.profile],
            "dominant_modes": [{"mode": i, "weight": w, "right_localization": loc}
                               for i, w, loc in self.dominant_modes],
            "tail_error": self.tail_error,
            "method": self.method,
            "degenerate": self.degenerate,
            "condition_number": self.condition_number,
            "flags": list(self.flags),
            "eigen_error_estimate": self.eigen_error_estimate,
        }


def evaluate(target: SystemConfig | InteractionMatrix, *, with_tau: bool = True,
             points_per_period: int = POINTS_PER_PERIOD, ode_dt: float = DEFAULT_DT) -> TransportResult:
    """T_p, tau and mode diagnostics at one configuration.

    The steady state always comes from the direct solve, which raises
    ``SingularMatrix`` at Bragg spacings.  A defective spectrum switches tau
    to the time-domain route.
    """
    mat = build_matrix(target) if isinstance(target, SystemConfig) else target
    gamma = mat.config.gamma
    steady = steady_state(mat)
    profile = normalized_profile(steady)
    t_p = transport_parameter(profile, mat.n_left)
    try:
        spec = decompose(mat)
    except Defective as exc:
        tau = characteristic_time_ode(mat, steady, dt=ode_dt) if with_tau else None
        return TransportResult(
            t_p=t_p, tau=tau.tau if tau else float("nan"), profile=profile,
            tail_error=tau.tail_error if tau else float("nan"), method=Method.ODE.value, gamma=gamma,
            degenerate=bool(tau and tau.degenerate), condition_number=exc.condition_number,
            flags=("defective",))
    flags = []
    eigen_err = None
    decomp = mode_decomposition(spec)
    if with_tau:
        tau = characteristic_time(spec, mat.drive, steady, points_per_period=points_per_period)
        if spec.near_defective:
            flags.append("near_defective")
            alt = characteristic_time_ode(mat, steady, dt=ode_dt)
            eigen_err = abs(tau.tau - alt.tau)
            p_eig = steady_state_eigen(spec, mat.drive).amplitudes
            eigen_err = max(eigen_err, float(np.abs(p_eig - steady.amplitudes).max()))
    else:
        tau = TauResult(float("nan"), float("nan"), 0.0, 0)
    if tau.degenerate:
        flags.append("degenerate_tau")
    return TransportResult(
        t_p=t_p, tau=tau.tau, profile=profile, dominant_modes=decomp.dominant_modes(),
        tail_error=tau.tail_error, method=Method.EIGEN.value, gamma=gamma,
        degenerate=tau.degenerate, condition_number=spec.condition_number, flags=tuple(flags),
        eigen_error_estimate=eigen_err)
