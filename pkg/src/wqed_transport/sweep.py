"""Parameter scans, optimal-spacing searches and disorder ensembles.

Every cell and every trial is a pure function of its inputs, and results are
stored by index, so the output never depends on the number of worker threads.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .config import DisorderSpec, SystemConfig
from .dynamics import SINGULAR_COND, steady_state
from .errors import ConfigError, Defective, DivergentMode, NonConvergent, SingularMatrix, TransportError
from .matrix import build_disordered_matrix
from .observables import evaluate, normalized_profile, transport_parameter

SPACING_AXES = ("xi_left", "xi_d", "xi_right")
AXIS_NAMES = SPACING_AXES + ("directionality", "n_total", "beta", "w_phase", "delta_bar")
PI_AXES = SPACING_AXES + ("w_phase",)


@dataclass(frozen=True)
class Axis:
    """Closed range ``[lo, hi]`` sampled at ``count`` points; spacing axes in radians."""

    name: str
    lo: float
    hi: float
    count: int

    def __post_init__(self):
        if self.name not in AXIS_NAMES:
            raise ConfigError(f"unknown sweep axis {self.name!r}; choose from {', '.join(AXIS_NAMES)}")
        if self.count < 2:
            raise ConfigError(f"axis {self.name}: point count must be >= 2, got {self.count}")
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ConfigError(f"axis {self.name}: range must be finite")
        if self.name == "n_total":
            vals = self.values()
            if np.any(vals % 2) or np.any(vals < 2):
                raise ConfigError("n_total axis must contain even values >= 2 (groups split equally)")

    def values(self) -> np.ndarray:
        v = np.linspace(self.lo, self.hi, self.count)
        if self.name == "n_total":
            return np.rint(v).astype(int)
        return v

    def to_dict(self) -> dict:
        scale = math.pi if self.name in PI_AXES else 1.0
        suffix = "_pi" if self.name in PI_AXES else ""
        return {"name": self.name, "min" + suffix: self.lo / scale, "max" + suffix: self.hi / scale,
                "count": self.count}


def parse_axis(text: str) -> Axis:
    """``"name=min:max:count"``; spacing and phase-disorder axes are in units of pi."""
    try:
        name, rng = text.split("=", 1)
        lo, hi, count = rng.split(":")
        lo, hi, count = float(lo), float(hi), int(count)
    except ValueError:
        raise ConfigError(f"bad grid specification {text!r}; expected axis=min:max:count") from None
    name = name.strip()
    if name in PI_AXES:
        lo, hi = lo * math.pi, hi * math.pi
    return Axis(name, lo, hi, count)


def apply_axis(cfg: SystemConfig, name: str, value) -> SystemConfig:
    if name == "n_total":
        n = int(value)
        return cfg.replace(n_left=n // 2, n_right=n // 2, drive_mask=None)
    if name in ("w_phase", "delta_bar"):
        return cfg
    return cfg.replace(**{name: float(value)})


@dataclass(frozen=True)
class SweepSpec:
    base: SystemConfig
    axes: tuple[Axis, ...]
    disorder: DisorderSpec | None = None
    with_tau: bool = True
    optimize_spacings: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple(self.axes))
        if not 1 <= len(self.axes) <= 2:
            raise ConfigError("a sweep takes one or two axes")
        names = [a.name for a in self.axes]
        if len(set(names)) != len(names):
            raise ConfigError("sweep axes must be distinct")
        if any(n in ("w_phase", "delta_bar") for n in names) and self.disorder is None:
            object.__setattr__(self, "disorder", DisorderSpec())
        if self.optimize_spacings is not None and any(n in SPACING_AXES for n in names):
            raise ConfigError("optimize_spacings cannot be combined with a spacing axis")

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.count for a in self.axes)

    def cell(self, index: tuple[int, ...]) -> tuple[SystemConfig, DisorderSpec | None, tuple]:
        cfg = self.base
        dis = self.disorder
        coords = []
        for ax, i in zip(self.axes, index):
            v = ax.values()[i]
            coords.append(v)
            cfg = apply_axis(cfg, ax.name, v)
            if ax.name in ("w_phase", "delta_bar"):
                dis = DisorderSpec(**{**dis.__dict__, ax.name: float(v)})
        return cfg, dis, tuple(coords)

    def to_dict(self) -> dict:
        return {
            "base": self.base.to_dict(),
            "axes": [a.to_dict() for a in self.axes],
            "disorder": self.disorder.to_dict() if self.disorder else None,
            "with_tau": self.with_tau,
            "optimize_spacings": self.optimize_spacings,
        }


def error_flag(exc: BaseException) -> str:
    if isinstance(exc, (SingularMatrix, DivergentMode)):
        return "bragg"
    if isinstance(exc, Defective):
        return "defective"
    if isinstance(exc, NonConvergent):
        return "nonconvergent"
    if isinstance(exc, ConfigError):
        return "config"
    return "error"


@dataclass
class SweepResult:
    axes: tuple[Axis, ...]
    t_p: np.ndarray
    tau: np.ndarray
    flags: np.ndarray
    dominant: np.ndarray
    t_p_stderr: np.ndarray | None = None
    tau_stderr: np.ndarray | None = None
    trials: np.ndarray | None = None
    spacings: np.ndarray | None = None   # chosen (xi_L, xi_D, xi_R) per cell when optimizing
    spec: SweepSpec | None = None

    @property
    def shape(self):
        return self.t_p.shape

    def rows(self):
        for index in np.ndindex(*self.shape):
            row = {ax.name: ax.values()[i] for ax, i in zip(self.axes, index)}
            for ax in self.axes:
                if ax.name in PI_AXES:
                    row[ax.name + "_pi"] = row.pop(ax.name) / math.pi
            row["t_p"] = self.t_p[index]
            row["tau_gamma"] = self.tau[index] * (self.spec.base.gamma if self.spec else 1.0)
            if self.trials is not None:
                row["t_p_stderr"] = self.t_p_stderr[index]
                row["tau_stderr"] = self.tau_stderr[index]
                row["trials"] = int(self.trials[index])
            if self.spacings is not None:
                for k, name in enumerate(SPACING_AXES):
                    row[name + "_pi"] = self.spacings[index][k] / math.pi
            row["dominant_mode"] = int(self.dominant[index])
            row["flag"] = self.flags[index]
            yield row

    def write_csv(self, path: str | Path) -> None:
        rows = list(self.rows())
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            for r in rows:
                w.writerow({k: _fmt(v) for k, v in r.items()})

    def write_matrix(self, path: str | Path, quantity: str = "t_p") -> None:
        """gnuplot ``nonuniform matrix`` layout: first axis along rows, second along columns."""
        data = getattr(self, quantity)
        if data.ndim != 2:
            raise ValueError("matrix export needs a two-axis sweep")
        ya, xa = self.axes
        yv, xv = _display(ya), _display(xa)
        with open(path, "w") as fh:
            fh.write(" ".join([str(len(xv))] + [_fmt(v) for v in xv]) + "\n")
            for i, y in enumerate(yv):
                fh.write(" ".join([_fmt(y)] + [_fmt(v) for v in data[i]]) + "\n")


def _display(axis: Axis) -> np.ndarray:
    v = axis.values().astype(float)
    return v / math.pi if axis.name in PI_AXES else v


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def _map(fn: Callable, items: Sequence, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _steady_tp(cfg: SystemConfig, xi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batched steady-state T_p over spacing triples; NaN marks singular (Bragg) points."""
    diag = 1j * cfg.delta - cfg.gamma / (2.0 * cfg.beta)
    tp, gain = kernels.steady_transport_batch(cfg.n_left, cfg.n_right, xi, cfg.gamma_left,
                                              cfg.gamma_right, diag, cfg.mask())
    bad = ~np.isfinite(gain) | (gain > SINGULAR_COND) | ~np.isfinite(tp)
    tp = np.where(bad, np.nan, tp)
    return tp, bad


def run_sweep(spec: SweepSpec, threads: int = 1) -> SweepResult:
    shape = spec.shape
    t_p = np.full(shape, np.nan)
    tau = np.full(shape, np.nan)
    flags = np.full(shape, "", dtype=object)
    dominant = np.full(shape, -1, dtype=int)
    indices = list(np.ndindex(*shape))

    if spec.optimize_spacings is not None:
        if len(spec.axes) != 1:
            raise ConfigError("spacing optimization supports a single axis")
        scan = optimal_config_scan(spec.base, spec.axes[0], resolution=spec.optimize_spacings,
                                   with_tau=spec.with_tau, threads=threads)
        return SweepResult(axes=spec.axes, t_p=np.array([r.t_p for r in scan]),
                           tau=np.array([r.tau for r in scan]),
                           flags=np.array([r.flag for r in scan], dtype=object),
                           dominant=np.full(shape, -1, dtype=int),
                           spacings=np.array([r.spacings for r in scan]), spec=spec)

    if spec.disorder is not None:
        se_tp = np.full(shape, np.nan)
        se_tau = np.full(shape, np.nan)
        trials = np.zeros(shape, dtype=int)
        for index in indices:
            cfg, dis, _ = spec.cell(index)
            ens = disorder_ensemble(cfg, dis, threads=threads, with_tau=spec.with_tau)
            t_p[index], tau[index] = ens.mean_t_p, ens.mean_tau
            se_tp[index], se_tau[index] = ens.stderr_t_p, ens.stderr_tau
            trials[index] = ens.used
            if ens.used == 0:
                flags[index] = "all_trials_excluded"
            elif ens.excluded:
                flags[index] = f"excluded={ens.excluded}"
        return SweepResult(axes=spec.axes, t_p=t_p, tau=tau, flags=flags, dominant=dominant,
                           t_p_stderr=se_tp, tau_stderr=se_tau, trials=trials, spec=spec)

    cells = []
    for index in indices:
        try:
            cells.append((index, spec.cell(index)[0]))
        except ConfigError as exc:
            flags[index] = error_flag(exc)

    if not spec.with_tau:
        # group cells sharing everything but the spacings into one kernel call
        groups: dict = {}
        for index, cfg in cells:
            key = cfg.replace(xi_left=0.0, xi_d=0.0, xi_right=0.0)
            groups.setdefault(key, []).append((index, cfg))
        for key, members in groups.items():
            xi = np.array([[c.xi_left, c.xi_d, c.xi_right] for _, c in members])
            tp, bad = _steady_tp(key, xi)
            for (index, _), v, b in zip(members, tp, bad):
                t_p[index] = v
                if b:
                    flags[index] = "bragg"
        return SweepResult(axes=spec.axes, t_p=t_p, tau=tau, flags=flags, dominant=dominant, spec=spec)

    def work(item):
        index, cfg = item
        try:
            return index, evaluate(cfg), None
        except TransportError as exc:
            return index, None, error_flag(exc)

    for index, res, flag in _map(work, cells, threads):
        if res is None:
            flags[index] = flag
            continue
        t_p[index], tau[index] = res.t_p, res.tau
        if res.dominant_modes:
            dominant[index] = res.dominant_modes[0][0]
        if res.flags:
            flags[index] = ",".join(res.flags)
    return SweepResult(axes=spec.axes, t_p=t_p, tau=tau, flags=flags, dominant=dominant, spec=spec)


def count_fringes(values: np.ndarray, threshold: float = 0.5) -> int:
    """Local maxima above ``threshold`` on a closed cut, endpoints included.

    On a ``[pi, 2 pi]`` spacing cut a maximum sitting on the ``pi``/``2 pi``
    seam shows up at both ends and is counted twice, as in a phase diagram.
    NaN cells never count.
    """
    v = np.where(np.isnan(values), -np.inf, np.asarray(values, dtype=float))
    pad = np.concatenate([[-np.inf], v, [-np.inf]])
    return int(np.count_nonzero((v > pad[:-2]) & (v > pad[2:]) & (v > threshold)))


def spacing_grid(resolution: int) -> np.ndarray:
    """All triples on the half-open cube ``[pi, 2 pi)^3``; shape (resolution**3, 3)."""
    a = math.pi + math.pi * np.arange(resolution) / resolution
    return np.stack(np.meshgrid(a, a, a, indexing="ij"), axis=-1).reshape(-1, 3)


@dataclass(frozen=True)
class OptimumResult:
    value: float
    spacings: tuple[float, float, float]
    t_p: float
    tau: float
    flag: str = ""
    candidates: int = 1


def optimize_spacings(cfg: SystemConfig, resolution: int = 100, *, refine: bool = True,
                      refine_points: int = 9, tie_tolerance: float = 0.0, max_ties: int = 32,
                      with_tau: bool = True, chunk: int = 200_000) -> OptimumResult:
    """Exhaustive search of ``(xi_L, xi_D, xi_R)`` maximizing T_p.

    Configurations within ``tie_tolerance`` of the best T_p count as tied and
    the one with the smallest tau wins (at most ``max_ties`` are timed).
    """
    grid = spacing_grid(resolution)
    tp = np.empty(len(grid))
    for s in range(0, len(grid), chunk):
        tp[s:s + chunk] = _steady_tp(cfg, grid[s:s + chunk])[0]
    if refine:
        best = grid[np.nanargmax(tp)]
        h = math.pi / resolution
        offs = np.linspace(-h, h, refine_points)
        local = np.stack(np.meshgrid(offs, offs, offs, indexing="ij"), -1).reshape(-1, 3) + best
        local = np.clip(local, math.pi, 2 * math.pi)
        grid = np.concatenate([grid, local])
        tp = np.concatenate([tp, _steady_tp(cfg, local)[0]])
    top = float(np.nanmax(tp))
    tied = np.flatnonzero(tp >= top - tie_tolerance)
    tied = tied[np.argsort(-tp[tied], kind="stable")][:max_ties]
    if not with_tau:
        x = grid[tied[0]]
        return OptimumResult(float("nan"), tuple(float(v) for v in x), float(tp[tied[0]]), float("nan"))
    best = None
    for i in tied:
        x = grid[i]
        c = cfg.replace(xi_left=float(x[0]), xi_d=float(x[1]), xi_right=float(x[2]))
        try:
            res = evaluate(c)
        except TransportError:
            continue
        key = (res.tau, -res.t_p)
        if best is None or key < best[0]:
            best = (key, x, res)
    if best is None:
        x = grid[tied[0]]
        return OptimumResult(float("nan"), tuple(float(v) for v in x), float(tp[tied[0]]),
                             float("nan"), flag="tau_unavailable", candidates=len(tied))
    _, x, res = best
    return OptimumResult(float("nan"), tuple(float(v) for v in x), res.t_p, res.tau,
                         candidates=len(tied))


def optimal_config_scan(base: SystemConfig, axis: Axis, resolution: int = 100, *,
                        refine: bool = True, tie_tolerance: float = 0.0, with_tau: bool = True,
                        threads: int = 1) -> list[OptimumResult]:
    """Best spacing triple at every point of a directionality or atom-number axis."""
    if axis.name not in ("directionality", "n_total", "beta"):
        raise ConfigError(f"optimal-spacing scans run along directionality, n_total or beta, not {axis.name}")
    if axis.name != "n_total" and base.n_left != base.n_right:
        raise ConfigError("optimal-spacing scans require equal groups (n_left == n_right)")

    def one(v):
        cfg = apply_axis(base, axis.name, v)
        r = optimize_spacings(cfg, resolution, refine=refine, tie_tolerance=tie_tolerance,
                              with_tau=with_tau)
        return OptimumResult(float(v), r.spacings, r.t_p, r.tau, r.flag, r.candidates)

    return _map(one, list(axis.values()), threads)


@dataclass(frozen=True)
class EnsembleResult:
    mean_t_p: float
    mean_tau: float
    stderr_t_p: float
    stderr_tau: float
    used: int
    excluded: int
    t_p: np.ndarray = field(repr=False)
    tau: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {"mean_t_p": self.mean_t_p, "mean_tau_gamma": self.mean_tau,
                "stderr_t_p": self.stderr_t_p, "stderr_tau_gamma": self.stderr_tau,
                "trials_used": self.used, "trials_excluded": self.excluded}


def _trial(cfg: SystemConfig, spec: DisorderSpec, k: int, with_tau: bool) -> tuple[float, float]:
    mat = build_disordered_matrix(cfg, spec, k)
    if with_tau:
        r = evaluate(mat)
        return r.t_p, r.tau
    st = steady_state(mat)
    return transport_parameter(normalized_profile(st), cfg.n_left), float("nan")


def disorder_ensemble(cfg: SystemConfig, spec: DisorderSpec, *, threads: int = 1,
                      with_tau: bool = True) -> EnsembleResult:
    """Average T_p and tau over ``spec.trials`` disorder realizations.

    Trials that hit a singular or non-convergent case are excluded and counted.
    """
    if spec.trials < 2:
        raise ConfigError("a disorder ensemble needs at least 2 trials")

    def work(k):
        try:
            return _trial(cfg, spec, k, with_tau)
        except TransportError:
            return None

    out = _map(work, list(range(spec.trials)), threads)
    ok = [r for r in out if r is not None]
    excluded = len(out) - len(ok)
    if not ok:
        nan = float("nan")
        return EnsembleResult(nan, nan, nan, nan, 0, excluded, np.array([]), np.array([]))
    tp = np.array([r[0] for r in ok])
    tau = np.array([r[1] for r in ok])

    def stats(a):
        if len(a) < 2 or not np.all(np.isfinite(a)):
            return float(np.mean(a)) if len(a) else float("nan"), float("nan")
        return float(np.mean(a)), float(np.std(a, ddof=1) / math.sqrt(len(a)))

    m_tp, se_tp = stats(tp)
    m_tau, se_tau = stats(tau)
    return EnsembleResult(m_tp, m_tau, se_tp, se_tau, len(ok), excluded, tp, tau)


def write_scan_csv(rows: list[OptimumResult], axis: Axis, path: str | Path, gamma: float = 1.0) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([axis.name, "xi_left_pi", "xi_d_pi", "xi_right_pi", "t_p", "tau_gamma", "flag"])
        for r in rows:
            w.writerow([_fmt(r.value) if axis.name != "n_total" else str(int(r.value)),
                        *(_fmt(x / math.pi) for x in r.spacings), _fmt(r.t_p), _fmt(r.tau * gamma), r.flag])


def write_sidecar(path: str | Path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
