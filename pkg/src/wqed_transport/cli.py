"""Command-line interface: ``wqed-transport <command> ...``.

Every command that writes files also writes ``<out>.manifest.json`` holding the
resolved arguments and the full configuration, so ``wqed-transport rerun``
can reproduce the outputs without the original config file.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .config import DisorderSpec, SystemConfig, config_from_dict, drive_vector, load_config
from .dynamics import evolve_ode, eigen_amplitudes
from .errors import ConfigError, TransportError
from .matrix import build_matrix, write_matrix_csv
from .observables import evaluate
from .oracle import compare_with_effective, evolve_rho
from .presets import PRESETS
from .spectral import decompose, isolated_mode_count, mode_table, spectral_isolation_report, write_mode_table_csv
from .sweep import (SweepSpec, disorder_ensemble, optimal_config_scan, parse_axis, run_sweep,
                    write_scan_csv, write_sidecar)

EXIT_OK = 0
EXIT_MISMATCH = 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # argparse already exits 2 for usage errors, matching the config exit code
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _clean(obj):
    """JSON-safe copy: NaN and infinities become null, numpy scalars become Python ones."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(_clean(payload), indent=2, sort_keys=True) + "\n")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# ---- configuration ---------------------------------------------------------

def _resolve_config(args) -> SystemConfig:
    if getattr(args, "config_data", None) is not None:
        cfg = config_from_dict(args.config_data, override_weak_drive=args.override_weak_drive)
    elif args.config is not None:
        cfg = load_config(args.config, override_weak_drive=args.override_weak_drive)
    elif args.preset is not None:
        cfg = PRESETS[args.preset]()
        if args.override_weak_drive:
            cfg = cfg.replace(override_weak_drive=True)
    else:
        raise ConfigError("one of --config or --preset is required")
    if args.beta is not None:
        cfg = cfg.replace(beta=args.beta)
    return cfg


def _add_config_flags(p: argparse.ArgumentParser, required_out: bool = True) -> None:
    src = p.add_mutually_exclusive_group()
    src.add_argument("--config", type=Path, help="system configuration (JSON, spacings in units of pi)")
    src.add_argument("--preset", choices=sorted(PRESETS), help="built-in configuration")
    p.add_argument("--beta", type=float, help="override the coupling efficiency")
    p.add_argument("--override-weak-drive", action="store_true",
                   help="silence the warning for Omega/gamma above the weak-drive limit")
    p.add_argument("--out", type=Path, required=required_out, help="output file")


# ---- commands --------------------------------------------------------------

def cmd_eval(args) -> list[Path]:
    cfg = _resolve_config(args)
    res = evaluate(cfg, with_tau=not args.tp_only)
    payload = {"config": cfg.to_dict(), "config_hash": cfg.config_hash(), "result": res.to_dict()}
    _write_json(args.out, payload)
    print(f"T_p = {res.t_p:.6f}  tau*gamma = {res.tau * cfg.gamma:.4f}  method = {res.method}")
    return [args.out]


def cmd_modes(args) -> list[Path]:
    cfg = _resolve_config(args)
    mat = build_matrix(cfg)
    spec = decompose(mat)
    write_mode_table_csv(spec, args.out)
    rows = mode_table(spec)
    k = isolated_mode_count(spec)
    rep = spectral_isolation_report(spec, max(k, 1))
    print(f"{'n':>3} {'omega/g':>10} {'gamma_n/g':>11} {'|E|/g':>10} {'|Delta|':>10} {'right':>6}")
    for r in rows[: args.top]:
        print(f"{r['n']:>3} {r['omega_over_gamma']:>10.4f} {r['gamma_n_over_gamma']:>11.3e} "
              f"{r['abs_E_over_gamma']:>10.3e} {r['abs_delta_n']:>10.3e} {r['right_localization']:>6.3f}")
    print(f"isolated modes: {k}  isolation ratio: {rep.isolation_ratio:.3g}  "
          f"joint right localization: {rep.joint_localization:.3f}")
    return [args.out]


def _sweep_spec(args, cfg: SystemConfig) -> SweepSpec:
    axes = tuple(parse_axis(g) for g in args.grid)
    disorder = None
    if any(a.name in ("w_phase", "delta_bar") for a in axes):
        disorder = DisorderSpec(w_phase=args.w_phase * math.pi, delta_bar=args.delta_bar,
                                trials=args.trials, master_seed=args.seed)
    return SweepSpec(cfg, axes, disorder=disorder, with_tau=not args.tp_only,
                     optimize_spacings=args.optimize)


def cmd_sweep(args) -> list[Path]:
    cfg = _resolve_config(args)
    spec = _sweep_spec(args, cfg)
    res = run_sweep(spec, threads=args.threads)
    res.write_csv(args.out)
    outputs = [args.out]
    sidecar = args.out.with_name(args.out.name + ".json")
    flags = [f for f in res.flags.ravel() if f]
    write_sidecar(sidecar, _clean({
        "version": __version__, "numpy": np.__version__, "backend": kernels.BACKEND,
        "spec": spec.to_dict(), "shape": list(res.shape), "flagged_cells": len(flags),
        "flag_counts": {f: flags.count(f) for f in sorted(set(flags))},
    }))
    outputs.append(sidecar)
    if len(spec.axes) == 2:
        for q in ("t_p",) + (() if args.tp_only else ("tau",)):
            path = args.out.with_name(args.out.name + f".{q}.dat")
            res.write_matrix(path, q)
            outputs.append(path)
    finite = np.isfinite(res.t_p)
    if finite.any():
        i = np.unravel_index(np.nanargmax(res.t_p), res.shape)
        coords = ", ".join(f"{a.name}={a.values()[j]:.6g}" for a, j in zip(spec.axes, i))
        print(f"{res.t_p.size} cells, {len(flags)} flagged; max T_p = {res.t_p[i]:.6f} at {coords}")
    return outputs


def cmd_scan(args) -> list[Path]:
    cfg = _resolve_config(args)
    axis = parse_axis(args.axis)
    rows = optimal_config_scan(cfg, axis, resolution=args.resolution, refine=not args.no_refine,
                               tie_tolerance=args.tie_tolerance, with_tau=not args.tp_only,
                               threads=args.threads)
    write_scan_csv(rows, axis, args.out, gamma=cfg.gamma)
    for r in rows:
        xs = " ".join(f"{x / math.pi:.4f}" for x in r.spacings)
        print(f"{axis.name}={r.value:g}: T_p={r.t_p:.5f} tau*gamma={r.tau * cfg.gamma:.2f} xi/pi=({xs})")
    return [args.out]


def cmd_disorder(args) -> list[Path]:
    if args.trials < 1:
        raise ConfigError(f"--trials must be positive, got {args.trials}")
    cfg = _resolve_config(args)
    spec = DisorderSpec(w_phase=args.w_phase * math.pi, delta_bar=args.delta_bar,
                        trials=args.trials, master_seed=args.seed)
    ens = disorder_ensemble(cfg, spec, threads=args.threads, with_tau=not args.tp_only)
    _write_json(args.out, {"config": cfg.to_dict(), "disorder": spec.to_dict(),
                           "ensemble": ens.to_dict(), "t_p": ens.t_p, "tau_gamma": ens.tau * cfg.gamma})
    print(f"mean T_p = {ens.mean_t_p:.6f} +- {ens.stderr_t_p:.2g} over {ens.used} trials "
          f"({ens.excluded} excluded)")
    return [args.out]


def _write_population_csv(path: Path, times: np.ndarray, pops: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"pop_{mu + 1}" for mu in range(pops.shape[1])])
        for t, row in zip(times, pops):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in row])


def cmd_trajectory(args) -> list[Path]:
    cfg = _resolve_config(args)
    nsteps = int(round(args.t_final / args.dt))
    if args.method == "oracle":
        tr = evolve_rho(cfg, args.t_final, args.dt, stride=args.stride)
        times, pops = tr.times, tr.populations
    elif args.method == "ode":
        tr = evolve_ode(build_matrix(cfg), args.t_final, args.dt, stride=args.stride)
        times, pops = tr.times, tr.populations
    else:
        idx = list(range(0, nsteps + 1, args.stride))
        if idx[-1] != nsteps:
            idx.append(nsteps)
        times = np.array(idx) * args.dt
        spec = decompose(build_matrix(cfg))
        pops = np.abs(eigen_amplitudes(spec, drive_vector(cfg), times)) ** 2
    _write_population_csv(args.out, times, pops)
    return [args.out]


def _validation_configs(args) -> list[SystemConfig]:
    if _has_config(args):
        return [_resolve_config(args)]
    if args.n < 1:
        raise ConfigError("--n must be positive")
    n_left = max(1, args.n // 2)
    n_right = args.n - n_left
    if args.count == 1:
        base = SystemConfig(n_left=n_left, n_right=n_right, xi_left=1.8 * math.pi, xi_d=1.5 * math.pi,
                            xi_right=1.158 * math.pi, directionality=0.5)
        return [base if args.beta is None else base.replace(beta=args.beta)]
    rng = np.random.default_rng(args.seed)
    out = []
    for _ in range(args.count):
        x = rng.uniform(1.0, 2.0, size=3) * math.pi
        out.append(SystemConfig(n_left=n_left, n_right=n_right, xi_left=x[0], xi_d=x[1], xi_right=x[2],
                                directionality=float(rng.uniform(-1.0, 1.0)),
                                beta=1.0 if args.beta is None else args.beta))
    return out


def cmd_validate(args) -> list[Path]:
    worst = 0.0
    outputs = []
    for k, cfg in enumerate(_validation_configs(args)):
        cmp = compare_with_effective(cfg, t_final=args.t_final, dt=args.dt, stride=args.stride)
        worst = max(worst, cmp.max_deviation)
        print(f"config {k}: max relative deviation {cmp.max_deviation:.3e}")
        if args.out is not None and k == 0:
            _write_population_csv(args.out, cmp.times, cmp.oracle)
            eff = args.out.with_name(args.out.name + ".effective.csv")
            _write_population_csv(eff, cmp.times, cmp.effective)
            outputs += [args.out, eff]
    print(f"max relative deviation: {worst:.3e}")
    if worst > args.tolerance:
        print(f"deviation exceeds tolerance {args.tolerance:g}", file=sys.stderr)
        raise _Exit(EXIT_MISMATCH, outputs)
    return outputs


def cmd_matrix(args) -> list[Path]:
    write_matrix_csv(build_matrix(_resolve_config(args)), args.out)
    return [args.out]


class _Exit(Exception):
    def __init__(self, code: int, outputs: list[Path]):
        self.code = code
        self.outputs = outputs


# ---- manifests -------------------------------------------------------------

_NOT_RECORDED = {"func", "config", "preset", "config_data", "command_name"}


def _manifest_path(out: Path) -> Path:
    return out.with_name(out.name + ".manifest.json")


def _write_manifest(args, cfg_dict, outputs: list[Path]) -> Path:
    recorded = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()
                if k not in _NOT_RECORDED}
    payload = {
        "tool": "wqed-transport",
        "version": __version__,
        "command": args.command_name,
        "args": recorded,
        "config": cfg_dict,
        "backend": kernels.BACKEND,
        "outputs": {p.name: _sha256(p) for p in outputs},
    }
    path = _manifest_path(outputs[0])
    _write_json(path, payload)
    return path


def cmd_rerun(args) -> int:
    man = json.loads(Path(args.manifest).read_text())
    if man.get("tool") != "wqed-transport" or man.get("command") not in COMMANDS:
        raise ConfigError(f"{args.manifest}: not a wqed-transport manifest")
    if man.get("backend") != kernels.BACKEND:
        print(f"note: manifest was produced with the {man.get('backend')} kernels, "
              f"this run uses {kernels.BACKEND}", file=sys.stderr)
    ns = argparse.Namespace(**man["args"])
    ns.command_name = man["command"]
    ns.func = COMMANDS[ns.command_name]
    ns.config = None
    ns.preset = None
    ns.config_data = man["config"]
    base = Path(args.manifest).parent
    if ns.out is not None:
        target_dir = Path(args.out_dir) if args.out_dir else base
        target_dir.mkdir(parents=True, exist_ok=True)
        ns.out = target_dir / Path(ns.out).name
    elif man["outputs"]:
        raise ConfigError("manifest lists outputs but records no --out path")
    try:
        outputs = ns.func(ns)
    except _Exit as exc:
        return exc.code
    mismatched = [p.name for p in outputs if man["outputs"].get(p.name) != _sha256(p)]
    if mismatched:
        print(f"outputs differ from the manifest: {', '.join(mismatched)}", file=sys.stderr)
        return EXIT_MISMATCH
    print(f"reproduced {len(outputs)} output file(s) byte-for-byte")
    return EXIT_OK


# ---- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wqed-transport", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command_name", required=True, parser_class=_Parser)

    p = sub.add_parser("eval", help="T_p, tau and dominant modes for one configuration")
    _add_config_flags(p)
    p.add_argument("--tp-only", action="store_true", help="skip tau")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("modes", help="eigenmode table (CSV) sorted by |omega_n|")
    _add_config_flags(p)
    p.add_argument("--top", type=int, default=10, help="rows printed to stdout")
    p.set_defaults(func=cmd_modes)

    p = sub.add_parser("sweep", help="one- or two-axis parameter sweep")
    _add_config_flags(p)
    p.add_argument("--grid", action="append", required=True, metavar="AXIS=MIN:MAX:COUNT",
                   help="sweep axis; spacings and w_phase in units of pi (repeat for a 2D sweep)")
    p.add_argument("--tp-only", action="store_true", help="steady-state T_p only (batched kernel)")
    p.add_argument("--optimize", type=int, metavar="RES",
                   help="optimize spacings at every cell on a RES^3 grid")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--w-phase", type=float, default=0.0, help="phase disorder width (units of pi)")
    p.add_argument("--delta-bar", type=float, default=0.0, help="detuning disorder width")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("scan", help="optimal spacings along directionality or atom number")
    _add_config_flags(p)
    p.add_argument("--axis", required=True, metavar="AXIS=MIN:MAX:COUNT")
    p.add_argument("--resolution", type=int, default=100, help="grid points per spacing axis")
    p.add_argument("--no-refine", action="store_true")
    p.add_argument("--tie-tolerance", type=float, default=0.0,
                   help="T_p window treated as tied; the shortest tau wins")
    p.add_argument("--tp-only", action="store_true")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("disorder", help="disorder-averaged T_p and tau")
    _add_config_flags(p)
    p.add_argument("--w-phase", type=float, default=0.0, help="phase disorder width (units of pi)")
    p.add_argument("--delta-bar", type=float, default=0.0, help="detuning disorder width")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--tp-only", action="store_true")
    p.set_defaults(func=cmd_disorder)

    p = sub.add_parser("trajectory", help="site populations over time (CSV)")
    _add_config_flags(p)
    p.add_argument("--method", choices=("eigen", "ode", "oracle"), default="eigen")
    p.add_argument("--t-final", type=float, default=20.0)
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--stride", type=int, default=10)
    p.set_defaults(func=cmd_trajectory)

    p = sub.add_parser("validate", help="compare the master equation with the single-excitation model")
    _add_config_flags(p, required_out=False)
    p.add_argument("--n", type=int, default=3, help="atoms (oracle supports up to 6)")
    p.add_argument("--count", type=int, default=1, help="number of random configurations")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--t-final", type=float, default=20.0)
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--stride", type=int, default=10)
    p.add_argument("--tolerance", type=float, default=1e-3)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("matrix", help="write the interaction matrix as CSV")
    _add_config_flags(p)
    p.set_defaults(func=cmd_matrix)

    p = sub.add_parser("rerun", help="re-run a manifest and check outputs byte-for-byte")
    p.add_argument("manifest", type=Path)
    p.add_argument("--out-dir", type=Path, help="write outputs here instead of next to the manifest")
    p.set_defaults(func=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", 1) is not None and getattr(args, "threads", 1) < 1:
        parser.error("--threads must be >= 1")
    with warnings.catch_warnings():
        warnings.simplefilter("default")
        try:
            if args.command_name == "rerun":
                return cmd_rerun(args)
            try:
                outputs = args.func(args)
            except _Exit as exc:
                return exc.code
            if outputs:
                cfg_dict = _resolve_config(args).to_dict() if _has_config(args) else None
                _write_manifest(args, cfg_dict, outputs)
        except TransportError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return exc.exit_code
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
    return EXIT_OK


COMMANDS = {"eval": cmd_eval, "modes": cmd_modes, "sweep": cmd_sweep, "scan": cmd_scan,
            "disorder": cmd_disorder, "trajectory": cmd_trajectory, "validate": cmd_validate,
            "matrix": cmd_matrix}


def _has_config(args) -> bool:
    return any(getattr(args, k, None) is not None for k in ("config", "preset", "config_data"))


if __name__ == "__main__":
    sys.exit(main())
