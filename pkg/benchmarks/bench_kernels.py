"""Compiled vs numpy kernels: agreement and wall time.

    python3 benchmarks/bench_kernels.py [--configs 65536] [--repeat 3]
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from wqed_transport import _pykernels, kernels
from wqed_transport.dynamics import steady_coefficients, steady_state
from wqed_transport.matrix import build_matrix
from wqed_transport.presets import PRESETS
from wqed_transport.spectral import decompose


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def bench_steady(impl, cfg, xi, repeat):
    diag = 1j * cfg.delta - cfg.gamma / (2 * cfg.beta)
    return best_of(lambda: impl.steady_transport_batch(cfg.n_left, cfg.n_right, xi, cfg.gamma_left,
                                                       cfg.gamma_right, diag, cfg.mask()), repeat)


def bench_infidelity(impl, args, repeat):
    return best_of(lambda: impl.infidelity_uniform(*args), repeat)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--configs", type=int, default=65536)
    ap.add_argument("--points", type=int, default=30000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    if kernels.BACKEND != "cython":
        print("compiled extension not available; only the numpy kernels can be timed")
    compiled = kernels if kernels.BACKEND == "cython" else None

    cfg = PRESETS["single-mode"]()
    rng = np.random.default_rng(0)
    xi = rng.uniform(math.pi, 2 * math.pi, size=(args.configs, 3))

    t_py, (tp_py, _) = bench_steady(_pykernels, cfg, xi, args.repeat)
    print(f"steady_transport_batch  N={cfg.n}  {args.configs} configs")
    print(f"  numpy    {t_py:8.3f} s")
    if compiled:
        t_c, (tp_c, _) = bench_steady(compiled, cfg, xi, args.repeat)
        print(f"  compiled {t_c:8.3f} s   speedup {t_py / t_c:5.2f}x   max |dT_p| {np.abs(tp_c - tp_py).max():.2e}")

    mat = build_matrix(cfg)
    spec = decompose(mat)
    coef = steady_coefficients(spec, mat.drive)
    p_inf = steady_state(mat).amplitudes
    unit = p_inf / np.linalg.norm(p_inf)
    h = 0.05
    # modes still above 1e-16 of the steady norm at t = 200/gamma
    late = np.abs(coef) * np.exp(-spec.decay_rates * 200.0) > 1e-16 * np.linalg.norm(p_inf)
    for label, keep in (("all modes", np.ones(spec.n, bool)), ("alive modes", late)):
        vecs = np.ascontiguousarray(spec.right_vecs[:, keep])
        offset = spec.right_vecs[:, ~keep] @ coef[~keep]
        call = (vecs, coef[keep], spec.lambdas[keep], offset, unit, 200.0 if label == "alive modes" else h,
                h, args.points)
        t_py, y_py = bench_infidelity(_pykernels, call, args.repeat)
        print(f"infidelity_uniform  {label} ({int(keep.sum())})  {args.points} points")
        print(f"  numpy    {t_py * 1e3:8.2f} ms")
        if compiled:
            t_c, y_c = bench_infidelity(compiled, call, args.repeat)
            print(f"  compiled {t_c * 1e3:8.2f} ms   speedup {t_py / t_c:5.2f}x   max |d(1-F)| {np.abs(y_c - y_py).max():.2e}")


if __name__ == "__main__":
    main()
