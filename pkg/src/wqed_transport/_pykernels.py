"""Pure numpy implementations of the hot kernels (fallback for ``_ckernels``)."""

from __future__ import annotations

import numpy as np


def _layout(n_left: int, n_right: int, xi: np.ndarray) -> np.ndarray:
    xl, xd, xr = xi[:, 0:1], xi[:, 1:2], xi[:, 2:3]
    left = np.arange(n_left)[None, :] * xl
    right = (n_left - 1) * xl + xd + np.arange(n_right)[None, :] * xr
    return np.concatenate([left, right], axis=1)


def steady_transport_batch(n_left, n_right, xi, gamma_left, gamma_right, diag, mask,
                           chunk: int = 4096):
    """Steady-state transport parameter for a batch of spacing triples.

    ``xi`` has shape (K, 3) with columns (xi_left, xi_d, xi_right).  Returns
    ``(t_p, gain)``.  ``gain`` is the larger of ``max|p| * |Re diag|`` for a
    unit drive on the sites in ``mask`` and the elimination pivot ratio
    ``max|pivot| / min|pivot|``; a non-finite or huge gain marks a singular
    matrix.  The first term misses null vectors the drive does not reach.
    """
    xi = np.ascontiguousarray(xi, dtype=float)
    n = n_left + n_right
    mask = np.asarray(mask, dtype=bool)
    k = len(xi)
    tp = np.empty(k)
    gain = np.empty(k)
    idx = np.arange(n)
    rates = np.where(idx[:, None] < idx[None, :], -gamma_left, -gamma_right)
    rhs = np.where(mask, 1j, 0.0).astype(complex)
    scale = abs(complex(diag).real)
    for s in range(0, k, chunk):
        pos = _layout(n_left, n_right, xi[s:s + chunk])
        m = rates * np.exp(1j * np.abs(pos[:, :, None] - pos[:, None, :]))
        m[:, idx, idx] = diag
        with np.errstate(all="ignore"):
            p, ratio = _solve_batch(m, np.broadcast_to(rhs, (len(m), n)).copy())
            pop = np.abs(p) ** 2
            tot = pop.sum(axis=1)
            tp[s:s + chunk] = (pop[:, n_left:].sum(axis=1) - pop[:, :n_left].sum(axis=1)) / tot
            g = np.maximum(np.abs(p).max(axis=1) * scale, ratio)
            gain[s:s + chunk] = np.where(np.isnan(g), np.inf, g)
    return tp, gain


def _solve_batch(a: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Partial-pivoting elimination over a stack of systems, mirroring the compiled solver.

    Overwrites ``a`` and ``x``; returns the solutions and the pivot ratios.
    """
    k, n = x.shape
    rows = np.arange(k)
    lo = np.full(k, np.inf)
    hi = np.zeros(k)
    for c in range(n):
        col = np.abs(a[:, c:, c])
        piv = c + np.argmax(col, axis=1)
        best = col[rows, piv - c]
        lo = np.minimum(lo, best)
        hi = np.maximum(hi, best)
        a[:, [c], :], a[rows, piv] = a[rows, piv][:, None, :], a[:, c, :].copy()
        x[:, c], x[rows, piv] = x[rows, piv], x[:, c].copy()
        f = a[:, c + 1:, c] / a[:, c, c][:, None]
        a[:, c + 1:, c + 1:] -= f[:, :, None] * a[:, c, None, c + 1:]
        x[:, c + 1:] -= f * x[:, c, None]
    for c in range(n - 1, -1, -1):
        x[:, c] = (x[:, c] - np.einsum("kj,kj->k", a[:, c, c + 1:], x[:, c + 1:])) / a[:, c, c]
    return x, hi / lo


def one_minus_exp(lam: np.ndarray, t: np.ndarray) -> np.ndarray:
    """``1 - exp(lam * t)`` without cancellation at small ``t``; shape (T, N)."""
    a = np.outer(t, lam.real)
    b = np.outer(t, lam.imag)
    re = -(np.expm1(a) * np.cos(b) - 2.0 * np.sin(0.5 * b) ** 2)
    im = -np.exp(a) * np.sin(b)
    return re + 1j * im


def infidelity_uniform(right_vecs, coef, lam, offset, unit_steady, t0, h, count):
    """Infidelity on the uniform grid ``t0 + i h``, ``i = 0..count``.

    ``p(t) = offset + V (coef * (1 - exp(lam t)))``; ``V`` may hold only the
    modes that have not yet decayed, with the rest folded into ``offset``.
    Returns ``1 - |<u|p(t)>|^2 / |p(t)|^2``, evaluated as ``|p - u <u|p>|^2 / |p|^2``
    so the result carries no cancellation noise when it is tiny.
    """
    times = t0 + h * np.arange(count + 1)
    b = coef[None, :] * one_minus_exp(lam, times)
    p = offset[None, :] + b @ right_vecs.T
    s = p @ unit_steady.conj()
    perp = (np.abs(p - s[:, None] * unit_steady[None, :]) ** 2).sum(axis=1)
    norm = (np.abs(p) ** 2).sum(axis=1)
    return perp / norm
