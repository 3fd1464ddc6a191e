# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels; numerically equivalent to ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, exp, expm1, fabs, sqrt, INFINITY, NAN
from libc.stdlib cimport malloc, free

cnp.import_array()

ctypedef double complex cplx


cdef inline double cabs2(cplx z) nogil:
    return z.real * z.real + z.imag * z.imag


cdef int solve_inplace(cplx* a, cplx* x, int n, double* pivot_ratio) nogil:
    """Gaussian elimination with partial pivoting; a is n x n row-major, x the RHS.

    ``pivot_ratio`` receives max|pivot| / min|pivot|, a cheap condition estimate.
    """
    cdef int i, j, k, piv
    cdef double best, v, lo = INFINITY, hi = 0.0
    cdef cplx tmp, f
    for k in range(n):
        piv = k
        best = cabs2(a[k * n + k])
        for i in range(k + 1, n):
            v = cabs2(a[i * n + k])
            if v > best:
                best = v
                piv = i
        if best == 0.0:
            pivot_ratio[0] = INFINITY
            return 1
        if best < lo:
            lo = best
        if best > hi:
            hi = best
        if piv != k:
            for j in range(k, n):
                tmp = a[k * n + j]
                a[k * n + j] = a[piv * n + j]
                a[piv * n + j] = tmp
            tmp = x[k]
            x[k] = x[piv]
            x[piv] = tmp
        for i in range(k + 1, n):
            f = a[i * n + k] / a[k * n + k]
            if f.real == 0.0 and f.imag == 0.0:
                continue
            for j in range(k + 1, n):
                a[i * n + j] = a[i * n + j] - f * a[k * n + j]
            x[i] = x[i] - f * x[k]
    for i in range(n - 1, -1, -1):
        tmp = x[i]
        for j in range(i + 1, n):
            tmp = tmp - a[i * n + j] * x[j]
        x[i] = tmp / a[i * n + i]
    pivot_ratio[0] = sqrt(hi / lo)
    return 0


def steady_transport_batch(int n_left, int n_right, xi, double gamma_left, double gamma_right,
                           diag, mask):
    """Steady-state transport parameter for a batch of spacing triples.

    Same contract as ``_pykernels.steady_transport_batch``.
    """
    cdef double[:, ::1] xv = np.ascontiguousarray(xi, dtype=np.float64)
    cdef cnp.uint8_t[::1] mv = np.ascontiguousarray(mask, dtype=np.uint8)
    cdef Py_ssize_t k = xv.shape[0]
    cdef int n = n_left + n_right
    out_tp = np.empty(k, dtype=np.float64)
    out_gain = np.empty(k, dtype=np.float64)
    cdef double[::1] tp = out_tp
    cdef double[::1] gain = out_gain
    cdef cplx d = diag
    cdef double scale = fabs(d.real)
    cdef cplx* a = <cplx*> malloc(n * n * sizeof(cplx))
    cdef cplx* x = <cplx*> malloc(n * sizeof(cplx))
    cdef cplx* z = <cplx*> malloc(n * sizeof(cplx))
    cdef double* pos = <double*> malloc(n * sizeof(double))
    cdef Py_ssize_t c
    cdef int mu, nu, status
    cdef double left, right, tot, pm, pmax, ratio
    if a == NULL or x == NULL or z == NULL or pos == NULL:
        free(a); free(x); free(z); free(pos)
        raise MemoryError()
    try:
        with nogil:
            for c in range(k):
                for mu in range(n_left):
                    pos[mu] = mu * xv[c, 0]
                for mu in range(n_right):
                    pos[n_left + mu] = (n_left - 1) * xv[c, 0] + xv[c, 1] + mu * xv[c, 2]
                for mu in range(n):
                    z[mu] = cos(pos[mu]) + 1j * sin(pos[mu])
                for mu in range(n):
                    for nu in range(n):
                        if mu < nu:
                            # positions are non-decreasing, so |x_mu - x_nu| = x_nu - x_mu
                            if pos[nu] >= pos[mu]:
                                a[mu * n + nu] = -gamma_left * z[nu] * z[mu].conjugate()
                            else:
                                a[mu * n + nu] = -gamma_left * z[mu] * z[nu].conjugate()
                        elif mu > nu:
                            if pos[mu] >= pos[nu]:
                                a[mu * n + nu] = -gamma_right * z[mu] * z[nu].conjugate()
                            else:
                                a[mu * n + nu] = -gamma_right * z[nu] * z[mu].conjugate()
                        else:
                            a[mu * n + nu] = d
                    x[mu] = 1j if mv[mu] else 0.0
                status = solve_inplace(a, x, n, &ratio)
                if status != 0:
                    tp[c] = NAN
                    gain[c] = INFINITY
                    continue
                left = 0.0
                right = 0.0
                pmax = 0.0
                for mu in range(n):
                    pm = cabs2(x[mu])
                    if pm > pmax:
                        pmax = pm
                    if mu < n_left:
                        left = left + pm
                    else:
                        right = right + pm
                tot = left + right
                tp[c] = (right - left) / tot
                gain[c] = max(sqrt(pmax) * scale, ratio)
    finally:
        free(a); free(x); free(z); free(pos)
    return out_tp, out_gain


def infidelity_uniform(right_vecs, coef, lam, offset, unit_steady, double t0, double h, Py_ssize_t count):
    """Infidelity on the uniform grid ``t0 + i h``, ``i = 0..count``.

    ``p(t) = offset + V (coef * (1 - exp(lam t)))``; ``V`` may hold only the
    modes that have not yet decayed, with the rest folded into ``offset``.
    Returns ``1 - |<u|p(t)>|^2 / |p(t)|^2``, evaluated as ``|p - u <u|p>|^2 / |p|^2``
    so the result carries no cancellation noise when it is tiny.
    """
    cdef cplx[:, ::1] v = np.ascontiguousarray(right_vecs, dtype=np.complex128)
    cdef cplx[::1] cf = np.ascontiguousarray(coef, dtype=np.complex128)
    cdef cplx[::1] lm = np.ascontiguousarray(lam, dtype=np.complex128)
    cdef cplx[::1] off = np.ascontiguousarray(offset, dtype=np.complex128)
    cdef cplx[::1] u = np.ascontiguousarray(unit_steady, dtype=np.complex128)
    cdef int n = v.shape[0]
    cdef int na = v.shape[1]
    result = np.empty(count + 1, dtype=np.float64)
    cdef double[::1] out = result
    cdef cplx* e = <cplx*> malloc((na + 1) * sizeof(cplx))
    cdef cplx* step = <cplx*> malloc((na + 1) * sizeof(cplx))
    cdef cplx* b = <cplx*> malloc((na + 1) * sizeof(cplx))
    cdef cplx* uv = <cplx*> malloc((na + 1) * sizeof(cplx))
    cdef cplx* pv = <cplx*> malloc(n * sizeof(cplx))
    cdef Py_ssize_t i
    cdef int mu, k
    cdef double t, ar, bi, norm, perp
    cdef cplx s, pm, g, uoff
    if e == NULL or step == NULL or b == NULL or uv == NULL or pv == NULL:
        free(e); free(step); free(b); free(uv); free(pv)
        raise MemoryError()
    try:
        with nogil:
            uoff = 0.0
            for mu in range(n):
                uoff = uoff + u[mu].conjugate() * off[mu]
            for k in range(na):
                g = 0.0
                for mu in range(n):
                    g = g + u[mu].conjugate() * v[mu, k]
                uv[k] = g
                ar = lm[k].real * h
                bi = lm[k].imag * h
                step[k] = exp(ar) * (cos(bi) + 1j * sin(bi))
            for i in range(count + 1):
                t = t0 + i * h
                for k in range(na):
                    ar = lm[k].real * t
                    bi = lm[k].imag * t
                    if i % 256 == 0 or fabs(ar) + fabs(bi) < 0.1:
                        # exact resync; the expm1 form avoids cancellation at small |lam t|
                        e[k] = exp(ar) * (cos(bi) + 1j * sin(bi))
                        b[k] = cf[k] * (-(expm1(ar) * cos(bi) - 2.0 * sin(0.5 * bi) * sin(0.5 * bi))
                                        - 1j * exp(ar) * sin(bi))
                    else:
                        e[k] = e[k] * step[k]
                        b[k] = cf[k] * (1.0 - e[k])
                s = uoff
                for k in range(na):
                    s = s + uv[k] * b[k]
                norm = 0.0
                for mu in range(n):
                    pm = off[mu]
                    for k in range(na):
                        pm = pm + v[mu, k] * b[k]
                    pv[mu] = pm
                    norm = norm + cabs2(pm)
                perp = 0.0
                for mu in range(n):
                    perp = perp + cabs2(pv[mu] - u[mu] * s)
                out[i] = perp / norm
    finally:
        free(e); free(step); free(b); free(uv); free(pv)
    return result
