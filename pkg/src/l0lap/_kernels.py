"""Compiled inner loops for the solver."""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def threshold_into(z, rho, out):
    """Write the thresholded, normalized ``z`` into ``out``.

    Returns the number of kept entries (0 leaves ``out`` all zero).
    """
    n = z.size
    a = np.abs(z)
    order = np.argsort(-a, kind="mergesort")
    out[:] = 0.0
    # walk ranks; mass = squared norm of entries strictly above the next value
    mass = 0.0
    run_mass = 0.0
    thr = 0.0
    for r in range(n):
        cur = a[order[r]]
        nxt = a[order[r + 1]] if r + 1 < n else 0.0
        run_mass += cur * cur
        if nxt < cur:
            mass = run_mass
        if nxt <= math.sqrt(rho * rho + 2.0 * rho * math.sqrt(mass)):
            thr = nxt
            break
    if mass == 0.0:
        return 0
    nrm = math.sqrt(mass)
    kept = 0
    for i in range(n):
        if a[i] > thr:
            out[i] = z[i] / nrm
            kept += 1
    return kept


@njit(cache=True)
def _apply(indptr, indices, qdata, x, shift, out):
    n = x.size
    for i in range(n):
        acc = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            acc += qdata[p] * x[indices[p]]
        out[i] = acc + shift * x[i]


@njit(cache=True)
def _reproject(deg, x, out):
    v = 0.0
    for i in range(x.size):
        if x[i] != 0.0:
            v += deg[i]
    out[:] = 0.0
    if v == 0.0:
        return False
    for i in range(x.size):
        if x[i] != 0.0:
            out[i] = math.sqrt(deg[i] / v)
    return True


@njit(cache=True)
def iterate(indptr, indices, qdata, deg, v0, lam, lam1, rho, eps, max_iter):
    """Alternating thresholded updates; returns ``(u, v, iterations, status)``.

    status: 1 converged, 0 hit ``max_iter``, -1 an update came out empty.
    """
    n = v0.size
    v = v0.copy()
    u = np.zeros(n)
    z = np.empty(n)
    u_d = np.empty(n)
    v_d = np.empty(n)
    if not _reproject(deg, v, u_d):
        return u, v, 0, -1
    v_d[:] = u_d
    shift = 2.0 * lam
    for k in range(1, max_iter + 1):
        _apply(indptr, indices, qdata, v, shift, z)
        for i in range(n):
            if deg[i] == 0.0:
                z[i] = 0.0
            elif lam1 != 0.0:
                z[i] += 2.0 * lam1 * u_d[i]
        if rho == 0.0:
            nz = 0.0
            for i in range(n):
                nz += z[i] * z[i]
            if nz == 0.0:
                return u, v, k, -1
            u[:] = z / math.sqrt(nz)
        elif threshold_into(z, rho, u) == 0:
            return u, v, k, -1
        _apply(indptr, indices, qdata, u, shift, z)
        for i in range(n):
            if deg[i] == 0.0:
                z[i] = 0.0
            elif lam1 != 0.0:
                z[i] += 2.0 * lam1 * v_d[i]
        if rho == 0.0:
            nz = 0.0
            for i in range(n):
                nz += z[i] * z[i]
            if nz == 0.0:
                return u, v, k, -1
            v[:] = z / math.sqrt(nz)
        elif threshold_into(z, rho, v) == 0:
            return u, v, k, -1
        diff = 0.0
        for i in range(n):
            diff += (u[i] - v[i]) ** 2
        if math.sqrt(diff) < eps:
            return u, v, k, 1
        if lam1 != 0.0:
            _reproject(deg, u, u_d)
            _reproject(deg, v, v_d)
    return u, v, max_iter, 0
