"""Compiled inner loops for the finite-volume operator and RKC stage updates.

The numpy implementation in ``solver.face_fluxes`` is the reference these
kernels are tested against.
"""

import numba
import numpy as np


@numba.njit(cache=True, inline="always")
def _mean(a, b, harmonic):
    if harmonic:
        return 2.0 * a * b / (a + b)
    return 0.5 * (a + b)


@numba.njit(cache=True)
def fv_rhs_1d(A, rho, u, coef, g, eps, h, upwind, harmonic, A0, lam, Bbar, reactions, out):
    n = A.shape[0]
    inv_h = 1.0 / h
    fa_prev = 0.0
    fr_prev = 0.0
    for i in range(n):
        if i < n - 1:
            du = (u[i + 1] - u[i]) * inv_h
            fa = eps * (_mean(coef[i], coef[i + 1], harmonic) * du)
            v = 2.0 * ((g[i + 1] - g[i]) * inv_h)
            if upwind:
                rf = rho[i] if v > 0 else rho[i + 1]
            else:
                rf = 0.5 * (rho[i] + rho[i + 1])
            fr = (rho[i + 1] - rho[i]) * inv_h - rf * v
        else:
            fa = 0.0
            fr = 0.0
        dA = (fa - fa_prev) * inv_h
        dr = (fr - fr_prev) * inv_h
        if reactions:
            dA = dA - A[i] + A0 + rho[i] * A[i]
            dr = dr - lam * rho[i] * A[i] + lam * Bbar
        out[0, i] = dA
        out[1, i] = dr
        fa_prev = fa
        fr_prev = fr


@numba.njit(cache=True)
def fv_rhs_2d(A, rho, u, coef, g, eps, h, upwind, harmonic, A0, lam, Bbar, reactions, out):
    n0, n1 = A.shape
    inv_h = 1.0 / h
    for i in range(n0):
        for j in range(n1):
            out[0, i, j] = 0.0
            out[1, i, j] = 0.0
    # x-faces (axis 0)
    for i in range(n0 - 1):
        for j in range(n1):
            du = (u[i + 1, j] - u[i, j]) * inv_h
            fa = eps * (_mean(coef[i, j], coef[i + 1, j], harmonic) * du)
            v = 2.0 * ((g[i + 1, j] - g[i, j]) * inv_h)
            if upwind:
                rf = rho[i, j] if v > 0 else rho[i + 1, j]
            else:
                rf = 0.5 * (rho[i, j] + rho[i + 1, j])
            fr = (rho[i + 1, j] - rho[i, j]) * inv_h - rf * v
            out[0, i, j] += fa * inv_h
            out[0, i + 1, j] -= fa * inv_h
            out[1, i, j] += fr * inv_h
            out[1, i + 1, j] -= fr * inv_h
    # y-faces (axis 1)
    for i in range(n0):
        for j in range(n1 - 1):
            du = (u[i, j + 1] - u[i, j]) * inv_h
            fa = eps * (_mean(coef[i, j], coef[i, j + 1], harmonic) * du)
            v = 2.0 * ((g[i, j + 1] - g[i, j]) * inv_h)
            if upwind:
                rf = rho[i, j] if v > 0 else rho[i, j + 1]
            else:
                rf = 0.5 * (rho[i, j] + rho[i, j + 1])
            fr = (rho[i, j + 1] - rho[i, j]) * inv_h - rf * v
            out[0, i, j] += fa * inv_h
            out[0, i, j + 1] -= fa * inv_h
            out[1, i, j] += fr * inv_h
            out[1, i, j + 1] -= fr * inv_h
    if reactions:
        for i in range(n0):
            for j in range(n1):
                a = A[i, j]
                r = rho[i, j]
                out[0, i, j] += -a + A0 + r * a
                out[1, i, j] += -lam * r * a + lam * Bbar


@numba.njit(cache=True)
def max_abs_face_diff(g, h):
    """2 * max |g_{i+1} - g_i| / h over all axes (peak chemotactic speed)."""
    best = 0.0
    flat = g.ndim == 1
    if flat:
        for i in range(g.shape[0] - 1):
            d = abs(g[i + 1] - g[i])
            if d > best:
                best = d
    return 2.0 * best / h


@numba.njit(cache=True)
def max_abs_face_diff_2d(g, h):
    best = 0.0
    n0, n1 = g.shape
    for i in range(n0):
        for j in range(n1):
            if i < n0 - 1:
                d = abs(g[i + 1, j] - g[i, j])
                if d > best:
                    best = d
            if j < n1 - 1:
                d = abs(g[i, j + 1] - g[i, j])
                if d > best:
                    best = d
    return 2.0 * best / h


@numba.njit(cache=True)
def rkc_combine(out, Y0, Ym1, Ym2, Fj, F0, c0, mu, nu, mdt, gdt):
    a = out.ravel()
    y0 = Y0.ravel()
    y1 = Ym1.ravel()
    y2 = Ym2.ravel()
    fj = Fj.ravel()
    f0 = F0.ravel()
    for i in range(a.shape[0]):
        a[i] = c0 * y0[i] + mu * y1[i] + nu * y2[i] + mdt * fj[i] + gdt * f0[i]


def warmup():
    """Trigger compilation (or cache load) of every kernel."""
    for shape in ((8,), (8, 8)):
        A = np.full(shape, 2.0)
        out = np.empty((2,) + shape)
        k = fv_rhs_1d if len(shape) == 1 else fv_rhs_2d
        for up in (False, True):
            for hm in (False, True):
                k(A, A, A, A, A, 0.1, 0.1, up, hm, 1.0, 0.1, 1.0, True, out)
    max_abs_face_diff(np.ones(8), 0.1)
    max_abs_face_diff_2d(np.ones((8, 8)), 0.1)
    Y = np.ones((2, 8))
    rkc_combine(np.empty_like(Y), Y, Y, Y, Y, Y, 1.0, 0.0, 0.0, 0.0, 0.0)
