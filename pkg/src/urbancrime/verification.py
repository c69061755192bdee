"""Manufactured solutions and grid-convergence studies for the solver.

The manufactured fields are

    A   = Abar   + amp * Psi(x) * exp(-t)
    rho = rhobar + amp * Psi(x) * exp(-t)

with Psi a product of cosines cos(k pi x / L) satisfying the Neumann
condition. The forcing that makes them exact is assembled in closed form from
the chain rule, so it shares no code with the finite-volume operator.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .kinetics import KineticsPack, ModelParams, Variant
from .solver import FieldPair, Integrator, Mesh, SolveConfig, Operator, _advance, _stack, _unstack


@functools.lru_cache(maxsize=32)
def _psi_factors(indices: tuple[int, ...], L: float, mesh: Mesh):
    c = mesh.coords()
    coords = (c,) if mesh.dim == 1 else c
    ks = [k * math.pi / L for k in indices]
    cos = [np.cos(k * x) for k, x in zip(ks, coords)]
    sin = [np.sin(k * x) for k, x in zip(ks, coords)]
    psi = np.prod(cos, axis=0)
    gsq = np.zeros_like(psi)
    for a in range(len(ks)):
        g = -ks[a] * sin[a]
        for b in range(len(ks)):
            if b != a:
                g = g * cos[b]
        gsq = gsq + g * g
    lap = -sum(k * k for k in ks) * psi
    return psi, gsq, lap


@dataclass(frozen=True)
class ManufacturedSolution:
    params: ModelParams
    kin: KineticsPack
    indices: tuple[int, ...]
    L: float
    amp: float = 0.1

    def _psi(self, mesh: Mesh):
        """Psi, |grad Psi|^2 and Laplacian Psi at the cell centres (cached per mesh)."""
        return _psi_factors(self.indices, self.L, mesh)

    def fields(self, t: float, mesh: Mesh) -> FieldPair:
        psi, _, _ = self._psi(mesh)
        e = self.amp * math.exp(-t)
        p = self.params
        return FieldPair(p.Abar + e * psi, p.rhobar + e * psi, t)

    def source(self, t: float, mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
        p, kin = self.params, self.kin
        psi, gsq, lap = self._psi(mesh)
        e = self.amp * math.exp(-t)
        A = p.Abar + e * psi
        rho = p.rhobar + e * psi
        grad2 = gsq * e * e  # |grad A|^2 = |grad rho|^2 = grad A . grad rho
        lapA = e * lap
        B = A - p.A0
        eta, eta1, eta2 = kin.eta(A), kin.eta1(A), kin.eta2(A)
        if p.variant is Variant.DEPARTURE:
            G1, G1p = eta + eta1 * B, 2.0 * eta1 + eta2 * B
        else:
            G1, G1p = eta - eta1 * B, -eta2 * B
        diffA = p.eps * (G1p * grad2 + G1 * lapA)
        g1, g2, _ = kin.log_f_derivatives(A)
        # div(grad rho - 2 rho g1(A) grad A)
        diffR = lapA - 2.0 * (g1 * grad2 + rho * g2 * grad2 + rho * g1 * lapA)
        dt_field = -e * psi
        lam = p.lambda0
        sA = dt_field - (diffA - A + p.A0 + rho * A)
        sr = dt_field - (diffR - lam * rho * A + lam * p.Bbar)
        return sA, sr


def mms_error(ms: ManufacturedSolution, mesh: Mesh, t_final: float = 0.5, integrator=Integrator.RK4) -> float:
    """L-infinity error in (A, rho) at t_final, integrating with CFL-limited steps."""
    cfg = SolveConfig(dt_init=1e-6, dt_max=1e-2, integrator=integrator, t_end=t_final)
    op = Operator(ms.params, ms.kin, mesh, cfg.advection_scheme, cfg.face_mean, True, ms.source)
    st = ms.fields(0.0, mesh)
    Y, t = _stack(st), 0.0
    while t < t_final - 1e-14:
        F0 = op(Y, t)
        Y, dt, _, _ = _advance(op, Y, t, F0, cfg, min(cfg.dt_max, t_final - t))
        t += dt
    exact = ms.fields(t_final, mesh)
    final = _unstack(Y, t)
    return float(max(np.max(np.abs(final.A - exact.A)), np.max(np.abs(final.rho - exact.rho))))


def observed_orders(errors: list[float], ns: list[int]) -> list[float]:
    """log2-type observed orders between consecutive refinements."""
    return [math.log(errors[i] / errors[i + 1]) / math.log(ns[i + 1] / ns[i]) for i in range(len(errors) - 1)]
