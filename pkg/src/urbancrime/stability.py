"""Linear stability of the homogeneous state and bifurcation values.

Both model variants are Laplacians of a nonlinear function of A,

    departure:  eps * Lap(eta(A) (A - A0))
    arrival:    eps * div(eta^2 grad((A - A0) / eta)) = eps * Lap(G(A)),  G' = eta - eta' B,

so linearising either one only needs the Taylor coefficients of G at Abar.
``GrowthCoefficients`` holds those coefficients together with the log-f
derivatives, and every formula downstream is written once in terms of them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import HypothesisViolated, NoPositiveBifurcation, ZeroModeExcluded
from .kinetics import KineticsPack, ModelParams, Variant
from .spectral import DomainKind, DomainSpec, EigenMode, Index, enumerate_modes, first_modes

TIE_RTOL = 1e-12
RESONANCE_RTOL = 1e-9
CUTOFF_FACTOR = 100.0


@dataclass(frozen=True)
class GrowthCoefficients:
    """Constants of the expansion around (Abar, rhobar).

    G1, G2, G3 are the first three derivatives of G at Abar (G1 is the
    effective diffusivity D). g1, g2, g3 are derivatives of log f at Abar.
    """

    Abar: float
    rhobar: float
    Bbar: float
    lam: float
    G1: float
    G2: float
    G3: float
    g1: float
    g2: float
    g3: float

    @property
    def C(self) -> float:
        """2 Bbar f'/f + rhobar - 1: the net aggregation strength."""
        return 2.0 * self.Bbar * self.g1 + self.rhobar - 1.0

    @property
    def a(self) -> float:
        """lambda0 * Abar."""
        return self.lam * self.Abar


def growth_coefficients(params: ModelParams, kin: KineticsPack) -> GrowthCoefficients:
    Abar, B = params.Abar, params.Bbar
    eta, e1, e2, e3 = (float(fn(Abar)) for fn in (kin.eta, kin.eta1, kin.eta2, kin.eta3))
    if params.variant is Variant.DEPARTURE:
        G1 = eta + e1 * B
        G2 = 2.0 * e1 + e2 * B
        G3 = 3.0 * e2 + e3 * B
    else:
        G1 = eta - e1 * B
        G2 = -e2 * B
        G3 = -(e2 + e3 * B)
    g1, g2, g3 = (float(v) for v in kin.log_f_derivatives(Abar))
    return GrowthCoefficients(Abar, params.rhobar, B, params.lambda0, G1, G2, G3, g1, g2, g3)


def diffusivities(params: ModelParams, kin: KineticsPack) -> tuple[float, float]:
    """(D_plus, D_minus) = eta(Abar) +/- eta'(Abar) Bbar."""
    eta, e1 = float(kin.eta(params.Abar)), float(kin.eta1(params.Abar))
    return eta + e1 * params.Bbar, eta - e1 * params.Bbar


def _checked(params: ModelParams, kin: KineticsPack) -> GrowthCoefficients:
    gc = growth_coefficients(params, kin)
    if params.variant is Variant.ARRIVAL and not gc.G1 > 0:
        raise HypothesisViolated(
            f"arrival model needs eta(Abar) > eta'(Abar) Bbar; got eta - eta' Bbar = {gc.G1:.6g}"
        )
    if params.variant is Variant.DEPARTURE and not gc.G1 > 0:
        raise HypothesisViolated(f"eta(Abar) + eta'(Abar) Bbar = {gc.G1:.6g} is not positive")
    return gc


def bifurcation_value(params: ModelParams, kin: KineticsPack, sigma):
    """eps_bar(sigma) = (C sigma - lambda0 Abar) / (D (sigma + lambda0 Abar) sigma).

    Accepts a scalar or an array of eigenvalues; negative results are returned as-is.
    """
    s = np.asarray(sigma, dtype=float)
    if np.any(s <= 0):
        raise ZeroModeExcluded("bifurcation values need sigma > 0")
    gc = _checked(params, kin)
    out = (gc.C * s - gc.a) / (gc.G1 * (s + gc.a) * s)
    return float(out) if out.ndim == 0 else out


def sigma_peak(params: ModelParams, kin: KineticsPack) -> Optional[float]:
    """Continuous maximiser of eps_bar(sigma), or None when C <= 0.

    Setting the derivative of (C s - a) / (s^2 + a s) to zero gives
    C s^2 - 2 a s - a^2 = 0, whose positive root is a (1 + sqrt(1 + C)) / C.
    """
    gc = growth_coefficients(params, kin)
    if gc.C <= 0:
        return None
    return gc.a * (1.0 + math.sqrt(1.0 + gc.C)) / gc.C


def null_vector_ratio(params: ModelParams, kin: KineticsPack, sigma: float) -> float:
    """Q_k = (sigma + lambda0 Abar) / (2 rhobar f'/f sigma - lambda0 rhobar)."""
    gc = growth_coefficients(params, kin)
    den = 2.0 * gc.rhobar * gc.g1 * sigma - gc.lam * gc.rhobar
    if den == 0.0:
        return math.inf
    return (sigma + gc.a) / den


@dataclass
class StabilityReport:
    """Characteristic data of the 2x2 matrix H_k at a given eps.

    ``trace`` and ``det`` are the coefficients of xi^2 + trace xi + det, i.e.
    minus the matrix trace and the matrix determinant. Since rhobar < 1 the
    trace is positive and the mode grows iff det < 0.
    """

    mode: Index
    sigma: float
    eps: float
    eps_bar: float
    trace: float
    det: float
    unstable: bool
    growth_rate: float
    matrix: np.ndarray = field(repr=False)


def linearization(params: ModelParams, kin: KineticsPack, sigma: float, eps: Optional[float] = None) -> np.ndarray:
    gc = growth_coefficients(params, kin)
    eps = params.eps if eps is None else eps
    return np.array(
        [
            [-eps * gc.G1 * sigma + gc.rhobar - 1.0, gc.Abar],
            [2.0 * gc.rhobar * gc.g1 * sigma - gc.lam * gc.rhobar, -sigma - gc.a],
        ]
    )


def stability_report(params: ModelParams, kin: KineticsPack, mode: EigenMode, eps: Optional[float] = None) -> StabilityReport:
    eps = params.eps if eps is None else eps
    sigma = mode.sigma
    H = linearization(params, kin, sigma, eps)
    tr = -float(np.trace(H))
    det = float(np.linalg.det(H))
    ev = np.linalg.eigvals(H)
    return StabilityReport(
        mode.index, sigma, eps, bifurcation_value(params, kin, sigma), tr, det, det < 0, float(np.max(ev.real)), H
    )


# ------------------------------------------------------------------ mode scans

def candidate_modes(
    params: ModelParams, kin: KineticsPack, domain: DomainSpec, mode_cutoff: Optional[int] = None
) -> list[EigenMode]:
    """Modes to scan for the maximal bifurcation value.

    An explicit ``mode_cutoff`` takes the first that many modes. Otherwise the
    scan runs to 100 sigma_peak and is extended until the tail bound
    eps_bar(sigma) < C / (D sigma) sits below the best value found.
    """
    if mode_cutoff is not None:
        if mode_cutoff < 1:
            raise ValueError("mode_cutoff must be >= 1")
        return first_modes(domain, int(mode_cutoff))
    gc = _checked(params, kin)
    peak = sigma_peak(params, kin)
    if peak is None:
        return first_modes(domain, 16)
    sigma_max = max(CUTOFF_FACTOR * peak, (math.pi / domain.L) ** 2 * (2 if domain.dim == 2 else 1))
    while True:
        modes = enumerate_modes(domain, sigma_max)
        best = max(bifurcation_value(params, kin, np.array([m.sigma for m in modes])))
        if gc.C / (gc.G1 * sigma_max) < best or best <= 0:
            return modes
        sigma_max *= 2.0


def bifurcation_table(
    params: ModelParams, kin: KineticsPack, domain: DomainSpec, mode_cutoff: Optional[int] = None
) -> list[tuple[EigenMode, float]]:
    modes = candidate_modes(params, kin, domain, mode_cutoff)
    vals = bifurcation_value(params, kin, np.array([m.sigma for m in modes]))
    return list(zip(modes, (float(v) for v in np.atleast_1d(vals))))


def select_wavemode(
    params: ModelParams, kin: KineticsPack, domain: DomainSpec, mode_cutoff: Optional[int] = None
) -> tuple[list[EigenMode], float]:
    """All modes attaining max eps_bar (relative tie tolerance 1e-12) and that maximum."""
    table = bifurcation_table(params, kin, domain, mode_cutoff)
    best = max(v for _, v in table)
    if best <= 0:
        raise NoPositiveBifurcation(f"all bifurcation values are non-positive (max {best:.6g})")
    winners = [m for m, v in table if abs(v - best) <= TIE_RTOL * abs(best)]
    return winners, best


def is_homogeneous_unstable(
    params: ModelParams, kin: KineticsPack, domain: DomainSpec, mode_cutoff: Optional[int] = None
) -> tuple[bool, Optional[EigenMode]]:
    """True (with the maximising mode as witness) iff eps < max_k eps_bar_k."""
    table = bifurcation_table(params, kin, domain, mode_cutoff)
    mode, best = max(table, key=lambda mv: mv[1])
    if params.eps < best:
        return True, mode
    return False, None


# ------------------------------------------------------- bifurcation hypotheses

@dataclass
class BifurcationPoint:
    mode: EigenMode
    sigma: float
    eps_bar: float
    Qk: float
    conditions: dict[str, bool]
    details: dict[str, str] = field(default_factory=dict)
    extra: dict[str, bool] = field(default_factory=dict)

    @property
    def applicable(self) -> bool:
        return all(self.conditions.values())

    def failed(self) -> list[str]:
        return [k for k, ok in self.conditions.items() if not ok]


def resonant_sigma(params: ModelParams, kin: KineticsPack, sigma_k: float) -> Optional[float]:
    """The only eigenvalue sigma_j that can violate non-resonance with mode k.

    C s_k s_j = a (s_k + s_j + a) is linear in s_j; it has the positive root
    a (s_k + a) / (C s_k - a) when C s_k > a and no positive root otherwise.
    """
    gc = growth_coefficients(params, kin)
    den = gc.C * sigma_k - gc.a
    if den <= 0:
        return None
    return gc.a * (sigma_k + gc.a) / den


def modes_at_sigma(domain: DomainSpec, sigma: float, rtol: float = RESONANCE_RTOL) -> list[Index]:
    """All nonzero mode indices whose eigenvalue matches sigma to relative tolerance."""
    scaled = sigma * (domain.L / math.pi) ** 2  # k^2 or m^2 + n^2
    if domain.kind is DomainKind.INTERVAL:
        k = int(round(math.sqrt(scaled)))
        if k >= 1 and abs(k * k - scaled) <= rtol * scaled:
            return [k]
        return []
    N = int(round(scaled))
    if N < 1 or abs(N - scaled) > rtol * scaled:
        return []
    hits = []
    for m in range(int(math.isqrt(N)) + 1):
        n2 = N - m * m
        n = math.isqrt(n2)
        if n * n == n2:
            hits.append((m, n))
    return hits


def check_bifurcation_conditions(
    params: ModelParams, kin: KineticsPack, mode: EigenMode, mode_cutoff: Optional[int] = None
) -> BifurcationPoint:
    gc = _checked(params, kin)
    domain = mode.domain
    sigma = mode.sigma
    eps_bar = bifurcation_value(params, kin, sigma)
    conditions: dict[str, bool] = {}
    details: dict[str, str] = {}

    qden = 2.0 * gc.rhobar * gc.g1 * sigma - gc.lam * gc.rhobar
    conditions["Qk_denominator_nonzero"] = abs(qden) > 1e-12 * (2.0 * gc.rhobar * abs(gc.g1) * sigma + gc.lam * gc.rhobar)
    if not conditions["Qk_denominator_nonzero"]:
        details["Qk_denominator_nonzero"] = f"sigma_k = {sigma:.12g} equals lambda0 f/(2 f') at Abar"
    Qk = (sigma + gc.a) / qden if qden != 0 else math.inf

    lhs = (gc.a + (1.0 - gc.rhobar) * sigma) / (2.0 * sigma * gc.Bbar)
    conditions["eps_positive"] = eps_bar > 0 and lhs < gc.g1
    if not conditions["eps_positive"]:
        details["eps_positive"] = f"eps_bar = {eps_bar:.6g}; (lambda0 Abar + (1 - rhobar) sigma)/(2 sigma Bbar) = {lhs:.6g} vs f'/f = {gc.g1:.6g}"

    star = resonant_sigma(params, kin, sigma)
    clash = [] if star is None else [j for j in modes_at_sigma(domain, star) if j != mode.index]
    conditions["non_resonant"] = not clash
    if clash:
        details["non_resonant"] = f"mode(s) {clash} sit at the resonant eigenvalue {star:.12g}"

    others = [m for m in candidate_modes(params, kin, domain, mode_cutoff) if m.index != mode.index]
    same = [m.index for m in others if abs(bifurcation_value(params, kin, m.sigma) - eps_bar) <= TIE_RTOL * abs(eps_bar)]
    conditions["eps_distinct"] = not same
    if same:
        details["eps_distinct"] = f"eps_bar also attained by {same}"

    degenerate = [j for j in modes_at_sigma(domain, sigma) if j != mode.index]
    extra = {"simple_eigenvalue": not degenerate}
    return BifurcationPoint(mode, sigma, eps_bar, Qk, conditions, details, extra)


def degenerate_sigma_for_Q(params: ModelParams, kin: KineticsPack) -> float:
    """The eigenvalue lambda0 f(Abar) / (2 f'(Abar)) at which Q_k is undefined."""
    gc = growth_coefficients(params, kin)
    return gc.lam / (2.0 * gc.g1)


def mode_indices(modes: Sequence[EigenMode]) -> list[Index]:
    return [m.index for m in modes]
