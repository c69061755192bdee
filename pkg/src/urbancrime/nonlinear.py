"""Weakly nonlinear analysis of the bifurcating branches.

Near (Abar, rhobar, eps_bar_k) the steady branch is written as

    A   = Abar   + s Q Phi + s^2 psi1 + s^3 psi2 + ...
    rho = rhobar + s   Phi + s^2 phi1 + s^3 phi2 + ...
    eps = eps_bar + K1 s + K2 s^2 + ...

with (psi_i, phi_i) orthogonal to the null vector (Q Phi, Phi). Only a handful
of projections of the corrections are needed. They are

    X1 = int psi1 |grad Phi|^2   X2 = int phi1 |grad Phi|^2
    X3 = int psi1 Phi^2          X4 = int phi1 Phi^2
    Y1 = int psi2 Phi            Y2 = int phi2 Phi

Two routes give X1..X4:

* ``system``: a 4x4 linear system built from weak forms of the s^2 equations.
  Two of its rows use |grad Phi|^4 = sigma^2 Phi^4 pointwise-integrated and
  grad|grad Phi|^2 = -2 sigma Phi grad Phi, which only hold for modes varying
  along a single coordinate.
* ``harmonic``: Phi^2 is a finite sum of Neumann eigenfunctions, so the s^2
  equations decouple into one 2x2 system per harmonic. This is valid for every
  rectangle mode and is used for product modes (m, n >= 1).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateProjection, PreconditionError, ResonantK2
from .kinetics import KineticsPack, ModelParams
from .spectral import EigenMode, self_integrals
from .stability import BifurcationPoint, GrowthCoefficients, growth_coefficients

SOLVE_RTOL = 1e-12


class BranchType(str, enum.Enum):
    TRANSCRITICAL_SUB = "TranscriticalSub"
    TRANSCRITICAL_SUPER = "TranscriticalSuper"
    PITCHFORK_SUB = "PitchforkSub"
    PITCHFORK_SUPER = "PitchforkSuper"
    DEGENERATE = "Degenerate"


class Verdict(str, enum.Enum):
    STABLE = "Stable"
    STABLE_POSITIVE_S = "StableForPositiveS"
    STABLE_NEGATIVE_S = "StableForNegativeS"
    UNSTABLE = "Unstable"
    DEGENERATE = "Degenerate"


@dataclass
class BranchCoefficients:
    K1: float
    K2: Optional[float]
    first_order_integrals: tuple[float, float, float, float]
    second_order_integrals: tuple[float, float]
    projections: tuple[float, float]
    classification: BranchType
    stability: Optional[Verdict] = None
    method: str = "system"
    I4: float = 0.0
    residuals: dict[str, float] = field(default_factory=dict)
    condition_number: float = float("nan")


# ---------------------------------------------------------------------------- K1


def _first_order_parts(gc: GrowthCoefficients, eps_bar: float, sigma: float, Q: float):
    """Pieces of the s^2 projection problem (numerator N1 and denominator)."""
    a_k = 2.0 * gc.rhobar * gc.g1 * sigma - gc.lam * gc.rhobar
    b_k = sigma + gc.a
    den = a_k + b_k * Q
    N1 = gc.lam * Q - (gc.g1 + gc.rhobar * gc.g2 * Q) * Q * sigma
    return a_k, b_k, den, N1


def first_order_projections(
    point: BifurcationPoint, params: ModelParams, kin: KineticsPack, I3: Optional[float] = None
) -> tuple[float, float]:
    """(int psi1 Phi, int phi1 Phi) from the tested rho equation plus orthogonality."""
    gc = growth_coefficients(params, kin)
    I3 = self_integrals(point.mode).I3 if I3 is None else I3
    _, _, den, N1 = _first_order_parts(gc, point.eps_bar, point.sigma, point.Qk)
    if den == 0.0 or not math.isfinite(den):
        raise DegenerateProjection("zero denominator in the first-order projection")
    p1 = N1 * I3 / den
    return p1, -point.Qk * p1


def compute_K1(
    point: BifurcationPoint, params: ModelParams, kin: KineticsPack, mode: Optional[EigenMode] = None, I3: Optional[float] = None
) -> float:
    """Closed-form K1. ``I3`` overrides int Phi^3 (used to exercise the bracket)."""
    mode = point.mode if mode is None else mode
    gc = growth_coefficients(params, kin)
    I3 = self_integrals(mode).I3 if I3 is None else I3
    sigma, Q, eb = point.sigma, point.Qk, point.eps_bar
    _, _, den, N1 = _first_order_parts(gc, eb, sigma, Q)
    if den == 0.0 or not math.isfinite(den):
        raise DegenerateProjection("zero denominator in the first-order projection")
    bracket = (gc.rhobar - 1.0 - gc.G1 * eb * sigma - gc.Abar * Q) * N1 / den + (Q - 0.5 * gc.G2 * Q * Q * eb * sigma)
    return bracket * I3 / (gc.G1 * Q * sigma)


def compute_K1_termwise(
    point: BifurcationPoint, params: ModelParams, kin: KineticsPack, I3: float, Igrad_cubic: Optional[float] = None
) -> float:
    """K1 assembled term by term from the tested A equation (second evaluation path).

    ``Igrad_cubic`` is int Phi |grad Phi|^2; by default sigma/2 * I3.
    """
    gc = growth_coefficients(params, kin)
    sigma, Q, eb = point.sigma, point.Qk, point.eps_bar
    p1, q1 = first_order_projections(point, params, kin, I3)
    J = 0.5 * sigma * I3 if Igrad_cubic is None else Igrad_cubic
    rhs = (
        (gc.rhobar - 1.0 - gc.G1 * eb * sigma) * p1
        + gc.Abar * q1
        + gc.G2 * Q * Q * eb * J
        + (Q - gc.G2 * Q * Q * eb * sigma) * I3
    )
    return rhs / (gc.G1 * Q * sigma)


# ---------------------------------------------------------------------------- K2


def solvability_margin(params: ModelParams, kin: KineticsPack, sigma: float) -> float:
    """4 C sigma^2 - 5 a sigma - a^2; the 4x4 system is singular exactly when this vanishes."""
    gc = growth_coefficients(params, kin)
    return 4.0 * gc.C * sigma**2 - 5.0 * gc.a * sigma - gc.a**2


def assemble_system(gc: GrowthCoefficients, eps_bar: float, sigma: float, Q: float, I4: float):
    """The 4x4 matrix and right-hand side for (X1, X2, X3, X4)."""
    r, Ab, lam, s = gc.rhobar, gc.Abar, gc.lam, sigma
    D, G2, g1, g2 = gc.G1, gc.G2, gc.g1, gc.g2
    diag = r - 1.0 - 2.0 * D * eps_bar * s
    M = np.array(
        [
            [diag, Ab, 2.0 * D * eps_bar * s * s, 0.0],
            [lam * r - 4.0 * r * g1 * s, lam * Ab + 2.0 * s, 4.0 * r * g1 * s * s, -2.0 * s * s],
            [2.0 * D * eps_bar, 0.0, diag, Ab],
            [4.0 * r * g1, -2.0, lam * r - 4.0 * r * g1 * s, lam * Ab + 2.0 * s],
        ]
    )
    chem = 2.0 * g1 * Q + 2.0 * r * g2 * Q * Q
    b = I4 * np.array(
        [
            -(2.0 / 3.0 * G2 * Q * Q * eps_bar * s * s + Q * s / 3.0),
            -(2.0 / 3.0 * chem * s * s + lam * Q * s / 3.0),
            2.0 / 3.0 * G2 * Q * Q * eps_bar * s - Q,
            2.0 / 3.0 * chem * s - lam * Q,
        ]
    )
    return M, b


def _rel_residual(M: np.ndarray, x: np.ndarray, b: np.ndarray) -> float:
    scale = np.max(np.abs(M) @ np.abs(x) + np.abs(b))
    return float(np.max(np.abs(M @ x - b)) / scale) if scale > 0 else 0.0


def _first_order_by_system(gc, point: BifurcationPoint, I4: float):
    if not point.mode.is_one_dimensional:
        raise PreconditionError("the 4x4 route needs a mode varying along one coordinate")
    M, b = assemble_system(gc, point.eps_bar, point.sigma, point.Qk, I4)
    try:
        x = np.linalg.solve(M, b)
    except np.linalg.LinAlgError:
        x = None
    cond = float(np.linalg.cond(M))
    if x is None or not np.all(np.isfinite(x)) or cond > 1e14:
        raise ResonantK2(
            "4x4 system is singular: 4 C sigma^2 - 5 lambda0 Abar sigma - (lambda0 Abar)^2 = 0 "
            f"(condition number {cond:.3g})"
        )
    return tuple(float(v) for v in x), _rel_residual(M, x, b), cond


def _first_order_by_harmonics(gc, point: BifurcationPoint):
    s, Q, eb = point.sigma, point.Qk, point.eps_bar
    r, Ab, lam = gc.rhobar, gc.Abar, gc.lam
    X = np.zeros(4)
    worst, cond = 0.0, 0.0
    for h in point.mode.square_expansion():
        sj, c, w = h.sigma, h.coeff, h.weight
        M = np.array(
            [
                [-eb * gc.G1 * sj + r - 1.0, Ab],
                [2.0 * r * gc.g1 * sj - lam * r, -sj - gc.a],
            ]
        )
        rhs = c * np.array(
            [
                eb * 0.5 * gc.G2 * Q * Q * sj - Q,
                -(r * gc.g2 * Q * Q + gc.g1 * Q) * sj + lam * Q,
            ]
        )
        hc = float(np.linalg.cond(M))
        if not math.isfinite(hc) or hc > 1e14:
            raise ResonantK2(f"harmonic {h.index} of Phi^2 is resonant with the critical mode")
        ab = np.linalg.solve(M, rhs)
        worst = max(worst, _rel_residual(M, ab, rhs))
        cond = max(cond, hc)
        alpha, beta = ab
        X += np.array([alpha * c * (s - 0.5 * sj) * w, beta * c * (s - 0.5 * sj) * w, alpha * c * w, beta * c * w])
    return tuple(float(v) for v in X), worst, cond


def second_order_projections(gc: GrowthCoefficients, sigma: float, Q: float, X, I4: float):
    """Solve the tested s^3 rho equation together with orthogonality for (Y1, Y2)."""
    X1, X2, X3, X4 = X
    r, lam, s = gc.rhobar, gc.lam, sigma
    g1, g2, g3 = gc.g1, gc.g2, gc.g3
    a_k = 2.0 * r * g1 * s - lam * r
    b_k = s + gc.a
    R = (
        (lam - 2.0 * g1 * s - 2.0 * r * g2 * Q * s) * X3
        + lam * Q * X4
        + 2.0 * g1 * X1
        - 2.0 * g1 * Q * X2
        - (r * g3 * Q + 2.0 * g2) * Q * Q * s * I4 / 3.0
    )
    M = np.array([[a_k, -b_k], [Q, 1.0]])
    rhs = np.array([R, 0.0])
    y = np.linalg.solve(M, rhs)
    return (float(y[0]), float(y[1])), _rel_residual(M, y, rhs)


def compute_K2(
    point: BifurcationPoint,
    params: ModelParams,
    kin: KineticsPack,
    mode: Optional[EigenMode] = None,
    method: str = "auto",
) -> BranchCoefficients:
    """Branch coefficients for a pitchfork (K1 = 0) bifurcation.

    ``method`` is ``system``, ``harmonic`` or ``auto`` (system for modes that
    vary along one coordinate, harmonic otherwise).
    """
    if mode is not None and mode.index != point.mode.index:
        raise ValueError("mode does not match the bifurcation point")
    gc = growth_coefficients(params, kin)
    if not math.isfinite(point.Qk):
        raise DegenerateProjection("Q_k is undefined at this mode")
    K1 = compute_K1(point, params, kin)
    if abs(K1) > 1e-13:
        raise PreconditionError(f"K2 is only defined when K1 = 0 (got {K1:.3g})")
    p1, q1 = first_order_projections(point, params, kin)
    ints = self_integrals(point.mode)
    I4 = ints.I4
    if method == "auto":
        method = "system" if point.mode.is_one_dimensional else "harmonic"
    residuals: dict[str, float] = {}
    if method == "system":
        X, residuals["first_order"], cond = _first_order_by_system(gc, point, I4)
    elif method == "harmonic":
        X, residuals["first_order"], cond = _first_order_by_harmonics(gc, point)
    else:
        raise ValueError(f"unknown method {method!r}")
    Y, residuals["second_order"] = second_order_projections(gc, point.sigma, point.Qk, X, I4)
    Q, s, eb = point.Qk, point.sigma, point.eps_bar
    residuals["z_first"] = abs(Q * p1 + q1)
    residuals["z_second"] = abs(Q * Y[0] + Y[1]) / max(abs(Q * Y[0]), abs(Y[1]), 1e-300)
    X1, X2, X3, X4 = X
    num = (
        (gc.rhobar - 1.0 - gc.G1 * eb * s) * Y[0]
        + gc.Abar * Y[1]
        + (1.0 - gc.G2 * Q * eb * s) * X3
        + Q * X4
        - gc.G3 / 6.0 * Q**3 * eb * s * I4
    )
    K2 = num / (gc.G1 * Q * s)
    bc = BranchCoefficients(
        K1=0.0,
        K2=float(K2),
        first_order_integrals=X,
        second_order_integrals=Y,
        projections=(p1, q1),
        classification=_classify(0.0, K2),
        method=method,
        I4=I4,
        residuals=residuals,
        condition_number=cond,
    )
    return bc


def branch_coefficients(point: BifurcationPoint, params: ModelParams, kin: KineticsPack, I3: Optional[float] = None):
    """K1 always, K2 when K1 vanishes."""
    K1 = compute_K1(point, params, kin, I3=I3)
    if K1 == 0.0:
        return compute_K2(point, params, kin)
    p = first_order_projections(point, params, kin, I3)
    return BranchCoefficients(K1, None, (math.nan,) * 4, (math.nan,) * 2, p, _classify(K1, None))


# ---------------------------------------------------------------- classification


def _classify(K1: float, K2: Optional[float]) -> BranchType:
    if K1 != 0.0:
        # the stable half-branch always lies at eps < eps_bar; negative K1 puts it at s > 0
        return BranchType.TRANSCRITICAL_SUPER if K1 < 0 else BranchType.TRANSCRITICAL_SUB
    if K2 is None or K2 == 0.0:
        return BranchType.DEGENERATE
    return BranchType.PITCHFORK_SUPER if K2 < 0 else BranchType.PITCHFORK_SUB


def classify_branch(coeffs: BranchCoefficients, is_principal: bool) -> tuple[BranchType, Verdict]:
    """Branch type and stability verdict.

    Only the principal mode (maximal eps_bar) can carry a stable branch. On it,
    K1 < 0 gives stability for s > 0, K1 > 0 for s < 0, and when K1 = 0 the
    sign of K2 decides for both signs of s.
    """
    kind = _classify(coeffs.K1, coeffs.K2)
    if not is_principal:
        verdict = Verdict.UNSTABLE
    elif kind is BranchType.DEGENERATE:
        verdict = Verdict.DEGENERATE
    elif kind is BranchType.TRANSCRITICAL_SUPER:
        verdict = Verdict.STABLE_POSITIVE_S
    elif kind is BranchType.TRANSCRITICAL_SUB:
        verdict = Verdict.STABLE_NEGATIVE_S
    elif kind is BranchType.PITCHFORK_SUPER:
        verdict = Verdict.STABLE
    else:
        verdict = Verdict.UNSTABLE
    coeffs.classification = kind
    coeffs.stability = verdict
    return kind, verdict
