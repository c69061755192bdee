"""Model parameters, nonlinear function packs and the homogeneous steady state."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import NotFound

Scalar = Callable[[float], float]


class Variant(str, enum.Enum):
    """Which site's eta governs attractiveness transfer."""

    DEPARTURE = "departure"
    ARRIVAL = "arrival"

    @classmethod
    def parse(cls, value: "str | Variant") -> "Variant":
        if isinstance(value, Variant):
            return value
        v = str(value).strip().lower()
        aliases = {"12": cls.DEPARTURE, "13": cls.ARRIVAL, "dep": cls.DEPARTURE, "arr": cls.ARRIVAL}
        if v in aliases:
            return aliases[v]
        return cls(v)


@dataclass(frozen=True)
class KineticsPack:
    """Diffusion heterogeneity eta(A) and perception f(A), with derivatives to third order.

    All callables must be pure and accept numpy arrays as well as floats.
    """

    name: str
    eta: Scalar
    eta1: Scalar
    eta2: Scalar
    eta3: Scalar
    f: Scalar
    f1: Scalar
    f2: Scalar
    f3: Scalar

    def log_f_derivatives(self, A: float) -> tuple[float, float, float]:
        """Derivatives 1..3 of g = log f at A."""
        f, f1, f2, f3 = self.f(A), self.f1(A), self.f2(A), self.f3(A)
        r1 = f1 / f
        r2 = f2 / f
        r3 = f3 / f
        return r1, r2 - r1**2, r3 - 3.0 * r1 * r2 + 2.0 * r1**3


@dataclass(frozen=True)
class ModelParams:
    A0: float
    Bbar: float
    lambda0: float
    eps: float
    variant: Variant = Variant.DEPARTURE

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant.parse(self.variant))
        if not self.A0 > 0:
            raise ValueError(f"A0 must be positive, got {self.A0}")
        if not self.Bbar > 0:
            raise ValueError(f"Bbar must be positive, got {self.Bbar}")
        if not 0 < self.lambda0 <= 1:
            raise ValueError(f"lambda0 must lie in (0, 1], got {self.lambda0}")
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")

    @property
    def Abar(self) -> float:
        return self.A0 + self.Bbar

    @property
    def rhobar(self) -> float:
        return self.Bbar / (self.A0 + self.Bbar)

    def with_eps(self, eps: float) -> "ModelParams":
        return ModelParams(self.A0, self.Bbar, self.lambda0, eps, self.variant)

    def with_variant(self, variant) -> "ModelParams":
        return ModelParams(self.A0, self.Bbar, self.lambda0, self.eps, Variant.parse(variant))


def homogeneous_state(params: ModelParams) -> tuple[float, float]:
    """Return (Abar, rhobar) = (A0 + Bbar, Bbar / (A0 + Bbar))."""
    return params.Abar, params.rhobar


def _paper_default() -> KineticsPack:
    return KineticsPack(
        name="paper-default",
        eta=lambda A: 1.0 - np.exp(-A),
        eta1=lambda A: np.exp(-A),
        eta2=lambda A: -np.exp(-A),
        eta3=lambda A: np.exp(-A),
        f=lambda A: np.log1p(A),
        f1=lambda A: 1.0 / (1.0 + A),
        f2=lambda A: -1.0 / (1.0 + A) ** 2,
        f3=lambda A: 2.0 / (1.0 + A) ** 3,
    )


def _const(c):
    def fn(A):
        return float(c) if np.isscalar(A) else np.full(np.shape(A), float(c))

    return fn


def _constant_eta_linear_f() -> KineticsPack:
    return KineticsPack(
        name="constant-eta-linear-f",
        eta=_const(1.0),
        eta1=_const(0.0),
        eta2=_const(0.0),
        eta3=_const(0.0),
        f=lambda A: A,
        f1=_const(1.0),
        f2=_const(0.0),
        f3=_const(0.0),
    )


_BUILTINS: dict[str, Callable[[], KineticsPack]] = {
    "paper-default": _paper_default,
    "constant-eta-linear-f": _constant_eta_linear_f,
}


def builtin_kinetics(name: str) -> KineticsPack:
    try:
        return _BUILTINS[name]()
    except KeyError:
        raise NotFound(f"unknown kinetics pack {name!r}; known: {sorted(_BUILTINS)}") from None


def builtin_names() -> list[str]:
    return sorted(_BUILTINS)


@dataclass
class CheckResult:
    passed: bool
    first_violation: float | None = None
    detail: str = ""


@dataclass
class KineticsReport:
    pack: str
    range: tuple[float, float]
    samples: int
    checks: dict[str, CheckResult] = field(default_factory=dict)
    informational: dict[str, CheckResult] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def failed(self) -> list[str]:
        return [k for k, c in self.checks.items() if not c.passed]


def _first_violation(A: np.ndarray, ok: np.ndarray, detail: str) -> CheckResult:
    bad = np.flatnonzero(~ok)
    if bad.size == 0:
        return CheckResult(True)
    return CheckResult(False, float(A[bad[0]]), detail)


def validate_kinetics(
    pack: KineticsPack,
    range: tuple[float, float] = (1e-3, 10.0),
    samples: int = 200,
    fd_step: float = 1e-5,
    fd_rtol: float = 1e-6,
) -> KineticsReport:
    """Check the standing assumptions on a sampled range; failures are reported, not raised.

    Monotonicity of eta is checked as eta' >= 0 so that the constant-eta limit
    (the original Short model) passes. Derivative consistency compares each
    derivative with a central difference of the function one order below,
    relative to max(|derivative|, 1).
    """
    lo, hi = float(range[0]), float(range[1])
    if not (0 < lo < hi) or samples < 2:
        raise ValueError("range must lie in (0, inf) with lo < hi, samples >= 2")
    A = np.linspace(lo, hi, int(samples))
    ev = lambda fn, x: np.broadcast_to(np.asarray(fn(x), dtype=float), np.shape(x))  # noqa: E731

    eta, eta1 = ev(pack.eta, A), ev(pack.eta1, A)
    f, f1 = ev(pack.f, A), ev(pack.f1, A)
    rep = KineticsReport(pack.name, (lo, hi), int(samples))
    rep.checks["eta_positive"] = _first_violation(A, eta > 0, "eta(A) <= 0")
    rep.checks["eta_nondecreasing"] = _first_violation(A, eta1 >= 0, "eta'(A) < 0")
    rep.checks["eta_ge_eta1_A"] = _first_violation(A, eta >= eta1 * A - 1e-14, "eta(A) < eta'(A) A")
    rep.checks["f_positive"] = _first_violation(A, f > 0, "f(A) <= 0")
    rep.checks["f_nondecreasing"] = _first_violation(A, f1 >= 0, "f'(A) < 0")

    h = fd_step
    chains = {
        "eta1": (pack.eta, pack.eta1),
        "eta2": (pack.eta1, pack.eta2),
        "eta3": (pack.eta2, pack.eta3),
        "f1": (pack.f, pack.f1),
        "f2": (pack.f1, pack.f2),
        "f3": (pack.f2, pack.f3),
    }
    ok = np.ones_like(A, dtype=bool)
    worst = ""
    for label, (lower, upper) in chains.items():
        fd = (ev(lower, A + h) - ev(lower, A - h)) / (2 * h)
        d = ev(upper, A)
        good = np.abs(fd - d) <= fd_rtol * np.maximum(np.abs(d), 1.0)
        if not good.all() and not worst:
            worst = f"{label} disagrees with finite difference"
        ok &= good
    rep.checks["derivative_consistency"] = _first_violation(A, ok, worst)
    rep.informational["f_le_A"] = _first_violation(A, f <= A, "f(A) > A")
    return rep


def default_validation_range(params: ModelParams) -> tuple[float, float]:
    return 1e-3, 10.0 * params.Abar


def reaction_residual(params: ModelParams, A: float, rho: float) -> tuple[float, float]:
    """Reaction terms of both models at a spatially constant state."""
    lam = params.lambda0
    return -A + params.A0 + rho * A, -lam * rho * A + lam * params.Bbar

