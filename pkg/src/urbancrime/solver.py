"""Cell-centred finite-volume method of lines for the two crime models.

Both attractiveness fluxes are written in conservative face form on a uniform
mesh; boundary faces carry exactly zero flux (homogeneous Neumann). Time
stepping is explicit: classical RK4, or a second-order Runge-Kutta-Chebyshev
scheme whose stage count grows with the stiffness so long relaxation runs stay
cheap.
"""

from __future__ import annotations

import enum
import logging
import math
import time as _time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .errors import NumericalBlowup
from .kinetics import KineticsPack, ModelParams, Variant
from .spectral import DomainKind, DomainSpec

log = logging.getLogger(__name__)


class AdvectionScheme(str, enum.Enum):
    CENTRAL = "central"
    UPWIND = "upwind"


class Integrator(str, enum.Enum):
    RK4 = "rk4"
    RKC = "rkc"


class FaceMean(str, enum.Enum):
    ARITHMETIC = "arithmetic"
    HARMONIC = "harmonic"


class Outcome(str, enum.Enum):
    STEADY_STATE = "SteadyState"
    T_END_REACHED = "TEndReached"
    BLOWUP = "Blowup"


@dataclass(frozen=True)
class Mesh:
    domain: DomainSpec
    n: int

    def __post_init__(self):
        if self.n < 8:
            raise ValueError(f"need at least 8 cells per side, got {self.n}")

    @property
    def h(self) -> float:
        return self.domain.L / self.n

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.n) + 0.5) * self.h

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    def coords(self):
        """Cell-centre coordinates: x for intervals, (X, Y) with ij indexing for squares."""
        if self.dim == 1:
            return self.x
        return tuple(np.meshgrid(self.x, self.x, indexing="ij"))

    def integrate(self, field: np.ndarray) -> float:
        """Midpoint-rule integral over the domain."""
        return float(np.sum(field) * self.cell_volume)


@dataclass
class FieldPair:
    A: np.ndarray
    rho: np.ndarray
    t: float = 0.0

    def copy(self) -> "FieldPair":
        return FieldPair(self.A.copy(), self.rho.copy(), self.t)

    def is_admissible(self) -> bool:
        return bool(
            np.all(np.isfinite(self.A))
            and np.all(np.isfinite(self.rho))
            and np.all(self.A > 0)
            and np.all(self.rho >= 0)
        )

    def sup_norm(self) -> float:
        return float(max(np.max(np.abs(self.A)), np.max(np.abs(self.rho))))


@dataclass(frozen=True)
class SolveConfig:
    dt_init: float = 1e-3
    dt_min: float = 1e-10
    dt_max: float = 0.05
    safety: float = 0.8
    t_end: float = 1000.0
    ss_tol: float = 1e-9
    snapshot_every: float = 10.0
    advection_scheme: AdvectionScheme = AdvectionScheme.CENTRAL
    integrator: Integrator = Integrator.RKC
    face_mean: FaceMean = FaceMean.ARITHMETIC
    max_steps: int = 50_000_000

    def __post_init__(self):
        object.__setattr__(self, "advection_scheme", AdvectionScheme(self.advection_scheme))
        object.__setattr__(self, "integrator", Integrator(self.integrator))
        object.__setattr__(self, "face_mean", FaceMean(self.face_mean))
        if not 0 < self.dt_min <= self.dt_init <= self.dt_max:
            raise ValueError("need 0 < dt_min <= dt_init <= dt_max")
        if not 0 < self.safety <= 1:
            raise ValueError("safety must lie in (0, 1]")
        if not self.ss_tol > 0:
            raise ValueError("ss_tol must be positive")
        if not self.t_end > 0 or not self.snapshot_every > 0:
            raise ValueError("t_end and snapshot_every must be positive")


def homogeneous_fields(params: ModelParams, mesh: Mesh) -> FieldPair:
    return FieldPair(np.full(mesh.shape, params.Abar), np.full(mesh.shape, params.rhobar), 0.0)


# ---------------------------------------------------------------- spatial operator

def _lo(u, axis):
    return u[(slice(None),) * axis + (slice(None, -1),)]


def _hi(u, axis):
    return u[(slice(None),) * axis + (slice(1, None),)]


def _face_diff(u, axis, h):
    return (_hi(u, axis) - _lo(u, axis)) / h


def _face_mean(u, axis, kind=FaceMean.ARITHMETIC):
    a, b = _lo(u, axis), _hi(u, axis)
    if FaceMean(kind) is FaceMean.HARMONIC:
        return 2.0 * a * b / (a + b)
    return 0.5 * (a + b)


def _divergence(face_flux, axis, h):
    """Divergence from interior-face fluxes; the two boundary faces carry zero flux."""
    pad = [(0, 0)] * face_flux.ndim
    pad[axis] = (1, 1)
    full = np.pad(face_flux, pad)
    return (_hi(full, axis) - _lo(full, axis)) / h


@dataclass
class Fluxes:
    """Interior-face fluxes per axis for the A and rho equations."""

    A: list[np.ndarray]
    rho: list[np.ndarray]
    velocity: list[np.ndarray]


def face_fluxes(
    state: FieldPair,
    params: ModelParams,
    kin: KineticsPack,
    mesh: Mesh,
    scheme: AdvectionScheme = AdvectionScheme.CENTRAL,
    face_mean: FaceMean = FaceMean.ARITHMETIC,
) -> Fluxes:
    A, rho, h, eps = state.A, state.rho, mesh.h, params.eps
    B = A - params.A0
    eta = kin.eta(A)
    if params.variant is Variant.DEPARTURE:
        u = eta * B
        coef = None
    else:
        u = B / eta
        coef = eta * eta
    g = np.log(kin.f(A))
    fa, fr, vel = [], [], []
    for axis in range(A.ndim):
        du = _face_diff(u, axis, h)
        fa.append(eps * du if coef is None else eps * _face_mean(coef, axis, face_mean) * du)
        v = 2.0 * _face_diff(g, axis, h)
        if AdvectionScheme(scheme) is AdvectionScheme.UPWIND:
            rface = np.where(v > 0, _lo(rho, axis), _hi(rho, axis))
        else:
            rface = _face_mean(rho, axis)
        fr.append(_face_diff(rho, axis, h) - rface * v)
        vel.append(v)
    return Fluxes(fa, fr, vel)


def flux_divergence(fluxes: Fluxes, mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    dA = sum(_divergence(F, ax, mesh.h) for ax, F in enumerate(fluxes.A))
    dr = sum(_divergence(F, ax, mesh.h) for ax, F in enumerate(fluxes.rho))
    return dA, dr


Source = Callable[[float, Mesh], tuple[np.ndarray, np.ndarray]]


def rhs_reference(
    state: FieldPair,
    params: ModelParams,
    kin: KineticsPack,
    mesh: Mesh,
    scheme: AdvectionScheme = AdvectionScheme.CENTRAL,
    face_mean: FaceMean = FaceMean.ARITHMETIC,
    reactions: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Pure-numpy evaluation of the semi-discrete operator (slow; used as a cross-check)."""
    dA, dr = flux_divergence(face_fluxes(state, params, kin, mesh, scheme, face_mean), mesh)
    if reactions:
        A, rho, lam = state.A, state.rho, params.lambda0
        dA = dA - A + params.A0 + rho * A
        dr = dr - lam * rho * A + lam * params.Bbar
    return dA, dr


class Operator:
    """The semi-discrete right-hand side acting on stacked arrays Y = [A, rho].

    ``reactions`` and ``source`` are verification hooks: the former switches
    the pointwise kinetics off, the latter adds a manufactured forcing.
    """

    def __init__(
        self,
        params: ModelParams,
        kin: KineticsPack,
        mesh: Mesh,
        scheme: AdvectionScheme = AdvectionScheme.CENTRAL,
        face_mean: FaceMean = FaceMean.ARITHMETIC,
        reactions: bool = True,
        source: Optional[Source] = None,
    ):
        self.params, self.kin, self.mesh = params, kin, mesh
        self.upwind = AdvectionScheme(scheme) is AdvectionScheme.UPWIND
        self.harmonic = FaceMean(face_mean) is FaceMean.HARMONIC
        self.reactions = bool(reactions)
        self.source = source
        self._kernel = _kernels.fv_rhs_1d if mesh.dim == 1 else _kernels.fv_rhs_2d
        self._speed = _kernels.max_abs_face_diff if mesh.dim == 1 else _kernels.max_abs_face_diff_2d
        self._ones = np.ones(mesh.shape)
        self.evals = 0

    def _prepare(self, A):
        p, kin = self.params, self.kin
        eta = kin.eta(A) * self._ones
        B = A - p.A0
        if p.variant is Variant.DEPARTURE:
            return eta * B, self._ones, eta
        return B / eta, eta * eta, eta

    def __call__(self, Y: np.ndarray, t: float = 0.0) -> np.ndarray:
        if not np.all(np.isfinite(Y)):
            raise NumericalBlowup("non-finite input to rhs", FieldPair(Y[0].copy(), Y[1].copy(), t))
        p = self.params
        A, rho = Y[0], Y[1]
        u, coef, _ = self._prepare(A)
        g = np.log(self.kin.f(A) * self._ones)
        out = np.empty_like(Y)
        self._kernel(A, rho, u, coef, g, p.eps, self.mesh.h, self.upwind, self.harmonic,
                     p.A0, p.lambda0, p.Bbar, self.reactions, out)
        if self.source is not None:
            sA, sr = self.source(t, self.mesh)
            out[0] += sA
            out[1] += sr
        self.evals += 1
        return out

    def max_speed(self, A: np.ndarray) -> float:
        return float(self._speed(np.log(self.kin.f(A) * self._ones), self.mesh.h))

    def max_diffusivity(self, A: np.ndarray) -> float:
        return max(1.0, self.params.eps * float(np.max(effective_diffusivity(A, self.params, self.kin))))

    def spectral_radius(self, Y: np.ndarray) -> float:
        """Gershgorin-type bound on the Jacobian spectral radius (used to size RKC)."""
        h, dim, lam = self.mesh.h, self.mesh.dim, self.params.lambda0
        amax, rmax = float(np.max(Y[0])), float(np.max(Y[1]))
        react = 1.0 + rmax + amax + lam * (amax + rmax)
        return 4.0 * dim * self.max_diffusivity(Y[0]) / (h * h) + 2.0 * dim * self.max_speed(Y[0]) / h + react


def rhs(
    state: FieldPair,
    params: ModelParams,
    kin: KineticsPack,
    mesh: Mesh,
    scheme: AdvectionScheme = AdvectionScheme.CENTRAL,
    face_mean: FaceMean = FaceMean.ARITHMETIC,
    reactions: bool = True,
    source: Optional[Source] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Semi-discrete time derivative (dA/dt, drho/dt)."""
    if not (np.all(np.isfinite(state.A)) and np.all(np.isfinite(state.rho))):
        raise NumericalBlowup("non-finite input to rhs", state)
    op = Operator(params, kin, mesh, scheme, face_mean, reactions, source)
    out = op(_stack(state), state.t)
    return out[0], out[1]


def effective_diffusivity(A: np.ndarray, params: ModelParams, kin: KineticsPack) -> np.ndarray:
    """Local A-diffusivity: eta + eta' B (departure) or eta^2 times the slope of B/eta (arrival)."""
    B = A - params.A0
    if params.variant is Variant.DEPARTURE:
        return np.abs(kin.eta(A) + kin.eta1(A) * B)
    return np.abs(kin.eta(A) - kin.eta1(A) * B)


def _stable_dt(op: Operator, A: np.ndarray, config: SolveConfig) -> float:
    h, dim = op.mesh.h, op.mesh.dim
    dt = min(config.dt_max, config.safety * h * h / (2.0 * dim * op.max_diffusivity(A)))
    vmax = op.max_speed(A)
    if vmax > 0:
        dt = min(dt, config.safety * h / vmax)
    return dt


def stable_dt(state, params, kin, mesh, config: SolveConfig) -> float:
    """CFL-bounded RK4 step: parabolic bound over both diffusivities plus the advective bound."""
    return _stable_dt(Operator(params, kin, mesh), state.A, config)


def spectral_radius_bound(state, params, kin, mesh) -> float:
    return Operator(params, kin, mesh).spectral_radius(_stack(state))


# ---------------------------------------------------------------- time stepping

def _stack(state: FieldPair) -> np.ndarray:
    return np.stack([np.asarray(state.A, dtype=float), np.asarray(state.rho, dtype=float)])


def _unstack(Y: np.ndarray, t: float) -> FieldPair:
    return FieldPair(Y[0].copy(), Y[1].copy(), t)


def _admissible(Y: np.ndarray) -> bool:
    return bool(np.all(np.isfinite(Y)) and np.all(Y[0] > 0) and np.all(Y[1] >= 0))


def _rk4(Y, t, dt, F, F0):
    k1 = F0
    k2 = F(Y + (0.5 * dt) * k1, t + 0.5 * dt)
    k3 = F(Y + (0.5 * dt) * k2, t + 0.5 * dt)
    k4 = F(Y + dt * k3, t + dt)
    return Y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _chebyshev(s: int, w0: float):
    """T_j, T_j', T_j'' at w0 for j = 0..s."""
    T = np.zeros(s + 1)
    dT = np.zeros(s + 1)
    d2T = np.zeros(s + 1)
    T[0], T[1] = 1.0, w0
    dT[1] = 1.0
    for j in range(2, s + 1):
        T[j] = 2 * w0 * T[j - 1] - T[j - 2]
        dT[j] = 2 * T[j - 1] + 2 * w0 * dT[j - 1] - dT[j - 2]
        d2T[j] = 4 * dT[j - 1] + 2 * w0 * d2T[j - 1] - d2T[j - 2]
    return T, dT, d2T


_RKC_DAMPING = 2.0 / 13.0


def rkc_stages(dt: float, spectral_radius: float) -> int:
    """Smallest stage count whose real stability interval (~0.653 s^2) covers dt * radius."""
    return max(2, int(math.ceil(math.sqrt(1.0 + 1.54 * dt * spectral_radius))))


def _rkc(Y0, t0, dt, F, s, F0):
    w0 = 1.0 + _RKC_DAMPING / s**2
    T, dT, d2T = _chebyshev(s, w0)
    w1 = dT[s] / d2T[s]
    b = np.empty(s + 1)
    b[2:] = d2T[2:] / dT[2:] ** 2
    b[0] = b[1] = b[2]
    mu1 = b[1] * w1
    Ym2 = Y0
    Ym1 = Y0 + (mu1 * dt) * F0
    c_prev2, c_prev = 0.0, mu1  # stage abscissae c_{j-2}, c_{j-1}
    for j in range(2, s + 1):
        mu = 2.0 * b[j] * w0 / b[j - 1]
        nu = -b[j] / b[j - 2]
        mut = 2.0 * b[j] * w1 / b[j - 1]
        gam = -(1.0 - b[j - 1] * T[j - 1]) * mut
        Fj = F(Ym1, t0 + c_prev * dt)
        Yj = np.empty_like(Y0)
        _kernels.rkc_combine(Yj, Y0, Ym1, Ym2, Fj, F0, 1.0 - mu - nu, mu, nu, mut * dt, gam * dt)
        c_j = mu * c_prev + nu * c_prev2 + mut + gam
        Ym2, Ym1 = Ym1, Yj
        c_prev2, c_prev = c_prev, c_j
    return Ym1


@dataclass
class StepInfo:
    dt: float
    stages: int
    rejections: int
    residual: float


def _residual(Y: np.ndarray, F: np.ndarray) -> float:
    return float(np.max(np.abs(F))) / (1.0 + float(np.max(np.abs(Y))))


def _advance(op: Operator, Y, t, F0, config: SolveConfig, dt: Optional[float]):
    """One accepted step from (Y, t); returns (Ynew, dt_used, stages, rejections)."""
    if config.integrator is Integrator.RK4:
        cfl = _stable_dt(op, Y[0], config)
        dt = cfl if dt is None else min(dt, cfl)
    else:
        dt = config.dt_max if dt is None else dt
        # While the cell Peclet number of the central scheme stays below 2 the
        # advection-diffusion spectrum is essentially real and already covered
        # by the radius bound; beyond that fall back to the advective CFL limit.
        vmax = op.max_speed(Y[0])
        if vmax * op.mesh.h >= 2.0 or op.upwind:
            dt = min(dt, config.safety * op.mesh.h / vmax)
        radius = op.spectral_radius(Y)
    rejections = 0
    while True:
        try:
            if config.integrator is Integrator.RK4:
                stages = 4
                new = _rk4(Y, t, dt, op, F0)
            else:
                stages = rkc_stages(dt, radius)
                new = _rkc(Y, t, dt, op, stages, F0)
            ok = _admissible(new)
        except (NumericalBlowup, FloatingPointError):
            ok = False
        if ok:
            return new, dt, stages, rejections
        rejections += 1
        dt *= 0.5
        if dt < config.dt_min:
            raise NumericalBlowup(f"step rejected down to dt_min={config.dt_min:g} at t={t:g}", _unstack(Y, t))


def step(
    state: FieldPair,
    params: ModelParams,
    kin: KineticsPack,
    mesh: Mesh,
    config: SolveConfig,
    dt: Optional[float] = None,
    reactions: bool = True,
    source: Optional[Source] = None,
    return_info: bool = False,
):
    """Advance one explicit step; rejects and halves dt on loss of positivity or finiteness.

    With ``dt=None`` the RK4 integrator uses the CFL-bounded step and RKC uses
    dt_max (capped by the advective limit) with as many stages as stiffness demands.
    """
    op = Operator(params, kin, mesh, config.advection_scheme, config.face_mean, reactions, source)
    Y = _stack(state)
    F0 = op(Y, state.t)
    new, dt_used, stages, rej = _advance(op, Y, state.t, F0, config, dt)
    out = _unstack(new, state.t + dt_used)
    if return_info:
        return out, StepInfo(dt_used, stages, rej, _residual(Y, F0))
    return out


@dataclass
class RunResult:
    final: FieldPair
    snapshots: list[FieldPair]
    outcome: Outcome
    residual: float
    steps: int
    rhs_evals: int
    wall_time: float
    message: str = ""


def steady_residual(state, params, kin, mesh, config: SolveConfig) -> float:
    """Normalised residual ||rhs||_inf / (1 + ||state||_inf)."""
    op = Operator(params, kin, mesh, config.advection_scheme, config.face_mean)
    Y = _stack(state)
    return _residual(Y, op(Y, state.t))


_STALL_STEPS = 50
_POLISH_FACTOR = 100.0
_MAX_POLISH = 4


def run_to_steady(
    state0: FieldPair,
    params: ModelParams,
    kin: KineticsPack,
    mesh: Mesh,
    config: SolveConfig,
    on_snapshot: Optional[Callable[[FieldPair], None]] = None,
) -> RunResult:
    """Integrate until the normalised residual drops below ss_tol or t_end is reached.

    A residual below ss_tol only counts as steady when it is not larger than at
    the previous step, so a state sliding off an unstable equilibrium is not
    mistaken for convergence. The initial state is accepted immediately.
    """
    start = _time.perf_counter()
    op = Operator(params, kin, mesh, config.advection_scheme, config.face_mean)
    Y = _stack(state0)
    t = float(state0.t)
    snaps = []

    def emit():
        snaps.append(_unstack(Y, t))
        if on_snapshot:
            on_snapshot(snaps[-1])

    emit()
    next_snap = t + config.snapshot_every
    steps = 0
    dt = config.dt_init
    residual = prev = math.inf
    outcome = Outcome.T_END_REACHED
    message = ""
    # Near convergence the residual of long RKC steps levels off at a roundoff
    # floor set by high-frequency noise; when progress stalls, shorter steps
    # damp that noise. If a few reductions do not help, the floor is genuine
    # slow drift: restore the full step and stop polishing.
    dt_cap = config.dt_max
    best, stall, polishes = math.inf, 0, 0
    while True:
        try:
            F0 = op(Y, t)
        except NumericalBlowup as exc:
            outcome, message = Outcome.BLOWUP, str(exc)
            break
        residual = _residual(Y, F0)
        if residual < config.ss_tol and (steps == 0 or residual <= prev):
            outcome = Outcome.STEADY_STATE
            break
        prev = residual
        if t >= config.t_end - 1e-12 or steps >= config.max_steps:
            break
        if residual < 0.95 * best:
            best, stall = residual, 0
        else:
            stall += 1
            if stall >= _STALL_STEPS and residual < _POLISH_FACTOR * config.ss_tol and polishes <= _MAX_POLISH:
                polishes += 1
                dt_cap = max(dt_cap / 4.0, config.dt_min) if polishes <= _MAX_POLISH else config.dt_max
                best, stall = residual, 0
        # grow towards the cap, never past the next snapshot or t_end
        dt_try = min(dt_cap, dt * 2.0, config.t_end - t, max(next_snap - t, config.dt_min))
        try:
            Y, dt_used, _, rej = _advance(op, Y, t, F0, config, dt_try)
        except NumericalBlowup as exc:
            outcome, message = Outcome.BLOWUP, str(exc)
            break
        steps += 1
        t += dt_used
        if dt_try >= dt or rej:
            dt = dt_used
        if t >= next_snap - 1e-12:
            emit()
            while next_snap <= t + 1e-12:
                next_snap += config.snapshot_every
    if snaps[-1].t != t or len(snaps) == 1:
        emit()
    final = _unstack(Y, t)
    return RunResult(final, snaps, outcome, residual, steps, op.evals, _time.perf_counter() - start, message)


def perturbed_state(params: ModelParams, mesh: Mesh, modes_A=(), modes_rho=(), noise=0.0, seed=0) -> FieldPair:
    """Homogeneous state plus cosine perturbations ``[(index, amplitude), ...]`` and optional noise.

    Indices follow the wavenumber convention cos(k pi x / L) (unnormalised cosines).
    """
    st = homogeneous_fields(params, mesh)
    coords = mesh.coords()
    L = mesh.domain.L

    def cos_mode(idx):
        if mesh.dim == 1:
            k = idx[0] if isinstance(idx, (tuple, list)) else idx
            return np.cos(k * math.pi * coords / L)
        m, n = idx
        return np.cos(m * math.pi * coords[0] / L) * np.cos(n * math.pi * coords[1] / L)

    for idx, amp in modes_A:
        st.A = st.A + amp * cos_mode(idx)
    for idx, amp in modes_rho:
        st.rho = st.rho + amp * cos_mode(idx)
    if noise:
        rng = np.random.default_rng(seed)
        st.A = st.A + noise * rng.standard_normal(mesh.shape)
        st.rho = st.rho + noise * rng.standard_normal(mesh.shape)
    return st


def reflect(state: FieldPair, axis: int = 0) -> FieldPair:
    """Mirror image x -> L - x along ``axis``."""
    return FieldPair(np.flip(state.A, axis).copy(), np.flip(state.rho, axis).copy(), state.t)


def tile_by_reflection(state: FieldPair, axis: int = 0) -> FieldPair:
    """Concatenate a state on (0, L) with its mirror image to get a state on (0, 2L)."""
    r = reflect(state, axis)
    return FieldPair(np.concatenate([state.A, r.A], axis), np.concatenate([state.rho, r.rho], axis), state.t)
