"""Pattern descriptors for solver output: mode spectra, spikes, amplitudes."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import InsufficientData
from .kinetics import KineticsPack, ModelParams
from .solver import FieldPair, Mesh, Outcome, SolveConfig, perturbed_state, run_to_steady
from .spectral import DomainKind, DomainSpec, EigenMode, Index, evaluate_mode

log = logging.getLogger(__name__)

DEFAULT_PROMINENCE = 0.1
FLAT_TOL = 1e-8


def default_modes(mesh: Mesh, max_index: Optional[int] = None) -> list[EigenMode]:
    """Modes resolved by the mesh: k <= n/2 in 1D, m, n <= min(n/2, 24) on squares."""
    dom = mesh.domain
    if dom.kind is DomainKind.INTERVAL:
        kmax = max_index or mesh.n // 2
        return [EigenMode(dom, k) for k in range(1, kmax + 1)]
    kmax = max_index or min(mesh.n // 2, 24)
    return [EigenMode(dom, (m, n)) for m in range(kmax + 1) for n in range(kmax + 1) if (m, n) != (0, 0)]


def mode_projection(field_: np.ndarray, mesh: Mesh, modes: Optional[Iterable[EigenMode]] = None) -> dict[Index, float]:
    """Coefficients c_k = int (field - mean) Phi_k over the domain.

    The quadrature is the trapezoid rule on the cell centres plus the two
    boundary points, whose values follow from the zero-flux condition (equal
    to the adjacent centre). On a cell-centred grid that reduces to h * sum,
    which is second-order accurate.
    """
    modes = default_modes(mesh) if modes is None else list(modes)
    f = np.asarray(field_, dtype=float)
    f = f - f.mean()
    grid = mesh.coords()
    out = {}
    for m in modes:
        out[m.index] = float(np.sum(f * evaluate_mode(m, grid)) * mesh.cell_volume)
    return out


def dominant_mode(spectrum: dict[Index, float]) -> Optional[Index]:
    if not spectrum:
        return None
    best = max(spectrum.items(), key=lambda kv: abs(kv[1]))
    return best[0] if best[1] != 0.0 else None


# ---------------------------------------------------------------- spike counting


def _neighbours(shape: tuple[int, ...]):
    """Flat neighbour lists: 2-neighbourhood in 1D, 8-neighbourhood in 2D."""
    if len(shape) == 1:
        n = shape[0]
        return [[j for j in (i - 1, i + 1) if 0 <= j < n] for i in range(n)]
    n0, n1 = shape
    nb = []
    for i in range(n0):
        for j in range(n1):
            lst = []
            for di in (-1, 0, 1):
                for dj in (-1, 0, 1):
                    if di == 0 and dj == 0:
                        continue
                    a, b = i + di, j + dj
                    if 0 <= a < n0 and 0 <= b < n1:
                        lst.append(a * n1 + b)
            nb.append(lst)
    return nb


def peak_prominences(field_: np.ndarray) -> list[tuple[int, float]]:
    """(flat index, prominence) of every local maximum.

    Cells are visited from high to low and merged with already visited
    neighbours (union-find). When two regions meet, the one with the lower peak
    ends there: its prominence is its peak height minus the current level. The
    global maximum gets prominence max - min.
    """
    f = np.asarray(field_, dtype=float)
    flat = f.ravel()
    order = np.argsort(-flat, kind="stable")
    nb = _neighbours(f.shape)
    parent = np.full(flat.size, -1)
    peak = {}  # root -> flat index of the region's peak
    prom: dict[int, float] = {}

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in order:
        roots = {find(j) for j in nb[i] if parent[j] != -1}
        parent[i] = i
        if not roots:
            peak[i] = i
            continue
        roots = sorted(roots, key=lambda r: (-flat[peak[r]], peak[r]))
        keep = roots[0]
        for r in roots[1:]:
            prom[peak[r]] = float(flat[peak[r]] - flat[i])
            parent[r] = keep
            del peak[r]
        parent[i] = keep
    lo = float(flat.min())
    for r, p in peak.items():
        prom[p] = float(flat[p] - lo)
    return sorted(prom.items())


@dataclass
class SpikeCount:
    count: int
    locations: list[tuple[float, ...]]
    indices: list[tuple[int, ...]]


def count_spikes(
    field_: np.ndarray,
    mesh: Mesh,
    prominence_frac: float = DEFAULT_PROMINENCE,
    include_boundary: bool = True,
    flat_tol: float = FLAT_TOL,
) -> SpikeCount:
    """Local maxima whose prominence exceeds prominence_frac * (max - min).

    A field whose span is below ``flat_tol * (1 + max|field|)`` counts as
    homogeneous and has no spikes; otherwise roundoff ripples on a relaxed
    state would be reported as peaks.
    """
    if not 0 < prominence_frac < 1:
        raise ValueError("prominence_frac must lie in (0, 1)")
    f = np.asarray(field_, dtype=float)
    span = float(f.max() - f.min())
    if not span > flat_tol * (1.0 + float(np.max(np.abs(f)))):
        return SpikeCount(0, [], [])
    thresh = prominence_frac * span
    idx, locs = [], []
    for flat_i, p in peak_prominences(f):
        if p <= thresh:
            continue
        ij = np.unravel_index(flat_i, f.shape)
        if not include_boundary and any(c == 0 or c == s - 1 for c, s in zip(ij, f.shape)):
            continue
        idx.append(tuple(int(c) for c in ij))
        locs.append(tuple((c + 0.5) * mesh.h for c in ij))
    return SpikeCount(len(idx), locs, idx)


# ---------------------------------------------------------------- reports


@dataclass
class SpikeEvent:
    t: float
    before: int
    after: int

    @property
    def kind(self) -> str:
        return "decrease" if self.after < self.before else "increase"


@dataclass
class PatternReport:
    dominant_mode: Optional[Index]
    mode_spectrum: dict[Index, float]
    spike_count: int
    spike_locations: list[tuple[float, ...]]
    amplitude: float
    monotone: Optional[bool]
    event_log: list[SpikeEvent] = field(default_factory=list)


def is_monotone(A: np.ndarray) -> bool:
    d = np.diff(np.asarray(A, dtype=float))
    return bool(np.all(d > 0) or np.all(d < 0))


def spike_events(
    snapshots: Sequence[FieldPair], mesh: Mesh, prominence_frac: float = DEFAULT_PROMINENCE, include_boundary: bool = True
) -> list[SpikeEvent]:
    events = []
    prev = None
    for snap in snapshots:
        c = count_spikes(snap.A, mesh, prominence_frac, include_boundary).count
        if prev is not None and c != prev:
            events.append(SpikeEvent(float(snap.t), prev, c))
        prev = c
    return events


def analyze(
    state: FieldPair,
    mesh: Mesh,
    modes: Optional[Iterable[EigenMode]] = None,
    prominence_frac: float = DEFAULT_PROMINENCE,
    include_boundary: bool = True,
    snapshots: Optional[Sequence[FieldPair]] = None,
) -> PatternReport:
    spec = mode_projection(state.A, mesh, modes)
    spikes = count_spikes(state.A, mesh, prominence_frac, include_boundary)
    events = spike_events(snapshots, mesh, prominence_frac, include_boundary) if snapshots else []
    return PatternReport(
        dominant_mode=dominant_mode(spec),
        mode_spectrum=spec,
        spike_count=spikes.count,
        spike_locations=spikes.locations,
        amplitude=float(np.max(state.A) - np.min(state.A)),
        monotone=is_monotone(state.A) if mesh.dim == 1 else None,
        event_log=events,
    )


# ---------------------------------------------------------------- amplitude scaling


@dataclass
class ScalingFit:
    exponent: float
    prefactor: float
    eps: list[float]
    amplitudes: list[float]
    excluded: list[float]


def fit_power_law(gaps: Sequence[float], amplitudes: Sequence[float]) -> tuple[float, float]:
    """Least-squares slope and prefactor of log(amplitude) against log(gap)."""
    g = np.asarray(gaps, dtype=float)
    a = np.asarray(amplitudes, dtype=float)
    ok = (g > 0) & (a > 0)
    if ok.sum() < 3:
        raise InsufficientData(f"need at least 3 positive (gap, amplitude) pairs, got {int(ok.sum())}")
    p, c = np.polyfit(np.log(g[ok]), np.log(a[ok]), 1)
    return float(p), float(math.exp(c))


def amplitude_vs_eps(
    params: ModelParams,
    kin: KineticsPack,
    domain: DomainSpec,
    eps_list: Sequence[float],
    config: SolveConfig,
    n: int = 128,
    eps_bar: Optional[float] = None,
    mode: Optional[Index] = None,
    ic_amplitude: float = 0.05,
    min_amplitude: float = 1e-6,
) -> ScalingFit:
    """Run each eps to steady state and fit amplitude ~ (eps_bar - eps)^p.

    Runs ending in Blowup or TEndReached are dropped with a warning, as are
    runs that relaxed back to the homogeneous state.
    """
    from .stability import select_wavemode

    if eps_bar is None or mode is None:
        winners, best = select_wavemode(params, kin, domain)
        mode = winners[0].index if mode is None else mode
        eps_bar = best if eps_bar is None else eps_bar
    mesh = Mesh(domain, n)
    used_eps, amps, excluded = [], [], []
    for eps in eps_list:
        p = params.with_eps(eps)
        st = perturbed_state(p, mesh, modes_A=[(mode, ic_amplitude)], modes_rho=[(mode, ic_amplitude)])
        res = run_to_steady(st, p, kin, mesh, config)
        amp = float(np.max(res.final.A) - np.min(res.final.A))
        if res.outcome is not Outcome.STEADY_STATE or amp < min_amplitude or eps >= eps_bar:
            log.warning("eps=%g excluded from scaling fit (%s, amplitude %.3g)", eps, res.outcome.value, amp)
            excluded.append(eps)
            continue
        used_eps.append(eps)
        amps.append(amp)
    p, c = fit_power_law([eps_bar - e for e in used_eps], amps)
    return ScalingFit(p, c, used_eps, amps, excluded)
