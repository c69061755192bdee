"""Neumann Laplacian eigenpairs on (0, L) and (0, L)^2.

Modes are identified by their integer index: ``k >= 1`` on an interval, a pair
``(m, n) != (0, 0)`` on a square. Square eigenvalues are degenerate, so every
scan works with index pairs and never with raw eigenvalues.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Union

import numpy as np

from .errors import ZeroModeExcluded

Index = Union[int, tuple[int, int]]


class DomainKind(str, enum.Enum):
    INTERVAL = "interval"
    SQUARE = "square"


@dataclass(frozen=True)
class DomainSpec:
    kind: DomainKind
    L: float

    def __post_init__(self):
        object.__setattr__(self, "kind", DomainKind(self.kind))
        if not self.L > 0:
            raise ValueError(f"domain length must be positive, got {self.L}")

    @classmethod
    def interval(cls, L: float) -> "DomainSpec":
        return cls(DomainKind.INTERVAL, float(L))

    @classmethod
    def square(cls, L: float) -> "DomainSpec":
        return cls(DomainKind.SQUARE, float(L))

    @property
    def dim(self) -> int:
        return 1 if self.kind is DomainKind.INTERVAL else 2

    @property
    def volume(self) -> float:
        return self.L**self.dim

    def normalize_index(self, index) -> Index:
        if self.kind is DomainKind.INTERVAL:
            if isinstance(index, (tuple, list)):
                if len(index) != 1:
                    raise ValueError(f"interval modes take a single index, got {index!r}")
                index = index[0]
            k = int(index)
            if k < 0:
                raise ValueError(f"mode index must be >= 0, got {k}")
            if k == 0:
                raise ZeroModeExcluded("k = 0 is the constant mode (sigma_0 = 0)")
            return k
        m, n = (int(i) for i in index)
        if m < 0 or n < 0:
            raise ValueError(f"mode indices must be >= 0, got {index!r}")
        if m == 0 and n == 0:
            raise ZeroModeExcluded("(0, 0) is the constant mode (sigma_0 = 0)")
        return (m, n)


def _index_tuple(domain: DomainSpec, index: Index) -> tuple[int, ...]:
    return (index,) if domain.kind is DomainKind.INTERVAL else tuple(index)


def eigenvalue(domain: DomainSpec, index) -> float:
    idx = _index_tuple(domain, domain.normalize_index(index))
    return sum((i * math.pi / domain.L) ** 2 for i in idx)


class SelfIntegrals(NamedTuple):
    I3: float
    I4: float
    Igrad4: float


class Harmonic(NamedTuple):
    """One term c * e of a cosine-product expansion; e has eigenvalue sigma, int e^2 = weight."""

    index: tuple[int, ...]
    sigma: float
    coeff: float
    weight: float


@dataclass(frozen=True)
class EigenMode:
    domain: DomainSpec
    index: Index

    def __post_init__(self):
        object.__setattr__(self, "index", self.domain.normalize_index(self.index))

    @property
    def indices(self) -> tuple[int, ...]:
        return _index_tuple(self.domain, self.index)

    @property
    def sigma(self) -> float:
        return eigenvalue(self.domain, self.index)

    @property
    def norm_const(self) -> float:
        L = self.domain.L
        nz = sum(1 for i in self.indices if i != 0)
        zeros = len(self.indices) - nz
        # each cosine factor contributes sqrt(2/L), each constant factor sqrt(1/L)
        return math.sqrt(2.0 / L) ** nz * math.sqrt(1.0 / L) ** zeros

    @property
    def is_one_dimensional(self) -> bool:
        """True when the eigenfunction varies along a single coordinate."""
        return sum(1 for i in self.indices if i != 0) == 1

    def __call__(self, *coords):
        return evaluate_mode(self, coords[0] if len(coords) == 1 else coords)

    def gradient(self, *coords) -> list[np.ndarray]:
        """Components of grad Phi at the given coordinates."""
        if len(coords) == 1 and isinstance(coords[0], (tuple, list)):
            coords = tuple(coords[0])
        L = self.domain.L
        out = []
        for axis, i in enumerate(self.indices):
            term = -self.norm_const * (i * math.pi / L) * np.sin(i * math.pi * np.asarray(coords[axis]) / L)
            for other, j in enumerate(self.indices):
                if other != axis:
                    term = term * np.cos(j * math.pi * np.asarray(coords[other]) / L)
            out.append(term)
        return out

    def square_expansion(self) -> list[Harmonic]:
        """Exact expansion of Phi^2 into unnormalised Neumann eigenfunctions.

        cos^2(a x) = (1 + cos(2 a x)) / 2, so Phi^2 closes on the index set
        {0, 2i} along each non-constant axis.
        """
        L = self.domain.L
        d = self.domain.dim
        c = self.norm_const**2 / 2 ** sum(1 for i in self.indices if i != 0)
        choices = [(0,) if i == 0 else (0, 2 * i) for i in self.indices]
        terms = []
        for combo in _product(choices):
            sigma = sum((j * math.pi / L) ** 2 for j in combo)
            weight = L**d / 2 ** sum(1 for j in combo if j != 0)
            terms.append(Harmonic(combo, sigma, c, weight))
        return terms


def _product(choices) -> Iterator[tuple[int, ...]]:
    if not choices:
        yield ()
        return
    for head in choices[0]:
        for tail in _product(choices[1:]):
            yield (head,) + tail


def evaluate_mode(mode: EigenMode, grid) -> np.ndarray:
    """Sample norm_const * prod cos(i pi x / L) on grid coordinates.

    ``grid`` is an array of x for intervals, or a pair (X, Y) of broadcastable
    arrays for squares.
    """
    L = mode.domain.L
    if mode.domain.kind is DomainKind.INTERVAL:
        coords = (np.asarray(grid, dtype=float),)
    else:
        X, Y = grid
        coords = (np.asarray(X, dtype=float), np.asarray(Y, dtype=float))
    out = np.asarray(mode.norm_const, dtype=float)
    for i, x in zip(mode.indices, coords):
        out = out * np.cos(i * math.pi * x / L)
    return out


def self_integrals(mode: EigenMode) -> SelfIntegrals:
    """Closed-form integrals of Phi^3, Phi^4 and |grad Phi|^4 over the domain.

    For modes varying along one coordinate, int |grad Phi|^4 = sigma^2 int Phi^4.
    That identity does not carry over to product modes (m, n >= 1): there
    |grad Phi|^4 integrates to (9/4 (a^4 + b^4) + a^2 b^2 / 2) / L^2 with
    a = m pi / L, b = n pi / L.
    """
    L = mode.domain.L
    sigma = mode.sigma
    I4 = sum(h.coeff**2 * h.weight for h in mode.square_expansion())
    if mode.is_one_dimensional:
        Igrad4 = sigma**2 * I4
    else:
        a, b = (i * math.pi / L for i in mode.indices)
        Igrad4 = (2.25 * (a**4 + b**4) + 0.5 * a**2 * b**2) / L**2
    return SelfIntegrals(0.0, I4, Igrad4)


def enumerate_modes(domain: DomainSpec, sigma_max: float) -> list[EigenMode]:
    """All nonzero modes with sigma <= sigma_max, sorted by (sigma, index)."""
    L = domain.L
    imax = int(math.floor(math.sqrt(max(sigma_max, 0.0)) * L / math.pi)) + 1
    modes = []
    if domain.kind is DomainKind.INTERVAL:
        for k in range(1, imax + 1):
            modes.append(EigenMode(domain, k))
    else:
        for m in range(0, imax + 1):
            for n in range(0, imax + 1):
                if m == 0 and n == 0:
                    continue
                modes.append(EigenMode(domain, (m, n)))
    modes = [md for md in modes if md.sigma <= sigma_max * (1 + 1e-14)]
    modes.sort(key=lambda md: (md.sigma, md.indices))
    return modes


def first_modes(domain: DomainSpec, count: int) -> list[EigenMode]:
    """The first ``count`` modes in enumeration order."""
    sigma_max = (math.pi / domain.L) ** 2
    while True:
        modes = enumerate_modes(domain, sigma_max)
        if len(modes) >= count:
            return modes[:count]
        sigma_max *= 2.0
