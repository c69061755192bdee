"""Run configuration: flat ``section.key = value`` text with round-tripping.

Example::

    # departure model on (0, 1)
    model.variant = departure
    model.eps = 0.029
    domain.L = 1
    grid.n = 256
    ic.A = mode k=4 amp=0.01
    solver.dt_max = 2

Lines starting with ``#`` and blank lines are ignored. Unknown keys, repeated
keys and values outside their valid range raise :class:`ConfigError` carrying
the offending key and line number.
"""

from __future__ import annotations

import dataclasses
import enum
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

from .errors import ConfigError
from .kinetics import KineticsPack, ModelParams, Variant, builtin_kinetics, builtin_names
from .solver import AdvectionScheme, FaceMean, Integrator, SolveConfig
from .spectral import DomainKind, DomainSpec, Index

ModeAmp = tuple[Index, float]


class VariantChoice(str, enum.Enum):
    DEPARTURE = "departure"
    ARRIVAL = "arrival"
    BOTH = "both"

    def variants(self) -> list[Variant]:
        if self is VariantChoice.BOTH:
            return [Variant.DEPARTURE, Variant.ARRIVAL]
        return [Variant.parse(self.value)]


@dataclass
class ModelSection:
    variant: VariantChoice = VariantChoice.DEPARTURE
    kinetics: str = "paper-default"
    A0: float = 1.0
    Bbar: float = 2.0
    lambda0: float = 0.1
    eps: float = 0.029


@dataclass
class DomainSection:
    kind: DomainKind = DomainKind.INTERVAL
    L: float = 1.0


@dataclass
class GridSection:
    n: int = 256


@dataclass
class ICSection:
    """Cosine perturbations cos(k pi x / L) (or the 2D product) plus optional noise."""

    A: tuple[ModeAmp, ...] = ()
    rho: tuple[ModeAmp, ...] = ()
    noise: float = 0.0


@dataclass
class SolverSection:
    dt_init: float = 1e-3
    dt_min: float = 1e-10
    dt_max: float = 2.0
    safety: float = 0.8
    t_end: float = 20000.0
    ss_tol: float = 1e-9
    snapshot_every: float = 500.0
    advection_scheme: AdvectionScheme = AdvectionScheme.CENTRAL
    integrator: Integrator = Integrator.RKC
    face_mean: FaceMean = FaceMean.ARITHMETIC
    max_steps: int = 50_000_000


@dataclass
class TableSection:
    """Stability-table options: domain sizes to scan, mode cutoff, 2D grid size."""

    L_values: tuple[float, ...] = ()
    modes: Optional[int] = None
    grid: int = 0


@dataclass
class BifurcationSection:
    """Mode for the bifurcation verb; empty means the selected principal mode."""

    mode: Optional[Index] = None
    method: str = "auto"


@dataclass
class AnalysisSection:
    prominence_frac: float = 0.1
    include_boundary: bool = True
    max_mode: Optional[int] = None


@dataclass
class SweepSection:
    """Parameter sweep: one independent run per value of ``param``."""

    param: str = "eps"
    values: tuple[float, ...] = ()
    fit: bool = False


@dataclass
class VerifySection:
    oracles: tuple[str, ...] = ("conservation", "variant_agreement", "linear_algebra", "mms", "scaling")
    mms_n: tuple[int, ...] = (64, 128, 256)
    mms_n_2d: tuple[int, ...] = (32, 64, 128)
    mms_L_2d: float = 5.0
    scaling_eps: tuple[float, ...] = (0.029, 0.030, 0.031, 0.032, 0.033)
    scaling_n: int = 128


@dataclass
class OutputSection:
    dir: str = "out"
    snapshots: bool = True


@dataclass
class RunSection:
    seed: int = 0


SECTIONS = {
    "model": ModelSection,
    "domain": DomainSection,
    "grid": GridSection,
    "ic": ICSection,
    "solver": SolverSection,
    "table": TableSection,
    "bifurcation": BifurcationSection,
    "analysis": AnalysisSection,
    "sweep": SweepSection,
    "verify": VerifySection,
    "output": OutputSection,
    "run": RunSection,
}

SWEEP_PARAMS = ("eps", "L", "A0", "Bbar", "lambda0")
ORACLES = ("conservation", "variant_agreement", "linear_algebra", "mms", "scaling")


@dataclass
class RunConfig:
    model: ModelSection = field(default_factory=ModelSection)
    domain: DomainSection = field(default_factory=DomainSection)
    grid: GridSection = field(default_factory=GridSection)
    ic: ICSection = field(default_factory=ICSection)
    solver: SolverSection = field(default_factory=SolverSection)
    table: TableSection = field(default_factory=TableSection)
    bifurcation: BifurcationSection = field(default_factory=BifurcationSection)
    analysis: AnalysisSection = field(default_factory=AnalysisSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    verify: VerifySection = field(default_factory=VerifySection)
    output: OutputSection = field(default_factory=OutputSection)
    run: RunSection = field(default_factory=RunSection)

    # ------------------------------------------------------------ conversions

    def variants(self) -> list[Variant]:
        return self.model.variant.variants()

    def params(self, variant: Optional[Variant] = None, **overrides) -> ModelParams:
        m = self.model
        v = variant or self.variants()[0]
        vals = dict(A0=m.A0, Bbar=m.Bbar, lambda0=m.lambda0, eps=m.eps)
        vals.update(overrides)
        return ModelParams(vals["A0"], vals["Bbar"], vals["lambda0"], vals["eps"], v)

    def kinetics(self) -> KineticsPack:
        return builtin_kinetics(self.model.kinetics)

    def domain_spec(self, L: Optional[float] = None) -> DomainSpec:
        L = self.domain.L if L is None else L
        if self.domain.kind is DomainKind.INTERVAL:
            return DomainSpec.interval(L)
        return DomainSpec.square(L)

    def solve_config(self) -> SolveConfig:
        return SolveConfig(**dataclasses.asdict(self.solver))

    def replace(self, key: str, value: Any) -> "RunConfig":
        """Copy with one dotted key set to an already typed value (validated)."""
        section, name = key.split(".", 1)
        new = loads(dumps(self))
        setattr(getattr(new, section), name, value)
        validate(new)
        return new


# ------------------------------------------------------------------ value codecs


def _fmt_float(x: float) -> str:
    return repr(float(x))


def _fmt_index(idx: Index) -> str:
    if isinstance(idx, tuple):
        return ",".join(str(i) for i in idx)
    return str(idx)


def _fmt_modes(modes: tuple[ModeAmp, ...]) -> str:
    return "; ".join(f"mode k={_fmt_index(k)} amp={_fmt_float(a)}" for k, a in modes)


_MODE_RE = re.compile(r"^mode\s+k\s*=\s*([0-9.,\s]+?)\s+amp\s*=\s*(\S+)$")


def _parse_wavenumber(text: str):
    """Integer when whole, float otherwise (cos(pi x / 4) on (0, 10) is k = 2.5)."""
    v = float(text)
    if not math.isfinite(v) or v < 0:
        raise ValueError(f"wavenumbers must be finite and non-negative, got {text!r}")
    return int(v) if v.is_integer() else v


def _parse_index(text: str) -> Index:
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if len(parts) == 1:
        return _parse_wavenumber(parts[0])
    if len(parts) == 2:
        return (_parse_wavenumber(parts[0]), _parse_wavenumber(parts[1]))
    raise ValueError(f"bad mode index {text!r}")


def parse_modes(text: str) -> tuple[ModeAmp, ...]:
    """Parse ``mode k=4 amp=0.01; mode k=1,1 amp=0.02`` into ((4, 0.01), ((1, 1), 0.02))."""
    out = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        m = _MODE_RE.match(chunk)
        if not m:
            raise ValueError(f"expected 'mode k=<index> amp=<value>', got {chunk!r}")
        out.append((_parse_index(m.group(1)), float(m.group(2))))
    return tuple(out)


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _split_list(text: str) -> list[str]:
    return [p.strip() for p in text.split(",") if p.strip()]


def _codec(section: str, name: str, default: Any):
    """(parse, format) pair for one field, chosen from its default value and name."""
    if section == "ic" and name in ("A", "rho"):
        return parse_modes, _fmt_modes
    if section == "bifurcation" and name == "mode":
        return (lambda s: None if s.strip() in ("", "auto") else _parse_index(s)), (
            lambda v: "auto" if v is None else _fmt_index(v)
        )
    if isinstance(default, enum.Enum):
        cls = type(default)
        return (lambda s: cls(s.strip().lower())), (lambda v: v.value)
    if isinstance(default, bool):
        return _parse_bool, (lambda v: "true" if v else "false")
    if isinstance(default, int) and not isinstance(default, bool):
        return _parse_int, str
    if isinstance(default, float):
        return float, _fmt_float
    if default is None:  # Optional[int]
        return (lambda s: None if s.strip() in ("", "none", "auto") else _parse_int(s)), (
            lambda v: "none" if v is None else str(v)
        )
    if isinstance(default, tuple):
        sample = default[0] if default else None
        if name in ("oracles",):
            return (lambda s: tuple(_split_list(s))), (lambda v: ", ".join(v))
        if isinstance(sample, int) or name in ("mms_n", "mms_n_2d"):
            return (lambda s: tuple(_parse_int(x) for x in _split_list(s))), (lambda v: ", ".join(str(x) for x in v))
        return (lambda s: tuple(float(x) for x in _split_list(s))), (lambda v: ", ".join(_fmt_float(x) for x in v))
    return (lambda s: s.strip()), str


def _parse_int(s: str) -> int:
    s = s.strip()
    try:
        return int(s)
    except ValueError:
        v = float(s)
        if not v.is_integer():
            raise ValueError(f"expected an integer, got {s!r}") from None
        return int(v)


def _default_of(section: str, name: str) -> Any:
    cls = SECTIONS[section]
    return getattr(cls(), name)


# ------------------------------------------------------------------ parse / dump


def loads(text: str, source: str = "<string>") -> RunConfig:
    cfg = RunConfig()
    seen: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}: expected 'section.key = value'", key=None, line=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key in seen:
            raise ConfigError(f"{source}: duplicate key (first set on line {seen[key]})", key=key, line=lineno)
        seen[key] = lineno
        if "." not in key:
            raise ConfigError(f"{source}: key lacks a section", key=key, line=lineno)
        section, name = key.split(".", 1)
        if section not in SECTIONS or name not in {f.name for f in dataclasses.fields(SECTIONS[section])}:
            raise ConfigError(f"{source}: unknown key", key=key, line=lineno)
        parse, _ = _codec(section, name, _default_of(section, name))
        try:
            setattr(getattr(cfg, section), name, parse(value))
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{source}: bad value: {exc}", key=key, line=lineno) from None
    try:
        validate(cfg)
    except ConfigError as exc:
        if exc.key in seen and exc.line is None:
            raise ConfigError(f"{source}: {exc.detail}", key=exc.key, line=seen[exc.key]) from None
        raise
    return cfg


def load(path: Union[str, Path]) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from None
    return loads(text, source=str(p))


def dumps(cfg: RunConfig) -> str:
    """Serialise every field (defaults included), one ``section.key = value`` per line."""
    lines = []
    for section in SECTIONS:
        obj = getattr(cfg, section)
        for f in dataclasses.fields(obj):
            _, fmt = _codec(section, f.name, _default_of(section, f.name))
            lines.append(f"{section}.{f.name} = {fmt(getattr(obj, f.name))}")
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------------ validation


def _check(cond: bool, key: str, msg: str):
    if not cond:
        raise ConfigError(msg, key=key)


def validate(cfg: RunConfig) -> None:
    m = cfg.model
    for key in ("A0", "Bbar", "eps"):
        v = getattr(m, key)
        _check(math.isfinite(v) and v > 0, f"model.{key}", f"must be positive, got {v}")
    _check(0 < m.lambda0 <= 1, "model.lambda0", f"must lie in (0, 1], got {m.lambda0}")
    _check(m.kinetics in builtin_names(), "model.kinetics", f"unknown kinetics {m.kinetics!r}; choose from {builtin_names()}")
    _check(math.isfinite(cfg.domain.L) and cfg.domain.L > 0, "domain.L", "must be positive")
    _check(cfg.grid.n >= 8, "grid.n", "need at least 8 cells per axis")
    _check(cfg.ic.noise >= 0, "ic.noise", "must be non-negative")
    for key in ("A", "rho"):
        for idx, amp in getattr(cfg.ic, key):
            _check(math.isfinite(amp), f"ic.{key}", "amplitudes must be finite")
            two = isinstance(idx, tuple)
            _check(two == (cfg.domain.kind is DomainKind.SQUARE), f"ic.{key}", f"index {idx} does not match domain.kind")
    try:
        cfg.solve_config()
    except ValueError as exc:
        raise ConfigError(str(exc), key="solver") from None
    _check(all(L > 0 for L in cfg.table.L_values), "table.L_values", "domain sizes must be positive")
    _check(cfg.table.modes is None or cfg.table.modes >= 1, "table.modes", "must be >= 1")
    _check(cfg.table.grid >= 0, "table.grid", "must be >= 0")
    _check(cfg.bifurcation.method in ("auto", "system", "harmonic"), "bifurcation.method", "auto, system or harmonic")
    _check(0 < cfg.analysis.prominence_frac < 1, "analysis.prominence_frac", "must lie in (0, 1)")
    _check(cfg.sweep.param in SWEEP_PARAMS, "sweep.param", f"one of {SWEEP_PARAMS}")
    unknown = [o for o in cfg.verify.oracles if o not in ORACLES]
    _check(not unknown, "verify.oracles", f"unknown oracle(s) {unknown}; choose from {ORACLES}")
    _check(len(cfg.verify.mms_n) >= 2 and len(cfg.verify.mms_n_2d) >= 2, "verify.mms_n", "need at least two grids")
    _check(cfg.run.seed >= 0, "run.seed", "must be a non-negative integer")
