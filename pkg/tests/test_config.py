from __future__ import annotations

import dataclasses
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from urbancrime.config import (
    RunConfig,
    VariantChoice,
    dumps,
    load,
    loads,
    parse_modes,
)
from urbancrime.errors import ConfigError
from urbancrime.kinetics import Variant
from urbancrime.solver import Integrator
from urbancrime.spectral import DomainKind

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs" / "paper"
PAPER_CONFIGS = sorted(CONFIG_DIR.glob("*.cfg"))


def test_defaults_round_trip():
    cfg = RunConfig()
    assert loads(dumps(cfg)) == cfg


@pytest.mark.parametrize("path", PAPER_CONFIGS, ids=lambda p: p.name)
def test_shipped_configs_load_and_round_trip(path):
    cfg = load(path)
    again = loads(dumps(cfg))
    assert again == cfg
    assert dumps(again) == dumps(cfg)


def test_shipped_config_set_is_complete():
    names = {p.stem for p in PAPER_CONFIGS}
    for t in ("table1", "table2", "table3", "table4", "fig1", "fig3", "fig6a", "fig6b", "fig7"):
        assert t in names
    for prefix, count in (("fig2_", 4), ("fig4_", 4), ("fig5_", 3), ("fig8_", 4), ("fig9_", 3)):
        assert sum(n.startswith(prefix) for n in names) >= count, prefix


def test_parse_example():
    cfg = loads(
        """
        # comment line
        model.variant = both
        model.eps = 0.01   # trailing comment
        domain.kind = square
        domain.L = 3
        grid.n = 32
        ic.A = mode k=1,0 amp=0.01; mode k=2,2 amp=-0.5
        solver.integrator = rk4
        table.L_values = 2, 3, 4
        run.seed = 18446744073709551615
        """
    )
    assert cfg.model.variant is VariantChoice.BOTH
    assert cfg.variants() == [Variant.DEPARTURE, Variant.ARRIVAL]
    assert cfg.domain.kind is DomainKind.SQUARE
    assert cfg.ic.A == (((1, 0), 0.01), ((2, 2), -0.5))
    assert cfg.solve_config().integrator is Integrator.RK4
    assert cfg.table.L_values == (2.0, 3.0, 4.0)
    assert cfg.run.seed == 2**64 - 1
    assert cfg.params(Variant.ARRIVAL).variant is Variant.ARRIVAL
    assert cfg.domain_spec(5.0).L == 5.0


def test_fractional_wavenumber():
    assert parse_modes("mode k=2.5 amp=0.01") == ((2.5, 0.01),)


def _error(text):
    with pytest.raises(ConfigError) as info:
        loads(text)
    return info.value


def test_unknown_key_reports_line_and_key():
    err = _error("model.eps = 0.01\n\nmodel.epsilon = 0.02\n")
    assert err.line == 3 and err.key == "model.epsilon"
    assert "line 3" in str(err) and "model.epsilon" in str(err)


@pytest.mark.parametrize(
    "text,key",
    [
        ("nosection = 1", "nosection"),
        ("bogus.eps = 1", "bogus.eps"),
        ("model.eps = abc", "model.eps"),
        ("model.eps = -1", "model.eps"),
        ("model.lambda0 = 2", "model.lambda0"),
        ("model.variant = sideways", "model.variant"),
        ("model.kinetics = nope", "model.kinetics"),
        ("grid.n = 4", "grid.n"),
        ("grid.n = 3.5", "grid.n"),
        ("ic.A = mode k=1,1 amp=0.1", "ic.A"),
        ("ic.A = wiggle", "ic.A"),
        ("run.seed = -1", "run.seed"),
        ("verify.oracles = conservation, telepathy", "verify.oracles"),
        ("sweep.param = colour", "sweep.param"),
        ("analysis.prominence_frac = 1.5", "analysis.prominence_frac"),
    ],
)
def test_bad_values(text, key):
    err = _error(text)
    assert err.key == key
    assert err.line == 1


def test_duplicate_and_malformed_lines():
    err = _error("model.eps = 0.01\nmodel.eps = 0.02\n")
    assert err.line == 2 and "duplicate" in str(err)
    err = _error("model.eps 0.01\n")
    assert err.line == 1


def test_solver_consistency_checked():
    err = _error("solver.dt_init = 5\nsolver.dt_max = 1\n")
    assert err.key == "solver"


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load(tmp_path / "missing.cfg")


def test_replace_validates():
    cfg = RunConfig()
    new = cfg.replace("model.eps", 0.02)
    assert new.model.eps == 0.02 and cfg.model.eps == 0.029
    with pytest.raises(ConfigError):
        cfg.replace("model.eps", -1.0)


finite = st.floats(1e-6, 1e6, allow_nan=False, allow_infinity=False)


@settings(max_examples=100, deadline=None)
@given(
    eps=finite,
    L=finite,
    lam=st.floats(1e-6, 1.0),
    n=st.integers(8, 4096),
    seed=st.integers(0, 2**64 - 1),
    noise=st.floats(0.0, 1.0),
    variant=st.sampled_from(list(VariantChoice)),
    modes=st.lists(st.tuples(st.integers(0, 50), st.floats(-1, 1, allow_nan=False)), max_size=4),
    Ls=st.lists(finite, max_size=5),
    fit=st.booleans(),
    integrator=st.sampled_from(list(Integrator)),
)
def test_round_trip_property(eps, L, lam, n, seed, noise, variant, modes, Ls, fit, integrator):
    cfg = RunConfig()
    cfg.model.eps, cfg.model.lambda0, cfg.model.variant = eps, lam, variant
    cfg.domain.L = L
    cfg.grid.n = n
    cfg.run.seed = seed
    cfg.ic.noise = noise
    cfg.ic.A = tuple((k, a) for k, a in modes)
    cfg.table.L_values = tuple(Ls)
    cfg.sweep.fit = fit
    cfg.solver = dataclasses.replace(cfg.solver, integrator=integrator)
    again = loads(dumps(cfg))
    assert again == cfg
